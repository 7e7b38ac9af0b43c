"""Synthetic datasets with known groups of correlated dimensions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .schema import Dimension, FeatureMatrix, FeatureSchema
from .separation import Partition

LATENT_FNS = ("linear", "quadratic", "sinusoid")


@dataclass(frozen=True)
class Block:
    n_dims: int
    latent_fn: str = "linear"
    noise_sd: float = 0.05

    def __post_init__(self):
        if self.n_dims < 1:
            raise ValueError("a block needs at least one dimension")
        if self.latent_fn not in LATENT_FNS:
            raise ValueError(f"latent_fn must be one of {LATENT_FNS}")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")


@dataclass(frozen=True)
class SynthSpec:
    """Blocks of dimensions driven by one latent each, plus independent dims.

    Block dimensions are a random nonlinear function of a latent drawn
    uniformly from [0, 1], mapped onto roughly [0.1, 0.9]. Independent
    dimensions are a fixed level plus Gaussian noise of ``independent_noise_sd``
    (defaults to the largest block noise), so they share nothing with any other
    dimension.
    """

    blocks: tuple = field(default_factory=tuple)
    n_independent: int = 0
    n_samples: int = 1000
    seed: int = 0
    independent_noise_sd: float | None = None

    def __post_init__(self):
        blocks = tuple(b if isinstance(b, Block) else Block(**b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if self.n_independent < 0 or self.n_samples < 1:
            raise ValueError("n_independent must be >= 0 and n_samples >= 1")

    @classmethod
    def from_sizes(cls, sizes, n_independent=0, n_samples=1000, seed=0, latent_fn="linear",
                   noise_sd=0.05) -> "SynthSpec":
        return cls(tuple(Block(n, latent_fn, noise_sd) for n in sizes), n_independent, n_samples, seed)


def _shape(fn: str, z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """A random function of z in [0, 1] with range exactly [0, 1]."""
    if fn == "linear":
        y = z
    elif fn == "quadratic":
        y = z ** 2 if rng.random() < 0.5 else (1.0 - z) ** 2
    else:
        freq = rng.uniform(0.5, 1.0)
        phase = rng.uniform(-0.25, 0.25) * np.pi
        wave = np.sin(np.pi * freq * np.linspace(0.0, 1.0, 257) + phase)
        y = (np.sin(np.pi * freq * z + phase) - wave.min()) / (wave.max() - wave.min())
    return y if rng.random() < 0.5 else 1.0 - y


def synth_generate(spec: SynthSpec) -> tuple[FeatureMatrix, Partition]:
    rng = np.random.default_rng(spec.seed)
    n = spec.n_samples
    columns, dims, groups = [], [], []
    d = 0
    for b, block in enumerate(spec.blocks):
        z = rng.uniform(0.0, 1.0, size=n)
        group = []
        for k in range(block.n_dims):
            lo = rng.uniform(0.05, 0.2)
            hi = rng.uniform(0.8, 0.95)
            y = lo + (hi - lo) * _shape(block.latent_fn, z, rng)
            if block.noise_sd > 0:
                y = y + rng.normal(0.0, block.noise_sd, size=n)
            columns.append(y)
            dims.append(Dimension(f"block{b}_{block.latent_fn}_{k}"))
            group.append(d)
            d += 1
        groups.append(group)

    sd = spec.independent_noise_sd
    if sd is None:
        sd = max((blk.noise_sd for blk in spec.blocks), default=0.05)
    independent = []
    for k in range(spec.n_independent):
        level = rng.uniform(0.2, 0.8)
        columns.append(level + (rng.normal(0.0, sd, size=n) if sd > 0 else np.zeros(n)))
        dims.append(Dimension(f"independent_{k}"))
        independent.append(d)
        d += 1

    schema = FeatureSchema(dims)
    values = np.column_stack(columns) if columns else np.zeros((n, 0))
    g0 = None
    if independent:
        groups.append(independent)
        g0 = len(groups) - 1
    truth = Partition(groups, d, g0, None, schema.fingerprint(), schema.names)
    return FeatureMatrix(schema, values, row_keys=list(range(n))), truth
