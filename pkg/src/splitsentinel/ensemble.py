"""Per-group autoencoders that keep scoring when some groups become unusable."""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import autoencoder as ae
from .autoencoder import AEConfig, AEModel
from .errors import DataError, NoModelError, SchemaError, ShapeError
from .schema import FeatureMatrix, FeatureSchema
from .separation import Partition

MANIFEST_VERSION = 1


def group_seed(base_seed: int, group_index: int, n_groups: int) -> int:
    """Seed for one group model.

    A one-group partition keeps ``base_seed`` so it reproduces the monolithic
    model exactly; otherwise seeds are hashed per group.
    """
    if n_groups == 1:
        return int(base_seed)
    digest = hashlib.sha256(f"{int(base_seed)}:{int(group_index)}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


@dataclass(frozen=True)
class SchemaChange:
    removed_dimensions: frozenset = frozenset()
    added_dimensions: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "removed_dimensions", frozenset(self.removed_dimensions))
        object.__setattr__(self, "added_dimensions", frozenset(self.added_dimensions))

    def validate(self, schema: FeatureSchema) -> None:
        unknown = sorted(n for n in self.removed_dimensions if n not in schema)
        if unknown:
            raise SchemaError(f"cannot remove unknown dimensions: {unknown[:5]}")
        clash = sorted(n for n in self.added_dimensions if n in schema)
        if clash:
            raise SchemaError(f"added dimensions already exist: {clash[:5]}")

    @classmethod
    def from_dict(cls, doc: dict) -> "SchemaChange":
        return cls(frozenset(doc.get("removed", doc.get("removed_dimensions", ()))),
                   frozenset(doc.get("added", doc.get("added_dimensions", ()))))

    def to_dict(self) -> dict:
        return {"removed": sorted(self.removed_dimensions), "added": sorted(self.added_dimensions)}


@dataclass
class DividedDetector:
    partition: Partition
    models: list
    availability: list
    full_schema: FeatureSchema
    unmodeled_dimensions: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.partition) == 0:
            raise ValueError("detector needs at least one group")
        if self.partition.n_dims != len(self.full_schema):
            raise SchemaError("partition size differs from schema width")
        if len(self.models) != len(self.partition) or len(self.availability) != len(self.partition):
            raise ValueError("need one model and one availability flag per group")
        for g, model in zip(self.partition.groups, self.models):
            if model.schema != self.full_schema.restrict(g):
                raise SchemaError("group model schema does not match its partition group")
        self.availability = [bool(a) for a in self.availability]

    @property
    def n_groups(self) -> int:
        return len(self.partition)

    @property
    def available_groups(self) -> list[int]:
        return [k for k, a in enumerate(self.availability) if a]

    @property
    def available_dims(self) -> list[int]:
        return [d for k in self.available_groups for d in self.partition.groups[k]]

    def coverage(self) -> float:
        return len(self.available_dims) / len(self.full_schema)

    def with_availability(self, availability) -> "DividedDetector":
        return replace(self, availability=list(availability),
                       unmodeled_dimensions=list(self.unmodeled_dimensions))

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.partition.save(directory / "partition.json")
        files = []
        for k, model in enumerate(self.models):
            name = f"group_{k}.model.json"
            model.save(directory / name)
            files.append(name)
        manifest = {
            "format_version": MANIFEST_VERSION,
            "schema": self.full_schema.to_list(),
            "schema_fingerprint": self.full_schema.fingerprint(),
            "availability": self.availability,
            "model_files": files,
            "model_fingerprints": [m.fingerprint() for m in self.models],
            "unmodeled_dimensions": sorted(self.unmodeled_dimensions),
        }
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=1))

    @classmethod
    def load(cls, directory) -> "DividedDetector":
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        if manifest.get("format_version") != MANIFEST_VERSION:
            raise ValueError("unsupported detector manifest version")
        partition = Partition.load(directory / "partition.json")
        models = [AEModel.load(directory / f) for f in manifest["model_files"]]
        for model, fp in zip(models, manifest["model_fingerprints"]):
            if model.fingerprint() != fp:
                raise ValueError("group model does not match manifest fingerprint")
        return cls(partition, models, manifest["availability"],
                   FeatureSchema.from_list(manifest["schema"]),
                   list(manifest.get("unmodeled_dimensions", [])))


def train_divided(data: FeatureMatrix, partition: Partition, config: AEConfig | None = None,
                  jobs: int = 1) -> DividedDetector:
    """Train one autoencoder per group on its column slice of ``data``."""
    config = config or AEConfig()
    if partition.n_dims != data.n_dims:
        raise SchemaError(f"partition covers {partition.n_dims} dims, data has {data.n_dims}")
    if partition.dimension_names is not None and partition.dimension_names != data.schema.names:
        raise SchemaError("partition dimension names do not match data schema")
    if data.n_rows == 0:
        raise DataError("cannot train on an empty dataset")

    n_groups = len(partition)

    def fit_group(k: int) -> AEModel:
        cfg = config.with_seed(group_seed(config.seed, k, n_groups))
        return ae.fit(data.columns(partition.groups[k]), cfg)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            models = list(pool.map(fit_group, range(n_groups)))
    else:
        models = [fit_group(k) for k in range(n_groups)]
    return DividedDetector(partition, models, [True] * n_groups, data.schema)


def group_residuals(detector: DividedDetector, x) -> dict[int, np.ndarray]:
    """Residuals ``x - x'`` of every available group, keyed by group index."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != len(detector.full_schema):
        raise ShapeError(f"expected vectors of length {len(detector.full_schema)}, got shape {x.shape}")
    out = {}
    for k in detector.available_groups:
        xs = x[..., list(detector.partition.groups[k])]
        out[k] = xs - ae.reconstruct(detector.models[k], xs)
    return out


def score(detector: DividedDetector, x):
    """``(1/M_avail) * ||residual||_2`` over dimensions of the available groups."""
    if not detector.available_groups:
        raise NoModelError("no group model is available")
    residuals = group_residuals(detector, x)
    r = np.concatenate([residuals[k] for k in detector.available_groups], axis=-1)
    value = ae.residual_norm(r) / r.shape[-1]
    return float(value) if np.ndim(value) == 0 else value


def _aligned_values(detector: DividedDetector, data: FeatureMatrix) -> np.ndarray:
    if data.schema == detector.full_schema:
        return data.values
    # data laid out under a changed schema: rebuild full-width rows by name,
    # leaving zeros where only disabled groups would read
    values = np.zeros((data.n_rows, len(detector.full_schema)))
    for d in detector.available_dims:
        name = detector.full_schema[d].name
        if name not in data.schema:
            raise SchemaError(f"dimension {name!r} of an available group is missing from data")
        values[:, d] = data.values[:, data.schema.index(name)]
    return values


def score_batch(detector: DividedDetector, data: FeatureMatrix) -> np.ndarray:
    values = _aligned_values(detector, data)
    if values.shape[0] == 0:
        return np.zeros(0)
    return np.atleast_1d(score(detector, values))


def apply_schema_change(detector: DividedDetector, change: SchemaChange) -> tuple[DividedDetector, list[int]]:
    """Disable every group that reads a removed dimension.

    Returns a new detector and the indices of groups disabled by this change.
    """
    change.validate(detector.full_schema)
    removed = {detector.full_schema.index(n) for n in change.removed_dimensions}
    availability = list(detector.availability)
    disabled = []
    for k, g in enumerate(detector.partition.groups):
        if removed.intersection(g) and availability[k]:
            availability[k] = False
            disabled.append(k)
    updated = detector.with_availability(availability)
    updated.unmodeled_dimensions = sorted(set(detector.unmodeled_dimensions) | change.added_dimensions)
    return updated, disabled


def restricted(detector: DividedDetector, groups) -> DividedDetector:
    """A detector holding only ``groups``, over their dimensions alone."""
    groups = list(groups)
    dims = [d for k in groups for d in detector.partition.groups[k]]
    position = {d: i for i, d in enumerate(dims)}
    part = Partition([[position[d] for d in detector.partition.groups[k]] for k in groups], len(dims))
    schema = detector.full_schema.restrict(dims)
    return DividedDetector(part, [detector.models[k] for k in groups], [True] * len(groups), schema)
