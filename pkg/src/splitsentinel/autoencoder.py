"""One-hidden-layer autoencoder: construction, training and reconstruction scores."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import nn
from .errors import ConfigError, DataError, SchemaError, ShapeError
from .schema import FeatureMatrix, FeatureSchema, check_schema

FORMAT_VERSION = 1
LOSS_FORMS = ("squared", "norm")


@dataclass(frozen=True)
class AEConfig:
    """Training hyperparameters. Defaults suit tabular benchmarks such as NSL-KDD;
    ``real_log()`` is the setting for minute-binned monitoring logs.

    ``loss_form`` selects the data term used for *training*: ``"squared"``
    is ``(1/M)||x - x'||^2``, ``"norm"`` the unsquared ``(1/M)||x - x'||``.
    Scoring always uses the unsquared form.
    """

    epochs: int = 200
    batch_size: int = 1024
    reduction_ratio: float = 0.25
    alpha: float = 0.2
    lam: float = 5e-5
    norm_p: int = 1
    learning_rate: float = 1e-3
    seed: int = 0
    loss_form: str = "squared"

    def __post_init__(self):
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ConfigError(f"epochs must be an integer >= 1, got {self.epochs}")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ConfigError(f"batch_size must be an integer >= 1, got {self.batch_size}")
        if not 0 < self.reduction_ratio <= 1:
            raise ConfigError(f"reduction_ratio must be in (0, 1], got {self.reduction_ratio}")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if self.lam < 0:
            raise ConfigError(f"lam must be >= 0, got {self.lam}")
        if self.norm_p != 1:
            raise ConfigError("only the L1 weight penalty (norm_p=1) is supported")
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.loss_form not in LOSS_FORMS:
            raise ConfigError(f"loss_form must be one of {LOSS_FORMS}, got {self.loss_form!r}")

    @classmethod
    def benchmark(cls, **overrides) -> "AEConfig":
        return cls(**overrides)

    @classmethod
    def real_log(cls, **overrides) -> "AEConfig":
        return cls(**{"epochs": 1000, "batch_size": 16, **overrides})

    def with_seed(self, seed: int) -> "AEConfig":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        return asdict(self)


def hidden_width(n_dims: int, ratio: float) -> int:
    """Bottleneck width, rounded up so that it never reaches zero."""
    # round before ceil: 0.25 * 4 is exact but e.g. 0.3 * 10 is 3.0000000000000004
    return max(1, math.ceil(round(ratio * n_dims, 9)))


@dataclass
class AEModel:
    encoder: nn.DenseLayer
    decoder: nn.DenseLayer
    schema: FeatureSchema
    config: AEConfig
    loss_history: list = field(default_factory=list)

    def __post_init__(self):
        m = len(self.schema)
        if self.encoder.n_in != m or self.decoder.n_out != m:
            raise ShapeError("encoder input / decoder output must equal schema width")
        if self.decoder.n_in != self.encoder.n_out:
            raise ShapeError("decoder input must equal encoder output")

    @property
    def n_dims(self) -> int:
        return len(self.schema)

    @property
    def n_hidden(self) -> int:
        return self.encoder.n_out

    @property
    def layers(self) -> list[nn.DenseLayer]:
        return [self.encoder, self.decoder]

    def copy(self) -> "AEModel":
        return AEModel(self.encoder.copy(), self.decoder.copy(), self.schema, self.config,
                       list(self.loss_history))

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for layer in self.layers:
            h.update(np.ascontiguousarray(layer.weights).tobytes())
            h.update(np.ascontiguousarray(layer.bias).tobytes())
        return h.hexdigest()

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "schema": self.schema.to_list(),
            "config": self.config.to_dict(),
            "encoder": {"weights": self.encoder.weights.tolist(), "bias": self.encoder.bias.tolist()},
            "decoder": {"weights": self.decoder.weights.tolist(), "bias": self.decoder.bias.tolist()},
            "loss_history": [float(v) for v in self.loss_history],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AEModel":
        if doc.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format_version {doc.get('format_version')!r}")
        config = AEConfig(**doc["config"])
        enc = nn.DenseLayer(doc["encoder"]["weights"], doc["encoder"]["bias"], nn.LeakyReLU(config.alpha))
        dec = nn.DenseLayer(doc["decoder"]["weights"], doc["decoder"]["bias"], nn.Identity())
        return cls(enc, dec, FeatureSchema.from_list(doc["schema"]), config, list(doc["loss_history"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "AEModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def new_model(schema: FeatureSchema, config: AEConfig | None = None) -> AEModel:
    config = config or AEConfig()
    m = len(schema)
    if m == 0:
        raise SchemaError("cannot build an autoencoder for an empty schema")
    rng = np.random.default_rng(config.seed)
    h = hidden_width(m, config.reduction_ratio)
    enc = nn.glorot_layer(m, h, rng, nn.LeakyReLU(config.alpha))
    dec = nn.glorot_layer(h, m, rng, nn.Identity())
    return AEModel(enc, dec, schema, config)


def _check_rows(model: AEModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != model.n_dims:
        raise ShapeError(f"expected vectors of length {model.n_dims}, got shape {x.shape}")
    return x


def reconstruct(model: AEModel, x) -> np.ndarray:
    """D(E(x)) for one vector or a batch of rows."""
    x = _check_rows(model, x)
    _, h = nn.dense_forward(model.encoder, x)
    _, out = nn.dense_forward(model.decoder, h)
    return out


def residual_norm(r: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(r * r, axis=-1))


def anomaly_score(model: AEModel, x):
    """``(1/M) * ||x - D(E(x))||_2``; a float for a vector, an array for a batch."""
    x = _check_rows(model, x)
    score = residual_norm(x - reconstruct(model, x)) / model.n_dims
    return float(score) if np.ndim(score) == 0 else score


def score_matrix(model: AEModel, data: FeatureMatrix) -> np.ndarray:
    check_schema(model.schema, data.schema)
    return np.atleast_1d(anomaly_score(model, data.values))


def _data_term(model: AEModel, x: np.ndarray, out: np.ndarray, form: str):
    """Per-row data loss and its gradient wrt ``out`` (not yet divided by batch size)."""
    m = model.n_dims
    r = out - x
    if form == "squared":
        return np.sum(r * r, axis=1) / m, 2.0 * r / m
    norm = residual_norm(r)
    safe = np.where(norm > 0, norm, 1.0)
    grad = np.where(norm[:, None] > 0, r / (m * safe[:, None]), 0.0)
    return norm / m, grad


def penalty(model: AEModel) -> float:
    return model.config.lam * sum(float(np.abs(layer.weights).sum()) for layer in model.layers)


def loss(model: AEModel, x, form: str | None = None) -> float:
    """Batch-mean data term plus the L1 weight penalty."""
    x = np.atleast_2d(_check_rows(model, x))
    out = reconstruct(model, x)
    per_row, _ = _data_term(model, x, out, form or model.config.loss_form)
    return float(per_row.mean()) + penalty(model)


def loss_gradients(model: AEModel, x, form: str | None = None):
    """``(loss, [(dW_enc, db_enc), (dW_dec, db_dec)])`` for a batch."""
    x = np.atleast_2d(_check_rows(model, x))
    tape = nn.forward(model.layers, x)
    per_row, dout = _data_term(model, x, tape.output, form or model.config.loss_form)
    grads = nn.backward(model.layers, tape, dout / x.shape[0])
    lam = model.config.lam
    grads = [(dW + nn.l1_gradient(layer.weights, lam), db)
             for (dW, db), layer in zip(grads, model.layers)]
    return float(per_row.mean()) + penalty(model), grads


def train(model: AEModel, data: FeatureMatrix) -> AEModel:
    """Minibatch Adam over shuffled epochs. Mutates and returns ``model``."""
    check_schema(model.schema, data.schema)
    x = data.values
    if x.shape[0] == 0:
        raise DataError("cannot train on an empty dataset")
    if not np.all(np.isfinite(x)):
        raise DataError("training data contains non-finite values")

    cfg = model.config
    # separate stream from initialization so shuffles do not depend on layer sizes
    rng = np.random.default_rng([cfg.seed, 1])
    state = nn.AdamState(learning_rate=cfg.learning_rate)
    params = [model.encoder.weights, model.encoder.bias, model.decoder.weights, model.decoder.bias]
    n = x.shape[0]
    bs = cfg.batch_size
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            batch = x[order[start:start + bs]]
            batch_loss, grads = loss_gradients(model, batch)
            total += batch_loss * batch.shape[0]
            nn.adam_update(state, params, [g for pair in grads for g in pair])
        epoch_loss = total / n
        if not math.isfinite(epoch_loss):
            raise DataError("training diverged: non-finite loss")
        model.loss_history.append(epoch_loss)
    return model


def fit(data: FeatureMatrix, config: AEConfig | None = None) -> AEModel:
    return train(new_model(data.schema, config), data)
