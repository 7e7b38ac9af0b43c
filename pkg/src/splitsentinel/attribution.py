"""DeepLIFT (Rescale rule) contributions of every input dimension to every
reconstructed dimension, against an all-zero reference input.

Entry ``(i, j)`` of a contribution matrix is the contribution of input ``x_i``
to reconstruction ``x'_j``; contributions in column ``j`` sum to
``x'_j(x) - x'_j(0)``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .autoencoder import AEModel
from .errors import DataError, ShapeError
from .schema import FeatureMatrix, check_schema

# below this |delta pre-activation| the Rescale quotient falls back to the derivative
RESCALE_EPS = 1e-9


@dataclass(frozen=True)
class ReferenceActivations:
    pre_activations: tuple
    activations: tuple

    @property
    def output(self) -> np.ndarray:
        return self.activations[-1]


def reference_pass(model: AEModel) -> ReferenceActivations:
    h = np.zeros(model.n_dims)
    pres, acts = [], []
    for layer in model.layers:
        z = layer.weights @ h + layer.bias
        h = layer.activation(z)
        pres.append(z)
        acts.append(h)
    return ReferenceActivations(tuple(pres), tuple(acts))


def _rescale(layer, z, z_ref, y_ref):
    dz = z - z_ref
    small = np.abs(dz) < RESCALE_EPS
    safe = np.where(small, 1.0, dz)
    slope = (layer.activation(z) - y_ref) / safe
    return np.where(small, layer.activation.derivative(z_ref), slope)


def multipliers(model: AEModel, ref: ReferenceActivations, x) -> np.ndarray:
    """Chained multipliers d(x'_j)/d(x_i) in DeepLIFT's sense.

    Returns shape ``(M, M)`` for one vector (index ``[j, i]``), or
    ``(N, M, M)`` for a batch.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.n_dims or x.ndim not in (1, 2):
        raise ShapeError(f"expected vectors of length {model.n_dims}, got shape {x.shape}")
    single = x.ndim == 1
    h = np.atleast_2d(x)
    mult = np.broadcast_to(np.eye(model.n_dims), (h.shape[0], model.n_dims, model.n_dims))
    for k, layer in enumerate(model.layers):
        z = h @ layer.weights.T + layer.bias
        r = _rescale(layer, z, ref.pre_activations[k], ref.activations[k])
        # rows of the layer map scaled by the per-unit rescale factor
        mult = np.einsum("no,oi,nik->nok", r, layer.weights, mult)
        h = layer.activation(z)
    return mult[0] if single else mult


def contributions(model: AEModel, ref: ReferenceActivations, x) -> np.ndarray:
    """(M, M) matrix with entry (i, j) = C(dx_i -> dx'_j); batched input gives (N, M, M)."""
    x = np.asarray(x, dtype=np.float64)
    mult = multipliers(model, ref, x)
    # x_ref = 0, so delta x_i = x_i
    if x.ndim == 1:
        return mult.T * x[:, None]
    return np.transpose(mult, (0, 2, 1)) * x[:, :, None]


@dataclass
class ImportanceMatrix:
    values: np.ndarray
    sample_count: int
    model_fingerprint: str
    dimension_names: list

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ShapeError("importance matrix must be square")
        if not np.all(np.isfinite(self.values)):
            raise DataError("importance matrix has non-finite entries")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if len(self.dimension_names) != self.values.shape[0]:
            raise ShapeError("dimension_names length differs from matrix size")

    @property
    def n_dims(self) -> int:
        return self.values.shape[0]

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.dimension_names)
            for row in self.values:
                w.writerow([repr(float(v)) for v in row])

    def to_json(self, path) -> None:
        doc = {
            "format_version": 1,
            "sample_count": self.sample_count,
            "model_fingerprint": self.model_fingerprint,
            "dimension_names": list(self.dimension_names),
            "values": self.values.tolist(),
        }
        Path(path).write_text(json.dumps(doc))

    @classmethod
    def from_json(cls, path) -> "ImportanceMatrix":
        doc = json.loads(Path(path).read_text())
        return cls(np.array(doc["values"]), doc["sample_count"], doc["model_fingerprint"],
                   doc["dimension_names"])


def importance_matrix(model: AEModel, data: FeatureMatrix, chunk_size: int = 4096) -> ImportanceMatrix:
    """Signed mean of per-sample contribution matrices over ``data``.

    With a single hidden nonlinearity the mean factorizes:
    ``mean C[i, j] = sum_h W_dec[j, h] * W_enc[h, i] * mean_n(r_h(x_n) * x_n[i])``,
    so only an (H, M) moment is accumulated per chunk, in fixed row order.
    """
    check_schema(model.schema, data.schema)
    x = data.values
    n = x.shape[0]
    if n == 0:
        raise DataError("importance matrix needs at least one sample")
    enc, dec = model.encoder, model.decoder
    if not isinstance(dec.activation, nn.Identity):
        return importance_matrix_bruteforce(model, data)
    ref = reference_pass(model)
    # the decoder is linear, so its multiplier is exactly its weight matrix
    moment = np.zeros((model.n_hidden, model.n_dims))
    for start in range(0, n, chunk_size):
        xb = x[start:start + chunk_size]
        z = xb @ enc.weights.T + enc.bias
        r = _rescale(enc, z, ref.pre_activations[0], ref.activations[0])
        moment += r.T @ xb
    moment /= n
    values = np.einsum("jh,hi,hi->ij", dec.weights, enc.weights, moment)
    return ImportanceMatrix(values, n, model.fingerprint(), model.schema.names)


def importance_matrix_bruteforce(model: AEModel, data: FeatureMatrix) -> ImportanceMatrix:
    """Reference implementation: explicit per-sample contributions, then mean."""
    check_schema(model.schema, data.schema)
    ref = reference_pass(model)
    total = np.zeros((model.n_dims, model.n_dims))
    for row in data.values:
        total += contributions(model, ref, row)
    return ImportanceMatrix(total / data.n_rows, data.n_rows, model.fingerprint(), model.schema.names)
