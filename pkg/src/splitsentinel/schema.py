"""Feature schemas and the numeric matrices bound to them."""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, SchemaError, ShapeError

KINDS = ("continuous", "binary", "onehot")
SOURCES = ("flow", "mib", "syslog", "tabular")


@dataclass(frozen=True)
class Dimension:
    name: str
    kind: str = "continuous"
    source: str = "tabular"
    category: str | None = None
    value: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown dimension kind {self.kind!r}")
        if self.source not in SOURCES:
            raise SchemaError(f"unknown dimension source {self.source!r}")
        if self.kind == "onehot" and (self.category is None or self.value is None):
            raise SchemaError(f"onehot dimension {self.name!r} needs category and value")

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind, "source": self.source}
        if self.kind == "onehot":
            d["category"] = self.category
            d["value"] = self.value
        return d


class FeatureSchema:
    """Ordered list of uniquely named dimensions."""

    def __init__(self, dimensions: Iterable[Dimension | str] = ()):
        dims = tuple(d if isinstance(d, Dimension) else Dimension(str(d)) for d in dimensions)
        names = [d.name for d in dims]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate dimension names: {dupes[:5]}")
        self._dims = dims
        self._index = {n: i for i, n in enumerate(names)}

    @classmethod
    def from_names(cls, names: Iterable[str], source: str = "tabular") -> "FeatureSchema":
        return cls(Dimension(n, source=source) for n in names)

    @property
    def dimensions(self) -> tuple[Dimension, ...]:
        return self._dims

    @property
    def names(self) -> list[str]:
        return [d.name for d in self._dims]

    def __len__(self) -> int:
        return len(self._dims)

    def __iter__(self):
        return iter(self._dims)

    def __getitem__(self, i) -> Dimension:
        return self._dims[i]

    def __contains__(self, name) -> bool:
        return name in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, FeatureSchema) and self._dims == other._dims

    def __hash__(self):
        return hash(self._dims)

    def __repr__(self):
        return f"FeatureSchema(M={len(self)})"

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise SchemaError(f"dimension {name!r} not in schema") from None

    def restrict(self, indices: Sequence[int]) -> "FeatureSchema":
        return FeatureSchema(self._dims[i] for i in indices)

    def fingerprint(self) -> str:
        payload = json.dumps(self.to_list(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()

    def to_list(self) -> list[dict]:
        return [d.to_dict() for d in self._dims]

    @classmethod
    def from_list(cls, items: list[dict]) -> "FeatureSchema":
        return cls(Dimension(**item) for item in items)


@dataclass
class FeatureMatrix:
    """N x M float64 values whose columns follow ``schema``."""

    schema: FeatureSchema
    values: np.ndarray
    row_keys: list | None = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1 and values.size == 0:
            values = values.reshape(0, len(self.schema))
        if values.ndim != 2:
            raise ShapeError(f"feature matrix must be 2-d, got shape {values.shape}")
        if values.shape[1] != len(self.schema):
            raise ShapeError(f"row width {values.shape[1]} != schema width {len(self.schema)}")
        if not np.all(np.isfinite(values)):
            raise DataError("feature matrix contains non-finite values")
        if self.row_keys is not None:
            self.row_keys = list(self.row_keys)
            if len(self.row_keys) != values.shape[0]:
                raise ShapeError("row_keys length differs from number of rows")
        self.values = values

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_dims(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.n_rows

    def columns(self, indices: Sequence[int]) -> "FeatureMatrix":
        idx = list(indices)
        return FeatureMatrix(self.schema.restrict(idx), self.values[:, idx], self.row_keys)

    def rows(self, mask_or_index) -> "FeatureMatrix":
        keys = None
        if self.row_keys is not None:
            keys = list(np.asarray(self.row_keys, dtype=object)[mask_or_index])
        return FeatureMatrix(self.schema, self.values[mask_or_index], keys)

    def select(self, names: Sequence[str]) -> "FeatureMatrix":
        """Columns by name, in the given order."""
        return self.columns([self.schema.index(n) for n in names])

    # CSV: first column "row_key", then one column per dimension.
    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row_key"] + self.schema.names)
            keys = self.row_keys if self.row_keys is not None else range(self.n_rows)
            for key, row in zip(keys, self.values):
                w.writerow([key] + [repr(float(v)) for v in row])
        sidecar = schema_sidecar(path)
        sidecar.write_text(json.dumps({"dimensions": self.schema.to_list(),
                                       "has_row_keys": self.row_keys is not None}, indent=1))

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        path = Path(path)
        sidecar = schema_sidecar(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            body = list(reader)
        if sidecar.exists():
            meta = json.loads(sidecar.read_text())
            schema = FeatureSchema.from_list(meta["dimensions"])
            has_keys = meta.get("has_row_keys", True)
        else:
            schema = FeatureSchema.from_names(header[1:])
            has_keys = True
        if schema.names != header[1:]:
            raise SchemaError(f"{path}: header does not match schema sidecar")
        values = np.array([[float(v) for v in row[1:]] for row in body], dtype=np.float64)
        if not body:
            values = np.zeros((0, len(schema)))
        keys = [_parse_key(row[0]) for row in body] if has_keys else None
        return cls(schema, values, keys)


def schema_sidecar(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".schema.json")


def _parse_key(text: str):
    try:
        return int(text)
    except ValueError:
        try:
            return float(text)
        except ValueError:
            return text


def check_schema(expected: FeatureSchema, got: FeatureSchema, what: str = "data") -> None:
    if expected != got:
        raise SchemaError(
            f"{what} schema (M={len(got)}) does not match model schema (M={len(expected)})"
        )
