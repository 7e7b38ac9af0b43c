"""Split dimensions into groups from a thresholded importance matrix."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attribution import ImportanceMatrix
from .errors import ShapeError

FORMAT_VERSION = 1


@dataclass(frozen=True)
class BinarizedMatrix:
    entries: np.ndarray
    threshold: float

    def __post_init__(self):
        entries = np.asarray(self.entries)
        if entries.ndim != 2:
            raise ShapeError("binarized matrix must be 2-d")
        object.__setattr__(self, "entries", (entries != 0).astype(np.int8))


@dataclass
class Partition:
    """Disjoint, exhaustive, non-empty groups of dimension indices.

    ``independent_group`` is the index (into ``groups``) of the group that
    pools dimensions connected to nothing, or ``None``.
    """

    groups: list
    n_dims: int
    independent_group: int | None = None
    source_threshold: float | None = None
    schema_fingerprint: str | None = None
    dimension_names: list | None = field(default=None)

    def __post_init__(self):
        self.groups = [tuple(sorted(int(i) for i in g)) for g in self.groups]
        seen = set()
        for g in self.groups:
            if not g:
                raise ValueError("partition contains an empty group")
            overlap = seen.intersection(g)
            if overlap:
                raise ValueError(f"dimensions {sorted(overlap)[:5]} appear in more than one group")
            seen.update(g)
        if seen != set(range(self.n_dims)):
            missing = sorted(set(range(self.n_dims)) - seen)
            raise ValueError(f"partition does not cover dimensions {missing[:5]} (M={self.n_dims})")
        if self.independent_group is not None and not 0 <= self.independent_group < len(self.groups):
            raise ValueError("independent_group index out of range")
        if self.dimension_names is not None and len(self.dimension_names) != self.n_dims:
            raise ValueError("dimension_names length differs from n_dims")

    def __len__(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> list[int]:
        return [len(g) for g in self.groups]

    @property
    def component_count(self) -> int:
        """Number of groups if each independent dimension stood alone."""
        if self.independent_group is None:
            return len(self.groups)
        return len(self.groups) - 1 + len(self.groups[self.independent_group])

    def refines(self, other: "Partition") -> bool:
        """True if every component here lies inside one component of ``other``.

        Independent dimensions count as singletons on both sides.
        """
        owner = {}
        for k, g in enumerate(other.groups):
            for d in g:
                owner[d] = ("solo", d) if k == other.independent_group else k
        for k, g in enumerate(self.groups):
            if k == self.independent_group:
                continue
            if len({owner[d] for d in g}) != 1:
                return False
        return True

    def group_of(self, dim: int) -> int:
        for k, g in enumerate(self.groups):
            if dim in g:
                return k
        raise KeyError(dim)

    def canonical(self) -> frozenset:
        """Order-free view for comparisons: set of (group, is_independent)."""
        return frozenset((frozenset(g), k == self.independent_group) for k, g in enumerate(self.groups))

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "threshold": self.source_threshold,
            "n_dims": self.n_dims,
            "groups": [list(g) for g in self.groups],
            "independent_group": self.independent_group,
            "schema_fingerprint": self.schema_fingerprint,
            "dimension_names": self.dimension_names,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Partition":
        names = doc.get("dimension_names")
        n = doc.get("n_dims", len(names) if names else sum(len(g) for g in doc["groups"]))
        return cls(doc["groups"], n, doc.get("independent_group"), doc.get("threshold"),
                   doc.get("schema_fingerprint"), names)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "Partition":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _values(imp) -> np.ndarray:
    return imp.values if isinstance(imp, ImportanceMatrix) else np.asarray(imp, dtype=np.float64)


def threshold_from_ratio(imp, ratio: float) -> float:
    """ratio times the population variance of all signed entries."""
    if ratio < 0:
        raise ValueError(f"threshold ratio must be >= 0, got {ratio}")
    return float(ratio * np.var(_values(imp)))


def binarize(imp, tau: float) -> BinarizedMatrix:
    if tau < 0:
        raise ValueError(f"threshold must be >= 0, got {tau}")
    tau = abs(float(tau))
    return BinarizedMatrix(np.abs(_values(imp)) > tau, tau)


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1


def group_dimensions(S, dimension_names=None, schema_fingerprint=None) -> Partition:
    """Group output dimensions whose columns are linked through shared nonzero rows.

    Two columns belong together when they share a nonzero row, closed
    transitively. All-zero columns are pooled into one independent group,
    reported last.
    """
    threshold = S.threshold if isinstance(S, BinarizedMatrix) else None
    entries = S.entries if isinstance(S, BinarizedMatrix) else np.asarray(S) != 0
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
        raise ShapeError(f"binarized matrix must be square, got shape {entries.shape}")
    m = entries.shape[1]
    uf = UnionFind(m)
    for row in entries:
        cols = np.flatnonzero(row)
        for c in cols[1:]:
            uf.union(int(cols[0]), int(c))

    active = entries.any(axis=0)
    components: dict[int, list[int]] = {}
    independent = []
    for j in range(m):
        if active[j]:
            components.setdefault(uf.find(j), []).append(j)
        else:
            independent.append(j)
    groups = sorted(components.values(), key=lambda g: g[0])
    g0 = None
    if independent:
        groups.append(independent)
        g0 = len(groups) - 1
    return Partition(groups, m, g0, threshold, schema_fingerprint,
                     list(dimension_names) if dimension_names is not None else None)


def partition_from_importance(imp: ImportanceMatrix, ratio: float, schema_fingerprint=None) -> Partition:
    tau = threshold_from_ratio(imp, ratio)
    return group_dimensions(binarize(imp, tau), imp.dimension_names, schema_fingerprint)


def random_partition(n_dims: int, k: int, seed: int, dimension_names=None) -> Partition:
    """Assign dimensions uniformly at random to ``k`` non-empty groups."""
    if not 1 <= k <= n_dims:
        raise ValueError(f"need 1 <= k <= M, got k={k}, M={n_dims}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_dims)
    labels = np.empty(n_dims, dtype=int)
    # first k dims of the shuffle seed one group each, the rest land anywhere
    labels[order[:k]] = np.arange(k)
    labels[order[k:]] = rng.integers(0, k, size=n_dims - k)
    groups = [np.flatnonzero(labels == g).tolist() for g in range(k)]
    groups.sort(key=lambda g: g[0])
    return Partition(groups, n_dims, None, None, None,
                     list(dimension_names) if dimension_names is not None else None)
