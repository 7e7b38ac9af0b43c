"""Minute-binned feature vectors from flow, syslog and MIB records."""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, SchemaError
from .schema import Dimension, FeatureMatrix, FeatureSchema

DEFAULT_BIN = 60.0
FLOW_STATS = ("count", "ipkt", "ibyt")


def to_epoch(ts) -> float:
    """Seconds since the epoch, UTC. Naive datetimes and strings are taken as UTC."""
    if isinstance(ts, datetime):
        if ts.tzinfo is None:
            ts = ts.replace(tzinfo=timezone.utc)
        return ts.timestamp()
    if isinstance(ts, (int, float, np.integer, np.floating)):
        return float(ts)
    text = str(ts).strip()
    try:
        return float(text)
    except ValueError:
        pass
    return to_epoch(datetime.fromisoformat(text.replace("Z", "+00:00")))


def bin_start(ts, bin_seconds: float) -> int:
    return int(math.floor(to_epoch(ts) / bin_seconds) * bin_seconds)


def _grid(observed: Iterable[int], bin_seconds: float, start=None, end=None) -> list[int]:
    observed = list(observed)
    lo = bin_start(start, bin_seconds) if start is not None else (min(observed) if observed else None)
    hi = bin_start(end, bin_seconds) if end is not None else (max(observed) if observed else None)
    if lo is None or hi is None:
        return []
    step = int(bin_seconds)
    return list(range(lo, hi + 1, step))


@dataclass(frozen=True)
class FlowRecord:
    timestamp: object
    src_ip: str
    dst_ip: str
    protocol: str
    server_port: int
    packets: int
    bytes: int

    def __post_init__(self):
        if self.packets < 0 or self.bytes < 0:
            raise ValueError("packet and byte counts must be >= 0")


def _binned_matrix(cells: dict, names: list[str], keys_to_cols, bins: list[int], source: str) -> FeatureMatrix:
    schema = FeatureSchema(Dimension(n, "continuous", source) for n in names)
    values = np.zeros((len(bins), len(names)))
    row_of = {b: i for i, b in enumerate(bins)}
    for (b, key), v in cells.items():
        if b in row_of:
            for col, val in zip(keys_to_cols(key), v):
                values[row_of[b], col] = val
    return FeatureMatrix(schema, values, row_keys=bins)


def flow_feature_name(src_ip, dst_ip, protocol, port, stat) -> str:
    return f"{src_ip}_{dst_ip}_{protocol}_{port}_{stat}"


def featurize_flows(records: Sequence[FlowRecord], bin_seconds: float = DEFAULT_BIN,
                    start=None, end=None) -> FeatureMatrix:
    """Per bin and (srcIP, dstIP, protocol, server port): flow count, packets, bytes.

    Client ports are not part of the key, so flows differing only there merge.
    """
    if bin_seconds <= 0:
        raise ValueError("bin must be > 0")
    acc = defaultdict(lambda: [0, 0, 0])
    for r in records:
        key = (str(r.src_ip), str(r.dst_ip), str(r.protocol), str(r.server_port))
        cell = acc[(bin_start(r.timestamp, bin_seconds), key)]
        cell[0] += 1
        cell[1] += int(r.packets)
        cell[2] += int(r.bytes)
    keys = sorted({k for _, k in acc})
    base = {k: 3 * i for i, k in enumerate(keys)}
    names = [flow_feature_name(*k, stat) for k in keys for stat in FLOW_STATS]
    bins = _grid((b for b, _ in acc), bin_seconds, start, end)
    return _binned_matrix(acc, names, lambda k: range(base[k], base[k] + 3), bins, "flow")


def featurize_syslog(events: Sequence[dict], bin_seconds: float = DEFAULT_BIN,
                     start=None, end=None) -> FeatureMatrix:
    """Occurrence counts per bin and (host, template id)."""
    if bin_seconds <= 0:
        raise ValueError("bin must be > 0")
    acc = defaultdict(lambda: [0])
    for e in events:
        key = (str(e["host"]), str(e["template_id"]))
        acc[(bin_start(e["timestamp"], bin_seconds), key)][0] += 1
    keys = sorted({k for _, k in acc})
    col = {k: i for i, k in enumerate(keys)}
    names = [f"{host}_log{tid}_count" for host, tid in keys]
    bins = _grid((b for b, _ in acc), bin_seconds, start, end)
    return _binned_matrix(acc, names, lambda k: [col[k]], bins, "syslog")


def featurize_mib(samples: Sequence[dict], bin_seconds: float = DEFAULT_BIN,
                  start=None, end=None) -> FeatureMatrix:
    """Last value per bin for every (host, metric name)."""
    if bin_seconds <= 0:
        raise ValueError("bin must be > 0")
    latest = {}
    for s in samples:
        t = to_epoch(s["timestamp"])
        key = (str(s["host"]), str(s["metric_name"]))
        cell = (bin_start(t, bin_seconds), key)
        # ties on timestamp resolved by the larger value, independent of input order
        cand = (t, float(s["value"]))
        if cell not in latest or cand > latest[cell]:
            latest[cell] = cand
    acc = {cell: [v] for cell, (_, v) in latest.items()}
    keys = sorted({k for _, k in acc})
    col = {k: i for i, k in enumerate(keys)}
    names = [f"{host}_{metric}" for host, metric in keys]
    bins = _grid((b for b, _ in acc), bin_seconds, start, end)
    return _binned_matrix(acc, names, lambda k: [col[k]], bins, "mib")


def join_features(parts: Sequence[FeatureMatrix]) -> FeatureMatrix:
    """Column-wise join aligned on row keys; missing bins are zero-filled."""
    parts = list(parts)
    if not parts:
        return FeatureMatrix(FeatureSchema(), np.zeros((0, 0)))
    if len(parts) == 1:
        return parts[0]
    dims = [d for p in parts for d in p.schema]
    schema = FeatureSchema(dims)  # raises SchemaError on duplicate names

    if any(p.row_keys is None for p in parts):
        if len({p.n_rows for p in parts}) != 1:
            raise SchemaError("parts without row keys must have equal row counts")
        return FeatureMatrix(schema, np.hstack([p.values for p in parts]))

    keys = sorted(set().union(*(p.row_keys for p in parts)))
    row_of = {k: i for i, k in enumerate(keys)}
    values = np.zeros((len(keys), len(dims)))
    col = 0
    for p in parts:
        rows = [row_of[k] for k in p.row_keys]
        values[rows, col:col + p.n_dims] = p.values
        col += p.n_dims
    return FeatureMatrix(schema, values, row_keys=keys)


def _read_csv(path, header: Sequence[str]) -> list[tuple[int, dict]]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return []
        missing = [h for h in header if h not in reader.fieldnames]
        if missing:
            raise ParseError(f"missing columns {missing}", path, 1)
        return [(lineno, row) for lineno, row in enumerate(reader, start=2)]


def read_flows(path) -> list[FlowRecord]:
    out = []
    for lineno, row in _read_csv(path, ("timestamp", "src_ip", "dst_ip", "protocol",
                                        "server_port", "packets", "bytes")):
        try:
            to_epoch(row["timestamp"])
            out.append(FlowRecord(row["timestamp"], row["src_ip"], row["dst_ip"], row["protocol"],
                                  int(row["server_port"]), int(row["packets"]), int(row["bytes"])))
        except (TypeError, ValueError) as exc:
            raise ParseError(str(exc), path, lineno) from None
    return out


def read_syslog(path) -> list[dict]:
    rows = _read_csv(path, ("timestamp", "host", "template_id"))
    for lineno, row in rows:
        try:
            to_epoch(row["timestamp"])
        except (TypeError, ValueError) as exc:
            raise ParseError(str(exc), path, lineno) from None
    return [row for _, row in rows]


def read_mib(path) -> list[dict]:
    rows = _read_csv(path, ("timestamp", "host", "metric_name", "value"))
    for lineno, row in rows:
        try:
            to_epoch(row["timestamp"])
            float(row["value"])
        except (TypeError, ValueError) as exc:
            raise ParseError(str(exc), path, lineno) from None
    return [row for _, row in rows]
