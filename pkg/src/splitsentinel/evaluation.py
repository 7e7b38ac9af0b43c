"""AUROC and the threshold-sweep / random-division experiment harness."""
from __future__ import annotations

import csv
import json
import logging
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from . import autoencoder as ae
from . import ensemble
from .attribution import importance_matrix
from .autoencoder import AEConfig
from .errors import ShapeError, UndefinedAUROCError
from .schema import FeatureMatrix
from .separation import partition_from_importance, random_partition

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RocResult:
    auroc: float
    n_positive: int
    n_negative: int


def _check_labels(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ShapeError(f"{scores.size} scores but {labels.size} labels")
    if not np.all(np.isin(labels, (0, 1))):
        raise ValueError("labels must be 0 or 1")
    labels = labels.astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUROCError("AUROC needs both positive and negative labels")
    return scores, labels, n_pos, n_neg


def auroc(scores, labels) -> RocResult:
    """Mann-Whitney AUROC; tied scores count one half."""
    scores, labels, n_pos, n_neg = _check_labels(scores, labels)
    ranks = rankdata(scores)  # average ranks for ties
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return RocResult(float(u / (n_pos * n_neg)), n_pos, n_neg)


def roc_curve(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(fpr, tpr, thresholds), starting at (0, 0) with threshold +inf."""
    scores, labels, n_pos, n_neg = _check_labels(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    last = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tp = np.cumsum(y)[last]
    fp = (last + 1) - tp
    fpr = np.r_[0.0, fp / n_neg]
    tpr = np.r_[0.0, tp / n_pos]
    return fpr, tpr, np.r_[np.inf, s[last]]


@dataclass
class ExperimentRow:
    kind: str  # "monolithic", "divided" or "random"
    threshold_ratio: float | None
    n_models: int
    group_sizes: list
    auroc: float
    seed: int

    def to_dict(self) -> dict:
        return {"kind": self.kind, "threshold_ratio": self.threshold_ratio, "n_models": self.n_models,
                "group_sizes": list(self.group_sizes), "auroc": self.auroc, "seed": self.seed}


@dataclass
class ExperimentReport:
    rows: list = field(default_factory=list)
    baseline_rows: list = field(default_factory=list)
    n_dims: int | None = None
    # (label, fpr, tpr) kept for roc_<label>.csv
    curves: list = field(default_factory=list, repr=False)
    partitions: dict = field(default_factory=dict, repr=False)

    def extend(self, other: "ExperimentReport") -> None:
        self.rows += other.rows
        self.baseline_rows += other.baseline_rows
        self.curves += other.curves
        self.partitions.update(other.partitions)
        self.n_dims = self.n_dims or other.n_dims
        self.rows.sort(key=lambda r: (r.threshold_ratio, r.seed))

    def summary(self) -> list[dict]:
        """Mean and spread of AUROC per (kind, ratio)."""
        buckets: dict = {}
        for r in self.rows + self.baseline_rows:
            key = (r.kind, r.threshold_ratio, r.n_models if r.kind == "random" else None)
            buckets.setdefault(key, []).append(r)
        out = []
        for (kind, ratio, _), rows in buckets.items():
            values = [r.auroc for r in rows]
            out.append({
                "kind": kind,
                "threshold_ratio": ratio,
                "n_seeds": len(values),
                "mean_auroc": statistics.fmean(values),
                "min_auroc": min(values),
                "max_auroc": max(values),
                "std_auroc": statistics.pstdev(values),
                "n_models": [r.n_models for r in rows],
            })
        return out

    def mean_auroc(self, kind: str, ratio=None) -> float:
        rows = [r for r in self.rows + self.baseline_rows
                if r.kind == kind and (ratio is None or r.threshold_ratio == ratio)]
        if not rows:
            raise KeyError((kind, ratio))
        return statistics.fmean(r.auroc for r in rows)

    def to_dict(self) -> dict:
        return {"n_dims": self.n_dims,
                "rows": [r.to_dict() for r in self.rows],
                "baseline_rows": [r.to_dict() for r in self.baseline_rows],
                "summary": self.summary()}

    def table(self) -> str:
        lines = [f"{'kind':<11}{'ratio':>7}{'seed':>6}{'models':>8}  {'AUROC':>7}  group sizes"]
        for r in self.rows + self.baseline_rows:
            ratio = "-" if r.threshold_ratio is None else f"{r.threshold_ratio:g}"
            lines.append(f"{r.kind:<11}{ratio:>7}{r.seed:>6}{r.n_models:>8}  {r.auroc:7.4f}  "
                         f"{','.join(map(str, r.group_sizes))}")
        lines.append("")
        for s in self.summary():
            ratio = "-" if s["threshold_ratio"] is None else f"{s['threshold_ratio']:g}"
            lines.append(f"{s['kind']:<11}{ratio:>7}  mean {s['mean_auroc']:.4f} "
                         f"[{s['min_auroc']:.4f}, {s['max_auroc']:.4f}] over {s['n_seeds']} seeds")
        return "\n".join(lines)

    def write(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "report.json").write_text(json.dumps(self.to_dict(), indent=1))
        with (directory / "report.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "threshold_ratio", "seed", "n_models", "group_sizes", "auroc"])
            for r in self.rows + self.baseline_rows:
                w.writerow([r.kind, "" if r.threshold_ratio is None else repr(r.threshold_ratio), r.seed,
                            r.n_models, " ".join(map(str, r.group_sizes)), repr(r.auroc)])
        for label, fpr, tpr in self.curves:
            with (directory / f"roc_{label}.csv").open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["fpr", "tpr"])
                w.writerows(zip(map(repr, fpr.tolist()), map(repr, tpr.tolist())))


def _curve(label: str, scores, labels):
    fpr, tpr, _ = roc_curve(scores, labels)
    return (label, fpr, tpr)


def run_sweep(train: FeatureMatrix, test: FeatureMatrix, labels, ratios: Sequence[float],
              config: AEConfig | None = None, seeds: Sequence[int] | None = None,
              jobs: int = 1) -> ExperimentReport:
    """Threshold-ratio sweep.

    Per seed, one base autoencoder and one importance matrix are shared by all
    ratios; ratio 0 scores the base model itself.
    """
    config = config or AEConfig()
    seeds = list(seeds) if seeds is not None else [config.seed]
    report = ExperimentReport(n_dims=train.n_dims)
    for seed in seeds:
        cfg = config.with_seed(seed)
        log.info("seed %d: training base model (M=%d)", seed, train.n_dims)
        base = ae.fit(train, cfg)
        imp = importance_matrix(base, train) if any(r > 0 for r in ratios) else None
        for ratio in sorted(ratios):
            if ratio == 0:
                scores = ae.score_matrix(base, test)
                sizes = [train.n_dims]
            else:
                part = partition_from_importance(imp, ratio, train.schema.fingerprint())
                report.partitions[(ratio, seed)] = part
                if len(part) == 1:
                    # one group trains with the base seed, i.e. reproduces the base model
                    scores = ae.score_matrix(base, test)
                else:
                    log.info("seed %d ratio %g: training %d group models", seed, ratio, len(part))
                    det = ensemble.train_divided(train, part, cfg, jobs=jobs)
                    scores = ensemble.score_batch(det, test)
                sizes = part.sizes
            res = auroc(scores, labels)
            kind = "monolithic" if ratio == 0 else "divided"
            report.rows.append(ExperimentRow(kind, float(ratio), len(sizes), sizes, res.auroc, seed))
            report.curves.append(_curve(f"{ratio:g}_seed{seed}", scores, labels))
    report.rows.sort(key=lambda r: (r.threshold_ratio, r.seed))
    return report


def run_random_baseline(train: FeatureMatrix, test: FeatureMatrix, labels, k: int,
                        config: AEConfig | None = None, seeds: Sequence[int] = (0,),
                        jobs: int = 1) -> ExperimentReport:
    """One random ``k``-way division per seed; the seed drives both split and training."""
    config = config or AEConfig()
    report = ExperimentReport(n_dims=train.n_dims)
    for seed in seeds:
        part = random_partition(train.n_dims, k, seed, train.schema.names)
        det = ensemble.train_divided(train, part, config.with_seed(seed), jobs=jobs)
        scores = ensemble.score_batch(det, test)
        res = auroc(scores, labels)
        report.baseline_rows.append(ExperimentRow("random", None, k, part.sizes, res.auroc, int(seed)))
        report.curves.append(_curve(f"random{k}_seed{seed}", scores, labels))
    return report
