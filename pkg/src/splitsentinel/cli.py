"""Command-line entry point: ``splitsentinel <command> ...``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import autoencoder as ae
from . import ensemble, evaluation, featurize, nslkdd
from .attribution import ImportanceMatrix, importance_matrix
from .config import OUT_ENV, RunConfig
from .errors import SplitSentinelError
from .schema import FeatureMatrix
from .separation import Partition, binarize, group_dimensions, threshold_from_ratio
from .synth import SynthSpec, synth_generate

log = logging.getLogger("splitsentinel")


class StageError(Exception):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        super().__init__(f"[{stage}] {cause}")


def _default_out() -> str:
    return os.environ.get(OUT_ENV, "splitsentinel_out")


def _out_dir(args) -> Path:
    out = Path(args.out or _default_out())
    out.mkdir(parents=True, exist_ok=True)
    return out


def _ae_config(args, base: ae.AEConfig | None = None) -> ae.AEConfig:
    base = base or ae.AEConfig()
    if getattr(args, "config", None):
        base = RunConfig.from_mapping(json.loads(Path(args.config).read_text())).ae
    overrides = {}
    for name in ("epochs", "batch_size", "seed", "learning_rate", "lam", "alpha", "reduction_ratio", "loss_form"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return ae.AEConfig(**{**base.to_dict(), **overrides})


def _write_labels(path: Path, labels) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label"])
        w.writerows([[int(v)] for v in labels])


def read_labels(path) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([int(r[-1]) for r in rows[1:] if r], dtype=np.int8)


def _write_scores(path: Path, scores, keys=None) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row_key", "score"])
        keys = keys if keys is not None else range(len(scores))
        w.writerows([[k, repr(float(s))] for k, s in zip(keys, scores)])


def read_scores(path) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([float(r[1]) for r in rows[1:] if r])


# commands

def cmd_ingest(args) -> int:
    out = _out_dir(args)
    src = args.source
    if src == "nslkdd":
        train, test, labels = nslkdd.load_nslkdd(*args.paths[:2])
        train.to_csv(out / "train.csv")
        test.to_csv(out / "test.csv")
        _write_labels(out / "test_labels.csv", labels)
        print(f"nslkdd: train {train.n_rows}x{train.n_dims}, test {test.n_rows}x{test.n_dims}")
        return 0
    if src == "join":
        joined = featurize.join_features([FeatureMatrix.from_csv(p) for p in args.paths])
        joined.to_csv(out / "joined.csv")
        print(f"join: {joined.n_rows}x{joined.n_dims}")
        return 0
    reader, builder = {
        "flows": (featurize.read_flows, featurize.featurize_flows),
        "syslog": (featurize.read_syslog, featurize.featurize_syslog),
        "mib": (featurize.read_mib, featurize.featurize_mib),
    }[src]
    records = [r for p in args.paths for r in reader(p)]
    if not records:
        log.warning("%s: no records in %s", src, ", ".join(args.paths))
    matrix = builder(records, args.bin)
    matrix.to_csv(out / f"{src}.csv")
    print(f"{src}: {matrix.n_rows}x{matrix.n_dims}")
    return 0


def cmd_train(args) -> int:
    data = FeatureMatrix.from_csv(args.data)
    model = ae.fit(data, _ae_config(args))
    path = _out_dir(args) / "model.json"
    model.save(path)
    print(f"trained M={model.n_dims} hidden={model.n_hidden} final loss={model.loss_history[-1]:.6g} -> {path}")
    return 0


def cmd_attribute(args) -> int:
    model = ae.AEModel.load(args.model)
    data = FeatureMatrix.from_csv(args.data)
    imp = importance_matrix(model, data)
    out = _out_dir(args)
    imp.to_json(out / "importance.json")
    imp.to_csv(out / "importance.csv")
    print(f"importance matrix {imp.n_dims}x{imp.n_dims} over {imp.sample_count} samples")
    return 0


def cmd_separate(args) -> int:
    imp = ImportanceMatrix.from_json(args.importance)
    out = _out_dir(args)
    for ratio in args.ratio:
        tau = threshold_from_ratio(imp, ratio)
        part = group_dimensions(binarize(imp, tau), imp.dimension_names)
        path = out / (f"partition_{ratio:g}.json" if len(args.ratio) > 1 else "partition.json")
        part.save(path)
        print(f"ratio {ratio:g}: tau={tau:.6g}, {len(part)} groups {part.sizes}")
    return 0


def cmd_train_divided(args) -> int:
    data = FeatureMatrix.from_csv(args.data)
    part = Partition.load(args.partition)
    det = ensemble.train_divided(data, part, _ae_config(args), jobs=args.jobs)
    out = _out_dir(args) / "detector"
    det.save(out)
    print(f"trained {det.n_groups} group models -> {out}")
    return 0


def cmd_score(args) -> int:
    det = ensemble.DividedDetector.load(args.detector)
    data = FeatureMatrix.from_csv(args.data)
    scores = ensemble.score_batch(det, data)
    path = _out_dir(args) / "scores.csv"
    _write_scores(path, scores, data.row_keys)
    print(f"scored {len(scores)} rows with {len(det.available_groups)}/{det.n_groups} groups -> {path}")
    return 0


def cmd_evaluate(args) -> int:
    scores = read_scores(args.scores)
    labels = read_labels(args.labels)
    res = evaluation.auroc(scores, labels)
    fpr, tpr, _ = evaluation.roc_curve(scores, labels)
    out = _out_dir(args)
    with (out / "roc.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["fpr", "tpr"])
        w.writerows(zip(map(repr, fpr.tolist()), map(repr, tpr.tolist())))
    (out / "auroc.json").write_text(json.dumps(dataclasses.asdict(res)))
    print(f"AUROC {res.auroc:.4f} (pos={res.n_positive}, neg={res.n_negative})")
    return 0


def _pipeline_overrides(args) -> dict:
    o = {}
    if args.seed is not None:
        o["seeds"] = [args.seed]
    for name in ("epochs", "batch_size"):
        if getattr(args, name) is not None:
            o[name] = getattr(args, name)
    if args.ratio is not None:
        o["ratios"] = args.ratio
    if args.jobs is not None:
        o["jobs"] = args.jobs
    if args.out is not None:
        o["out"] = args.out
    if args.nslkdd is not None:
        o["nslkdd"] = args.nslkdd
    return o


def cmd_pipeline(args) -> int:
    try:
        cfg = RunConfig.load(args.config, _pipeline_overrides(args))
    except SplitSentinelError as exc:
        raise StageError("config", exc) from exc
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if cfg.nslkdd:
            train, test, labels = nslkdd.load_nslkdd(cfg.nslkdd)
        else:
            train, test = FeatureMatrix.from_csv(cfg.train), FeatureMatrix.from_csv(cfg.test)
            labels = read_labels(cfg.labels)
    except (SplitSentinelError, OSError) as exc:
        raise StageError("ingest", exc) from exc

    try:
        report = evaluation.run_sweep(train, test, labels, cfg.ratios, cfg.ae, cfg.seeds, jobs=cfg.jobs)
        if cfg.random_k and cfg.random_seeds:
            report.extend(evaluation.run_random_baseline(train, test, labels, cfg.random_k, cfg.ae,
                                                         cfg.random_seeds, jobs=cfg.jobs))
    except SplitSentinelError as exc:
        raise StageError("sweep", exc) from exc

    report.write(out)
    part_dir = out / "partitions"
    part_dir.mkdir(exist_ok=True)
    for (ratio, seed), part in sorted(report.partitions.items()):
        part.save(part_dir / f"partition_{ratio:g}_seed{seed}.json")
    (out / "run_config.json").write_text(json.dumps(cfg.to_dict(), indent=1))
    print(report.table())
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec.from_sizes(args.blocks, args.independent, args.samples,
                                args.seed if args.seed is not None else 0, args.latent, args.noise)
    data, truth = synth_generate(spec)
    out = _out_dir(args)
    data.to_csv(out / "synth.csv")
    truth.save(out / "truth_partition.json")
    print(f"synth: {data.n_rows}x{data.n_dims}, truth groups {truth.sizes}")
    return 0


def cmd_schema_change(args) -> int:
    det = ensemble.DividedDetector.load(args.detector)
    doc = json.loads(Path(args.change).read_text()) if Path(args.change).read_text().strip() else {}
    change = ensemble.SchemaChange.from_dict(doc)
    updated, disabled = ensemble.apply_schema_change(det, change)
    target = Path(args.out) if args.out else Path(args.detector)
    updated.save(target)
    if disabled:
        print(f"disabled: {disabled}")
    else:
        print("0 groups disabled")
    print(f"coverage: {updated.coverage():.4f} ({len(updated.available_dims)}/{len(updated.full_schema)} dims)")
    if updated.unmodeled_dimensions:
        print(f"unmodeled dimensions: {updated.unmodeled_dimensions}")
    return 0


def _add_ae_flags(p, with_seed=True):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    if with_seed:
        p.add_argument("--seed", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--lam", type=float, help="L1 weight penalty")
    p.add_argument("--loss-form", dest="loss_form", choices=ae.LOSS_FORMS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splitsentinel",
                                     description="Correlation-divided autoencoder anomaly detection")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.set_defaults(func=func)
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./splitsentinel_out)")
        return p

    p = add("ingest", cmd_ingest, "convert raw inputs to feature matrices")
    p.add_argument("source", choices=["nslkdd", "flows", "syslog", "mib", "join"])
    p.add_argument("paths", nargs="+")
    p.add_argument("--bin", type=float, default=featurize.DEFAULT_BIN, help="bin width in seconds")

    p = add("train", cmd_train, "train one autoencoder")
    p.add_argument("--data", required=True)
    _add_ae_flags(p)

    p = add("attribute", cmd_attribute, "compute the importance matrix")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)

    p = add("separate", cmd_separate, "threshold the importance matrix into groups")
    p.add_argument("--importance", required=True)
    p.add_argument("--ratio", type=float, nargs="+", default=[0.1])

    p = add("train-divided", cmd_train_divided, "train one autoencoder per group")
    p.add_argument("--data", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--jobs", type=int, default=1)
    _add_ae_flags(p)

    p = add("score", cmd_score, "score a feature matrix with a divided detector")
    p.add_argument("--detector", required=True)
    p.add_argument("--data", required=True)

    p = add("evaluate", cmd_evaluate, "AUROC of scores against labels")
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True)

    p = add("pipeline", cmd_pipeline, "full sweep plus random-division baseline")
    p.add_argument("--config")
    p.add_argument("--nslkdd", help="directory holding KDDTrain+.txt and KDDTest+.txt")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--ratio", type=float, nargs="+")
    p.add_argument("--jobs", type=int)

    p = add("synth", cmd_synth, "generate a synthetic dataset with known groups")
    p.add_argument("--blocks", type=int, nargs="+", default=[4, 3, 5])
    p.add_argument("--independent", type=int, default=3)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--latent", choices=["linear", "quadratic", "sinusoid"], default="linear")
    p.add_argument("--seed", type=int)

    p = add("schema-change", cmd_schema_change, "disable groups hit by removed dimensions")
    p.add_argument("--detector", required=True)
    p.add_argument("--change", required=True, help='JSON {"removed": [...], "added": [...]}')
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SplitSentinelError, OSError, ValueError) as exc:
        print(f"error: [{args.command}] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
