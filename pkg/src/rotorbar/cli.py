"""Command-line front end.

    rotorbar simulate --seed 7 --out data/
    rotorbar extract data/manifest.json --out data/
    rotorbar evaluate data/features.csv --seed 7 --out results/
    rotorbar train data/features.csv --seed 7 --trees 100 --features mean_index,impulsion --out model/
    rotorbar predict model/model.json data/features.csv --out verdicts/
    rotorbar report results/report.json --format table

Exit codes: 0 success, 1 usage, 2 data error, 3 convergence error.
"""

import argparse
import contextlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import baselines, evaluation
from .dataset import Dataset, read_feature_csv, write_feature_csv
from .errors import ConfigError, ConvergenceError, DataError, RotorBarError
from .features import FEATURE_NAMES, extract_features
from .forest import ForestConfig, fit_forest
from .io import (
    dumps,
    file_digest,
    iter_manifest_records,
    model_document,
    read_model,
    write_dataset,
    write_text,
)
from .signals import Condition, GeneratorConfig, generate_dataset, preprocess

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CONVERGENCE = 0, 1, 2, 3
LOCK_NAME = ".rotorbar.lock"
CONFIG_KEYS = {"generator", "plan", "trials_per_cell", "classifier", "hyperparameters", "periods"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 means a data error here.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


@contextlib.contextmanager
def output_lock(out_dir):
    """Exclusive lockfile in ``out_dir`` for the duration of a command."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise UsageError(f"output directory {out_dir} is locked by another run ({lock})")
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield out_dir
    finally:
        lock.unlink(missing_ok=True)


def load_config(path):
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must be a JSON object")
    unknown = set(cfg) - CONFIG_KEYS - {"seed"}
    if unknown:
        raise UsageError(f"config {path}: unknown keys {sorted(unknown)}")
    return cfg


def _seed(args, cfg):
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is None:
        raise UsageError("--seed is required (or 'seed' in the config file)")
    if int(seed) < 0:
        raise UsageError("--seed must be non-negative")
    return int(seed)


def _feature_list(text):
    if text is None:
        return None
    names = [n.strip() for n in text.split(",") if n.strip()]
    bad = [n for n in names if n not in FEATURE_NAMES]
    if bad or not names:
        raise UsageError(f"--features: unknown feature names {bad}; choose from {list(FEATURE_NAMES)}")
    return names


def _generator_config(cfg):
    base = GeneratorConfig().to_dict()
    return GeneratorConfig.from_dict({**base, **cfg.get("generator", {})}).validate()


# Commands ---------------------------------------------------------------


def cmd_simulate(args):
    cfg = load_config(args.config)
    seed = _seed(args, cfg)
    gen = _generator_config(cfg)
    trials = args.trials if args.trials is not None else cfg.get("trials_per_cell", 40)
    records = generate_dataset(gen, int(trials), seed)
    provenance = {"command": "simulate", "seed": seed, "trials_per_cell": int(trials),
                  "generator": gen.to_dict()}
    with output_lock(args.out) as out:
        write_dataset(out, records, provenance)
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def cmd_extract(args):
    cfg = load_config(args.config)
    periods = int(cfg.get("periods", 40))
    rows, failures = [], []
    for entry, item in iter_manifest_records(args.manifest):
        if isinstance(item, Exception):
            failures.append((entry.get("trial_id"), entry.get("file"), str(item)))
            continue
        try:
            rows.append((item, extract_features(preprocess(item, periods)).as_array()))
        except DataError as exc:
            failures.append((item.trial_id, entry.get("file"), str(exc)))
    ds = Dataset(
        X=np.array([r[1] for r in rows]).reshape(len(rows), len(FEATURE_NAMES)),
        y=np.array([r[0].condition.label for r in rows], dtype=int),
        feature_names=FEATURE_NAMES,
        trial_id=np.array([r[0].trial_id for r in rows], dtype=int),
        load=tuple(r[0].load.value for r in rows),
    )
    with output_lock(args.out) as out:
        write_feature_csv(out / "features.csv", ds)
        write_text(out / "features.provenance.json", dumps({
            "command": "extract",
            "manifest": Path(args.manifest).name,
            "manifest_sha256": file_digest(args.manifest),
            "periods": periods,
            "failures": [{"trial_id": t, "file": f, "error": e} for t, f, e in failures],
        }))
    print(f"extracted {len(rows)} records to {Path(args.out) / 'features.csv'}")
    if failures:
        for trial_id, file, msg in failures:
            print(f"error: trial {trial_id} ({file}): {msg}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def _plan(args, cfg, seed):
    plan = dict(cfg.get("plan", {}))
    plan["seed"] = seed
    if args.trees is not None:
        plan["tree_counts"] = [args.trees]
    features = _feature_list(args.features)
    if features is not None:
        plan["feature_subsets"] = {"Custom": features}
        plan["baseline_subsets"] = ["Custom"]
    if args.format == "csv":
        plan["keep_scores"] = True
    return evaluation.EvalPlan.from_dict(plan)


def _render(report, fmt):
    if fmt == "json":
        return report.to_json()
    if fmt == "csv":
        return evaluation.importance_csv(report)
    parts = []
    if any(c.classifier == evaluation.FOREST for c in report.cells):
        for metric in ("auc", "accuracy"):
            parts.append(f"Random forest {metric.upper() if metric == 'auc' else metric}"
                         " by tree count, mean (std) over folds, %\n")
            parts.append(evaluation.tree_count_table(report, metric))
            parts.append("\n")
    subset = _comparison_subset(report)
    parts.append(f"Classifier comparison on {subset}, mean (std) over folds, %\n")
    parts.append(evaluation.classifier_table(report, subset))
    parts.append("\nFeature importances (all-feature forest)\n")
    parts.append(evaluation.importance_csv(report))
    return "".join(parts)


def _comparison_subset(report):
    if report.plan.baseline_subsets:
        return report.plan.baseline_subsets[0]
    return report.plan.feature_subsets[0][0]


def _write_report_files(out, report, labels=None):
    write_text(out / "report.json", report.to_json())
    if any(c.classifier == evaluation.FOREST for c in report.cells):
        write_text(out / "table_tree_counts.txt", evaluation.tree_count_table(report))
    write_text(out / "table_classifiers.txt",
               evaluation.classifier_table(report, _comparison_subset(report)))
    write_text(out / "importances.csv", evaluation.importance_csv(report))
    if report.plan.keep_scores and labels is not None:
        for c in report.cells:
            if c.scores is None:
                continue
            trees = f"_{c.n_trees}" if c.n_trees is not None else ""
            write_text(out / "roc" / f"{c.classifier}_{c.subset}{trees}.csv",
                       evaluation.roc_csv(c.scores, labels))


def cmd_evaluate(args):
    cfg = load_config(args.config)
    seed = _seed(args, cfg)
    plan = _plan(args, cfg, seed)
    ds = read_feature_csv(args.features_csv)
    if len(ds) == 0:
        raise DataError(f"{args.features_csv}: no rows to evaluate")
    provenance = {
        "command": "evaluate",
        "features": Path(args.features_csv).name,
        "features_sha256": file_digest(args.features_csv),
        "config": cfg,
    }
    report = evaluation.run_plan(plan, ds, provenance)
    with output_lock(args.out) as out:
        _write_report_files(out, report, ds.y)
    sys.stdout.write(_render(report, args.format))
    failed = [c for c in report.cells if not c.ok]
    for c in failed:
        print(f"error: {c.classifier}/{c.subset}: {c.error}", file=sys.stderr)
    if any(c.error and c.error.startswith("ConvergenceError") for c in failed):
        return EXIT_CONVERGENCE
    return EXIT_DATA if failed else EXIT_OK


def cmd_train(args):
    cfg = load_config(args.config)
    seed = _seed(args, cfg)
    features = _feature_list(args.features) or list(FEATURE_NAMES)
    kind = args.classifier or cfg.get("classifier", evaluation.FOREST)
    if kind not in evaluation.CLASSIFIERS:
        raise UsageError(f"unknown classifier {kind!r}; choose from {list(evaluation.CLASSIFIERS)}")
    ds = read_feature_csv(args.features_csv, features)
    if len(ds) == 0:
        raise DataError(f"{args.features_csv}: no rows to train on")
    if kind == evaluation.FOREST:
        trees = args.trees if args.trees is not None else evaluation.COMPARISON_TREES
        model = fit_forest(ds.X, ds.y, ForestConfig(n_trees=trees, rng_seed=seed), features)
    else:
        hp = dict(cfg.get("hyperparameters", {}).get(kind, {}))
        if kind == "svm_rbf":
            hp.setdefault("seed", seed)
        model = baselines.train(baselines.ClassifierSpec(kind, hp), ds.X, ds.y)
    doc = model_document(kind, model, features, {
        "command": "train",
        "seed": seed,
        "features": Path(args.features_csv).name,
        "features_sha256": file_digest(args.features_csv),
        "config": cfg,
    })
    with output_lock(args.out) as out:
        write_text(out / "model.json", dumps(doc))
    print(f"trained {kind} on {len(ds)} rows, {len(features)} features -> {Path(args.out) / 'model.json'}")
    return EXIT_OK


def cmd_predict(args):
    kind, model, features = read_model(args.model)
    ds = read_feature_csv(args.features_csv, features) if _has_rows(args.features_csv) else None
    header = "trial_id,condition,load,score,prediction\n"
    if ds is None or len(ds) == 0:
        _warn(f"{args.features_csv} has no rows; writing an empty verdict file")
        with output_lock(args.out) as out:
            write_text(out / "verdicts.csv", header)
        print("predicted 0 rows: 0 Healthy, 0 Faulty")
        return EXIT_OK
    if kind == evaluation.FOREST:
        scores = model.predict_proba(ds.X)
    else:
        scores = baselines.score(model, ds.X)
    pred = (scores >= evaluation.decision_threshold(kind)).astype(int)
    lines = [header.rstrip("\n")]
    for i in range(len(ds)):
        truth = Condition.FAULTY if ds.y[i] else Condition.HEALTHY
        verdict = Condition.FAULTY if pred[i] else Condition.HEALTHY
        lines.append(f"{ds.trial_id[i]},{truth.value},{ds.load[i]},{float(scores[i])!r},{verdict.value}")
    with output_lock(args.out) as out:
        write_text(out / "verdicts.csv", "\n".join(lines) + "\n")
    n_f = int(pred.sum())
    print(f"predicted {len(pred)} rows: {len(pred) - n_f} Healthy, {n_f} Faulty")
    return EXIT_OK


def _has_rows(path):
    try:
        with open(path) as fh:
            return sum(1 for line in fh if line.strip()) > 1
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}")


def cmd_report(args):
    try:
        doc = json.loads(Path(args.report).read_text())
    except OSError as exc:
        raise DataError(f"cannot read report {args.report}: {exc.strerror}")
    except json.JSONDecodeError as exc:
        raise DataError(f"report {args.report} is not valid JSON: {exc}")
    try:
        report = report_from_dict(doc)
    except (KeyError, TypeError, AttributeError) as exc:
        raise DataError(f"report {args.report} is malformed: missing or bad field {exc}")
    sys.stdout.write(_render(report, args.format))
    return EXIT_OK


def report_from_dict(doc):
    plan = evaluation.EvalPlan.from_dict(doc["plan"])
    cells = []
    for c in doc["cells"]:
        cell = evaluation.CellResult(
            c["classifier"], c["subset"], c["n_trees"], c["fold_auc"], c["fold_accuracy"],
            c["error"], c.get("scores"),
        )
        cells.append(cell)
    importances = [(d["feature"], d["importance"]) for d in doc["importances"]]
    return evaluation.EvalReport(plan, doc["n_records"], cells, importances, doc.get("provenance", {}))


# Argument parsing -------------------------------------------------------


def build_parser():
    parser = _Parser(prog="rotorbar", description="Broken rotor bar detection from startup current.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, seed=True, out=True):
        if seed:
            p.add_argument("--seed", type=int, help="RNG seed (required for stochastic commands)")
        p.add_argument("--config", help="JSON config file")
        if out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--format", choices=("json", "table", "csv"), default="table")

    p = sub.add_parser("simulate", help="generate synthetic startup records")
    common(p)
    p.add_argument("--trials", type=int, help="trials per (condition, load) cell")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extract", help="preprocess records and compute features")
    p.add_argument("manifest")
    common(p, seed=False)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train one classifier on a feature CSV")
    p.add_argument("features_csv")
    common(p)
    p.add_argument("--classifier", choices=evaluation.CLASSIFIERS)
    p.add_argument("--trees", type=int)
    p.add_argument("--features", help="comma-separated feature names")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score a feature CSV with a trained model")
    p.add_argument("model")
    p.add_argument("features_csv")
    common(p, seed=False)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="cross-validate the evaluation plan")
    p.add_argument("features_csv")
    common(p)
    p.add_argument("--trees", type=int, help="single forest tree count instead of the sweep")
    p.add_argument("--features", help="comma-separated feature subset to evaluate")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render a saved report")
    p.add_argument("report")
    common(p, seed=False, out=False)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "trees", None) is not None and args.trees < 1:
        parser.error("--trees must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"rotorbar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"rotorbar: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"rotorbar: convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (DataError, RotorBarError) as exc:
        print(f"rotorbar: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
