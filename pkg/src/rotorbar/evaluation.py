"""Cross-validated evaluation: folds, AUC/accuracy, tree-count sweep,
classifier comparison and importance-based feature selection."""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from . import baselines
from .baselines import DISPLAY_NAMES, PROBABILITY_SCORES, ClassifierSpec
from .cart import apply_tree
from .errors import (
    ConfigError,
    InsufficientClassSamples,
    RotorBarError,
    UndefinedMetric,
)
from .features import FEATURE_NAMES
from .forest import TREE_COUNTS, ForestConfig, fit_forest

FOREST = "random_forest"
CLASSIFIERS = (FOREST,) + baselines.KINDS
DEFAULT_SUBSETS = (
    ("All13", FEATURE_NAMES),
    ("Top3", ("mean_index", "impulsion", "shape_factor")),
    ("Top2", ("mean_index", "impulsion")),
)
# Tree count used when the forest appears in the classifier comparison.
COMPARISON_TREES = 100


def stratified_folds(labels, k, seed):
    """Split indices into ``k`` folds with per-class round-robin dealing.

    Each class is shuffled with ``default_rng(seed)`` (healthy first, then
    faulty) and dealt to folds 0, 1, ..., k-1, 0, ... Fold index arrays are
    returned sorted.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise ConfigError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        if idx.size < k:
            raise InsufficientClassSamples(
                f"class {cls} has {idx.size} samples, fewer than {k} folds"
            )
        idx = idx[rng.permutation(idx.size)]
        for j, i in enumerate(idx):
            folds[j % k].append(int(i))
    return [np.array(sorted(f), dtype=int) for f in folds]


def auc(scores, labels):
    """Probability that a random faulty row outscores a random healthy one,
    ties counting one half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetric("AUC needs both classes")
    ranks = rankdata(scores)  # average ranks handle ties
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores, labels):
    """ROC vertices ``(fpr, tpr)`` from (0, 0) to (1, 1), one per distinct
    score, thresholds descending."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetric("ROC needs both classes")
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    last = np.r_[s[1:] != s[:-1], True]
    tp = np.cumsum(y)[last]
    fp = np.cumsum(1 - y)[last]
    fpr = np.r_[0.0, fp / n_neg]
    tpr = np.r_[0.0, tp / n_pos]
    return fpr, tpr


def accuracy(scores, labels, threshold):
    pred = (np.asarray(scores, dtype=float) >= threshold).astype(int)
    return float(np.mean(pred == np.asarray(labels, dtype=int)))


def decision_threshold(kind):
    return 0.5 if kind in PROBABILITY_SCORES else 0.0


@dataclass(frozen=True)
class EvalPlan:
    folds: int = 5
    seed: int = 0
    classifiers: tuple = CLASSIFIERS
    tree_counts: tuple = TREE_COUNTS
    feature_subsets: tuple = DEFAULT_SUBSETS  # (name, feature names) pairs
    # Baselines are compared on these subsets only; None means all of them.
    baseline_subsets: tuple | None = ("All13",)
    hyperparameters: dict = field(default_factory=dict)  # kind -> overrides
    importance_trees: int = 100
    keep_scores: bool = False

    def __post_init__(self):
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        unknown = [c for c in self.classifiers if c not in CLASSIFIERS]
        if unknown:
            raise ConfigError(f"unknown classifiers {unknown}")
        if not self.feature_subsets:
            raise ConfigError("at least one feature subset is required")
        for name, names in self.feature_subsets:
            if not names:
                raise ConfigError(f"feature subset {name!r} is empty")
            bad = [n for n in names if n not in FEATURE_NAMES]
            if bad:
                raise ConfigError(f"feature subset {name!r} has unknown features {bad}")
        if any(int(t) < 1 for t in self.tree_counts):
            raise ConfigError("tree counts must be positive")
        if self.baseline_subsets is not None:
            known = {name for name, _ in self.feature_subsets}
            missing = [s for s in self.baseline_subsets if s not in known]
            if missing:
                raise ConfigError(f"baseline_subsets names unknown subsets {missing}")

    def spec_for(self, kind):
        return ClassifierSpec(kind, dict(self.hyperparameters.get(kind, {})))

    def to_dict(self):
        return {
            "folds": self.folds,
            "seed": self.seed,
            "classifiers": list(self.classifiers),
            "tree_counts": [int(t) for t in self.tree_counts],
            "feature_subsets": {name: list(names) for name, names in self.feature_subsets},
            # JSON objects are written with sorted keys; keep the column order
            "subset_order": [name for name, _ in self.feature_subsets],
            "baseline_subsets": (
                list(self.baseline_subsets) if self.baseline_subsets is not None else None
            ),
            "hyperparameters": {k: dict(v) for k, v in sorted(self.hyperparameters.items())},
            "importance_trees": self.importance_trees,
            "keep_scores": self.keep_scores,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        order = d.pop("subset_order", None)
        if "feature_subsets" in d:
            subsets = d["feature_subsets"]
            if order is not None and sorted(order) == sorted(subsets):
                subsets = {name: subsets[name] for name in order}
            d["feature_subsets"] = tuple((name, tuple(names)) for name, names in subsets.items())
        for key in ("classifiers", "tree_counts", "baseline_subsets"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown plan keys {sorted(unknown)}")
        return cls(**d)


@dataclass
class CellResult:
    classifier: str
    subset: str
    n_trees: int | None
    fold_auc: list
    fold_accuracy: list
    error: str | None = None
    scores: list | None = None  # pooled out-of-fold scores, row order

    @property
    def ok(self):
        return self.error is None

    @property
    def auc_mean(self):
        return float(np.mean(self.fold_auc)) if self.ok else None

    @property
    def auc_std(self):
        return float(np.std(self.fold_auc)) if self.ok else None

    @property
    def accuracy_mean(self):
        return float(np.mean(self.fold_accuracy)) if self.ok else None

    @property
    def accuracy_std(self):
        return float(np.std(self.fold_accuracy)) if self.ok else None

    def to_dict(self):
        d = {
            "classifier": self.classifier,
            "subset": self.subset,
            "n_trees": self.n_trees,
            "auc_mean": self.auc_mean,
            "auc_std": self.auc_std,
            "accuracy_mean": self.accuracy_mean,
            "accuracy_std": self.accuracy_std,
            "fold_auc": list(self.fold_auc),
            "fold_accuracy": list(self.fold_accuracy),
            "error": self.error,
        }
        if self.scores is not None:
            d["scores"] = list(self.scores)
        return d


@dataclass
class EvalReport:
    plan: EvalPlan
    n_records: int
    cells: list
    importances: list  # (name, importance), descending
    provenance: dict = field(default_factory=dict)

    def cell(self, classifier, subset, n_trees=None):
        for c in self.cells:
            if c.classifier == classifier and c.subset == subset and c.n_trees == n_trees:
                return c
        raise KeyError((classifier, subset, n_trees))

    def to_dict(self):
        return {
            "plan": self.plan.to_dict(),
            "n_records": self.n_records,
            "cells": [c.to_dict() for c in self.cells],
            "importances": [{"feature": n, "importance": v} for n, v in self.importances],
            "provenance": self.provenance,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def cross_validate(fit_score, X, y, folds, threshold):
    """Per-fold AUC and accuracy for ``fit_score(X_train, y_train, X_test)``.

    ``fit_score`` only ever sees training rows' labels. Returns
    ``(fold_auc, fold_accuracy, pooled_scores)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    pooled = np.empty(len(y))
    fold_auc, fold_acc = [], []
    all_rows = np.arange(len(y))
    for test in folds:
        train = np.setdiff1d(all_rows, test)
        s = np.asarray(fit_score(X[train], y[train], X[test]), dtype=float)
        pooled[test] = s
        fold_auc.append(auc(s, y[test]))
        fold_acc.append(accuracy(s, y[test], threshold))
    return fold_auc, fold_acc, pooled


def _forest_sweep(X, y, folds, tree_counts, seed):
    """Out-of-fold forest probabilities for every tree count at once.

    Tree ``i`` depends only on ``(seed, i)``, so the n-tree forest is the
    first n trees of the largest one and one fit per fold suffices.
    """
    counts = sorted({int(t) for t in tree_counts})
    n_max = counts[-1]
    scores = {t: np.empty(len(y)) for t in counts}
    all_rows = np.arange(len(y))
    for test in folds:
        train = np.setdiff1d(all_rows, test)
        model = fit_forest(X[train], y[train], ForestConfig(n_trees=n_max, rng_seed=seed))
        running = np.zeros(test.size)
        for i, tree in enumerate(model.trees, start=1):
            running += [leaf.probability for leaf in apply_tree(tree, X[test])]
            if i in scores:
                scores[i][test] = running / i
    return scores


def _metrics_from_pooled(pooled, y, folds, threshold):
    fold_auc = [auc(pooled[f], y[f]) for f in folds]
    fold_acc = [accuracy(pooled[f], y[f], threshold) for f in folds]
    return fold_auc, fold_acc


def _baseline_fit_score(spec):
    def fit_score(X_train, y_train, X_test):
        return baselines.score(baselines.train(spec, X_train, y_train), X_test)

    return fit_score


def run_plan(plan, dataset, provenance=None):
    """Evaluate every (classifier, subset[, tree count]) cell of ``plan``.

    A failing cell records its error message; the rest of the run goes on.
    """
    y = dataset.y
    folds = stratified_folds(y, plan.folds, plan.seed)
    cells = []
    for subset_name, names in plan.feature_subsets:
        X = dataset.select(names).X
        for kind in plan.classifiers:
            if kind == FOREST:
                cells.extend(_forest_cells(plan, X, y, folds, subset_name))
                continue
            if plan.baseline_subsets is not None and subset_name not in plan.baseline_subsets:
                continue
            cell = CellResult(kind, subset_name, None, [], [])
            try:
                fold_auc, fold_acc, pooled = cross_validate(
                    _baseline_fit_score(plan.spec_for(kind)), X, y, folds, decision_threshold(kind)
                )
                cell.fold_auc, cell.fold_accuracy = fold_auc, fold_acc
                if plan.keep_scores:
                    cell.scores = pooled.tolist()
            except RotorBarError as exc:
                cell.error = f"{type(exc).__name__}: {exc}"
            cells.append(cell)

    full = dataset.select(FEATURE_NAMES)
    model = fit_forest(
        full.X, y, ForestConfig(n_trees=plan.importance_trees, rng_seed=plan.seed), FEATURE_NAMES
    )
    importances = _ranked(model.importances, FEATURE_NAMES)
    return EvalReport(plan, len(dataset), cells, importances, dict(provenance or {}))


def _forest_cells(plan, X, y, folds, subset_name):
    counts = sorted({int(t) for t in plan.tree_counts} | {COMPARISON_TREES})
    try:
        sweep = _forest_sweep(X, y, folds, counts, plan.seed)
    except RotorBarError as exc:
        msg = f"{type(exc).__name__}: {exc}"
        return [CellResult(FOREST, subset_name, t, [], [], error=msg) for t in counts]
    cells = []
    for t in counts:
        fold_auc, fold_acc = _metrics_from_pooled(sweep[t], y, folds, 0.5)
        cells.append(
            CellResult(
                FOREST, subset_name, t, fold_auc, fold_acc,
                scores=sweep[t].tolist() if plan.keep_scores else None,
            )
        )
    return cells


def _ranked(importances, names):
    order = sorted(range(len(names)), key=lambda i: (-importances[i], i))
    return [(names[i], float(importances[i])) for i in order]


def select_features(dataset, k_top, seed=0, n_trees=100):
    """Top ``k_top`` feature names by all-feature forest importance."""
    if not 1 <= k_top <= len(dataset.feature_names):
        raise ConfigError(f"k_top must be in [1, {len(dataset.feature_names)}]")
    model = fit_forest(dataset.X, dataset.y, ForestConfig(n_trees=n_trees, rng_seed=seed))
    return [name for name, _ in _ranked(model.importances, dataset.feature_names)[:k_top]]


# Text tables -----------------------------------------------------------


def _pct(mean, std):
    if mean is None:
        return "error"
    return f"{100 * mean:6.2f} ({100 * std:.2f})"


def _table(header, rows):
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    fmt = lambda r: "  ".join(str(v).ljust(w) for v, w in zip(r, widths)).rstrip()
    lines = [fmt(header), fmt(["-" * w for w in widths])]
    lines += [fmt(r) for r in rows]
    return "\n".join(lines) + "\n"


def tree_count_table(report, metric="auc"):
    """Forest tree counts (rows) against feature subsets (columns),
    ``mean (std)`` in percent."""
    subsets = [name for name, _ in report.plan.feature_subsets]
    counts = sorted({c.n_trees for c in report.cells if c.classifier == FOREST})
    counts = [t for t in counts if t in set(int(x) for x in report.plan.tree_counts)] or counts
    rows = []
    for t in counts:
        row = [f"{t} Trees"]
        for s in subsets:
            c = report.cell(FOREST, s, t)
            row.append(_pct(getattr(c, f"{metric}_mean"), getattr(c, f"{metric}_std")))
        rows.append(row)
    return _table(["Trees"] + subsets, rows)


def classifier_table(report, subset="All13"):
    """One row per classifier: AUC and accuracy, ``mean (std)`` in percent."""
    rows = []
    for kind in report.plan.classifiers:
        n_trees = COMPARISON_TREES if kind == FOREST else None
        try:
            c = report.cell(kind, subset, n_trees)
        except KeyError:
            continue
        rows.append([
            DISPLAY_NAMES[kind],
            _pct(c.auc_mean, c.auc_std),
            _pct(c.accuracy_mean, c.accuracy_std),
        ])
    return _table(["Classifier", "AUC", "Accuracy"], rows)


def importance_csv(report):
    lines = ["feature,importance"]
    lines += [f"{name},{value!r}" for name, value in report.importances]
    return "\n".join(lines) + "\n"


def roc_csv(scores, labels):
    fpr, tpr = roc_curve(scores, labels)
    lines = ["fpr,tpr"] + [f"{a!r},{b!r}" for a, b in zip(fpr.tolist(), tpr.tolist())]
    return "\n".join(lines) + "\n"
