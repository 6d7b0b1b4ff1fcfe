"""Random forest of CART trees with bagging and per-split feature sampling.

Tree ``i`` draws its bootstrap sample and its per-node feature subsets from
``default_rng([rng_seed, i])``, so each tree depends only on the seed and
its own index: growing a larger forest with the same seed keeps the first
trees unchanged.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np

from .cart import (
    TreeFitConfig,
    apply_tree,
    fit_tree,
    predict_tree,
    tree_from_dict,
    tree_importances,
    tree_to_dict,
)
from .errors import ConfigError, DegenerateLabels, EmptyDataset, FeatureArityError

TREE_COUNTS = (10, 100, 200, 500, 1000)


@dataclass(frozen=True)
class ForestConfig:
    """``max_features`` is ``"sqrt"`` (ceil of sqrt p), ``"all"`` or an int."""

    n_trees: int = 100
    max_features: str | int = "sqrt"
    rng_seed: int = 0
    decision_threshold: float = 0.5

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if isinstance(self.max_features, str) and self.max_features not in ("sqrt", "all"):
            raise ConfigError(f"unknown max_features {self.max_features!r}")

    def features_per_split(self, p):
        if self.max_features == "sqrt":
            return max(1, math.ceil(math.sqrt(p)))
        if self.max_features == "all":
            return p
        k = int(self.max_features)
        if not 1 <= k <= p:
            raise ConfigError(f"max_features must be in [1, {p}], got {k}")
        return k


@dataclass(frozen=True)
class ForestModel:
    trees: tuple
    oob_indices: tuple  # one sorted int array per tree
    oob_error: float | None
    importances: np.ndarray
    config: ForestConfig
    n_features: int
    feature_names: tuple | None = None

    def predict_proba(self, X):
        X = _check_arity(X, self.n_features)
        probs = np.zeros(X.shape[0])
        for tree in self.trees:
            probs += np.array([leaf.probability for leaf in apply_tree(tree, X)])
        return probs / len(self.trees)

    def predict(self, X):
        return (self.predict_proba(X) >= self.config.decision_threshold).astype(int)


def _check_arity(X, n_features):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != n_features:
        raise FeatureArityError(f"model expects {n_features} features, got {X.shape[1]}")
    return X


def tree_rng(seed, index):
    return np.random.default_rng([int(seed), int(index)])


def fit_forest(X, y, cfg=ForestConfig(), feature_names=None, bootstrap=True):
    """Fit ``cfg.n_trees`` trees on bootstrap resamples of ``(X, y)``.

    ``bootstrap=False`` trains every tree on the full data (used to compare
    a one-tree forest against a plain CART fit); OOB sets are then empty and
    ``oob_error`` is None.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or X.shape[0] < 2:
        raise EmptyDataset("a forest needs at least 2 rows")
    if np.unique(y).size < 2:
        raise DegenerateLabels("both classes must be present to fit a forest")
    n, p = X.shape
    tree_cfg = TreeFitConfig(max_features=cfg.features_per_split(p))

    trees, oob_sets = [], []
    for i in range(cfg.n_trees):
        rng = tree_rng(cfg.rng_seed, i)
        if bootstrap:
            rows = rng.integers(0, n, size=n)
            in_bag = np.zeros(n, dtype=bool)
            in_bag[rows] = True
            oob = np.flatnonzero(~in_bag)
        else:
            rows = np.arange(n)
            oob = np.empty(0, dtype=int)
        trees.append(fit_tree(X[rows], y[rows], tree_cfg, rng=rng))
        oob_sets.append(oob)

    per_tree = np.array([tree_importances(t, p) for t in trees])
    importances = per_tree.mean(axis=0)
    total = importances.sum()
    if total > 0:
        importances = importances / total

    return ForestModel(
        trees=tuple(trees),
        oob_indices=tuple(oob_sets),
        oob_error=_oob_error(trees, oob_sets, X, y) if bootstrap else None,
        importances=importances,
        config=cfg,
        n_features=p,
        feature_names=tuple(feature_names) if feature_names is not None else None,
    )


def _oob_error(trees, oob_sets, X, y):
    n = X.shape[0]
    faulty_votes = np.zeros(n)
    total_votes = np.zeros(n)
    for tree, oob in zip(trees, oob_sets):
        if oob.size == 0:
            continue
        leaves = apply_tree(tree, X[oob])
        faulty_votes[oob] += [leaf.vote for leaf in leaves]
        total_votes[oob] += 1
    seen = total_votes > 0
    if not seen.any():
        return None
    verdict = (2 * faulty_votes[seen] >= total_votes[seen]).astype(int)
    return float(np.mean(verdict != y[seen]))


def predict_forest(model, x):
    """``(probability, class)`` for one feature vector by probability averaging."""
    x = _check_arity(x, model.n_features)[0]
    prob = float(np.mean([predict_tree(t, x) for t in model.trees]))
    return prob, int(prob >= model.config.decision_threshold)


def majority_vote(model, x):
    """Modal per-tree vote; a tied forest (or tied leaf) says faulty."""
    x = _check_arity(x, model.n_features)[0]
    votes = 0
    for tree in model.trees:
        node = tree
        while not hasattr(node, "vote"):
            node = node.left if x[node.feature] <= node.threshold else node.right
        votes += node.vote
    return int(2 * votes >= len(model.trees))


def forest_importances(model):
    """Features ranked by importance, descending; ties keep feature order.

    Returns an empty list when no tree made a split.
    """
    if not np.any(model.importances > 0):
        return []
    names = model.feature_names or tuple(f"x{i}" for i in range(model.n_features))
    order = sorted(range(model.n_features), key=lambda i: (-model.importances[i], i))
    return [(names[i], float(model.importances[i])) for i in order]


def model_to_dict(model):
    return {
        "kind": "RandomForest",
        "config": asdict(model.config),
        "seed": model.config.rng_seed,
        "n_features": model.n_features,
        "feature_names": list(model.feature_names) if model.feature_names else None,
        "trees": [tree_to_dict(t) for t in model.trees],
        "oob_indices": [o.tolist() for o in model.oob_indices],
        "importances": model.importances.tolist(),
        "oob_error": model.oob_error,
    }


def model_from_dict(d):
    names = d.get("feature_names")
    return ForestModel(
        trees=tuple(tree_from_dict(t) for t in d["trees"]),
        oob_indices=tuple(np.asarray(o, dtype=int) for o in d["oob_indices"]),
        oob_error=d["oob_error"],
        importances=np.asarray(d["importances"], dtype=float),
        config=ForestConfig(**d["config"]),
        n_features=int(d["n_features"]),
        feature_names=tuple(names) if names else None,
    )
