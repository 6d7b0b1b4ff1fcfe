"""Binary CART classifier: Gini splits, grown to purity, no pruning.

Labels are 0 (healthy) and 1 (faulty). A decision node sends a row left when
``x[feature] <= threshold``. Candidate thresholds are midpoints between
consecutive distinct values; ties in impurity decrease go to the lowest
feature index, then the lowest threshold.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDataset, EmptyNode, FeatureArityError

# Decreases below this are treated as zero (floating-point noise).
MIN_DECREASE = 1e-12


def gini(counts):
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise EmptyNode("Gini impurity of an empty node is undefined")
    p = counts / total
    return float(1.0 - np.sum(p * p))


@dataclass(frozen=True)
class Leaf:
    counts: tuple  # (healthy, faulty)

    @property
    def n_samples(self):
        return self.counts[0] + self.counts[1]

    @property
    def probability(self):
        return self.counts[1] / self.n_samples

    @property
    def vote(self):
        # A 50/50 leaf votes faulty.
        return int(self.counts[1] >= self.counts[0])


@dataclass(frozen=True)
class Decision:
    feature: int
    threshold: float
    left: "Leaf | Decision"
    right: "Leaf | Decision"
    counts: tuple = field(init=False)

    def __post_init__(self):
        counts = (
            self.left.counts[0] + self.right.counts[0],
            self.left.counts[1] + self.right.counts[1],
        )
        object.__setattr__(self, "counts", counts)

    @property
    def n_samples(self):
        return self.counts[0] + self.counts[1]

    @property
    def impurity_decrease(self):
        """Gini decrease of this split, weighted within the node."""
        n = self.n_samples
        return (
            gini(self.counts)
            - self.left.n_samples / n * gini(self.left.counts)
            - self.right.n_samples / n * gini(self.right.counts)
        )


@dataclass(frozen=True)
class TreeFitConfig:
    """``max_features=None`` searches every feature at every node."""

    max_features: int | None = None
    min_samples_split: int = 2
    rng_seed: int = 0


def _split_scan(values, y):
    """Impurity decrease at every midpoint threshold of one feature.

    Returns ``(thresholds, decreases)`` in ascending threshold order.
    """
    order = np.argsort(values, kind="stable")
    xs = values[order]
    ys = y[order]
    n = xs.size
    distinct = xs[:-1] < xs[1:]
    if not distinct.any():
        return np.empty(0), np.empty(0)
    n_left = np.arange(1, n, dtype=float)
    pos_left = np.cumsum(ys)[:-1].astype(float)
    n_right = n - n_left
    pos_right = ys.sum() - pos_left

    def weighted_gini(pos, cnt):
        p = pos / cnt
        return cnt * (1.0 - p * p - (1.0 - p) ** 2)

    p_all = ys.mean()
    parent = 1.0 - p_all**2 - (1.0 - p_all) ** 2
    dec = parent - (weighted_gini(pos_left, n_left) + weighted_gini(pos_right, n_right)) / n
    lo, hi = xs[:-1][distinct], xs[1:][distinct]
    thresholds = (lo + hi) / 2.0
    # Midpoint of adjacent floats can round up onto the upper value.
    thresholds = np.where(thresholds < hi, thresholds, lo)
    return thresholds, dec[distinct]


def best_split(X, y, candidate_features):
    """Best ``(feature, threshold, decrease)`` among candidates, or None."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    best = None
    for f in sorted(int(f) for f in candidate_features):
        thresholds, dec = _split_scan(X[:, f], y)
        if dec.size == 0:
            continue
        i = int(np.argmax(dec >= dec.max() - MIN_DECREASE))
        if dec[i] <= MIN_DECREASE:
            continue
        if best is None or dec[i] > best[2] + MIN_DECREASE:
            best = (f, float(thresholds[i]), float(dec[i]))
    return best


def _leaf(y):
    faulty = int(np.sum(y))
    return Leaf((int(y.size) - faulty, faulty))


def fit_tree(X, y, cfg=TreeFitConfig(), rng=None):
    """Grow an unpruned tree.

    When ``cfg.max_features`` is below the feature count, each node draws
    that many distinct features from ``rng`` (default: seeded from
    ``cfg.rng_seed``) and searches only those.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDataset("cannot fit a tree on zero rows")
    if y.shape[0] != X.shape[0]:
        raise ValueError("X and y disagree on row count")
    p = X.shape[1]
    k = p if cfg.max_features is None else int(cfg.max_features)
    if not 1 <= k <= p:
        raise ValueError(f"max_features must be in [1, {p}], got {k}")
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    all_features = np.arange(p)

    def grow(rows):
        ys = y[rows]
        if rows.size < cfg.min_samples_split or ys.min() == ys.max():
            return _leaf(ys)
        features = all_features if k == p else np.sort(rng.choice(p, size=k, replace=False))
        split = best_split(X[rows], ys, features)
        if split is None:
            return _leaf(ys)
        f, thr, _ = split
        go_left = X[rows, f] <= thr
        return Decision(f, thr, grow(rows[go_left]), grow(rows[~go_left]))

    return grow(np.arange(X.shape[0]))


def tree_arity(tree):
    """Smallest feature count the tree can be applied to."""
    best = 0
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, Decision):
            best = max(best, node.feature + 1)
            stack.extend((node.left, node.right))
    return best


def predict_tree(tree, x, n_features=None):
    """Faulty-class probability of the leaf reached by ``x``."""
    x = np.asarray(x, dtype=float).ravel()
    if n_features is not None and x.size != n_features:
        raise FeatureArityError(f"expected {n_features} features, got {x.size}")
    if x.size < tree_arity(tree):
        raise FeatureArityError(f"tree tests feature {tree_arity(tree) - 1}, input has {x.size}")
    node = tree
    while isinstance(node, Decision):
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.probability


def apply_tree(tree, X):
    """Leaf reached by every row of ``X``, as a list."""
    X = np.asarray(X, dtype=float)
    out = [None] * X.shape[0]

    def descend(node, rows):
        if rows.size == 0:
            return
        if isinstance(node, Leaf):
            for r in rows:
                out[r] = node
            return
        left = X[rows, node.feature] <= node.threshold
        descend(node.left, rows[left])
        descend(node.right, rows[~left])

    descend(tree, np.arange(X.shape[0]))
    return out


def predict_tree_batch(tree, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < tree_arity(tree):
        raise FeatureArityError("input has too few feature columns for this tree")
    return np.array([leaf.probability for leaf in apply_tree(tree, X)])


def tree_importances(tree, n_features):
    """Sample-weighted impurity decrease per feature, normalised to sum 1.

    A single-leaf tree yields all zeros.
    """
    scores = np.zeros(n_features)
    n_root = tree.n_samples
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, Decision):
            scores[node.feature] += node.n_samples / n_root * node.impurity_decrease
            stack.extend((node.left, node.right))
    total = scores.sum()
    return scores / total if total > 0 else scores


def iter_nodes(tree):
    """Pre-order traversal."""
    stack = [tree]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Decision):
            stack.extend((node.right, node.left))


def tree_depth(tree):
    if isinstance(tree, Leaf):
        return 0
    return 1 + max(tree_depth(tree.left), tree_depth(tree.right))


def tree_to_dict(tree):
    if isinstance(tree, Leaf):
        return {"counts": list(tree.counts)}
    return {
        "feature": tree.feature,
        "threshold": tree.threshold,
        "left": tree_to_dict(tree.left),
        "right": tree_to_dict(tree.right),
    }


def tree_from_dict(d):
    if "counts" in d:
        h, f = d["counts"]
        return Leaf((int(h), int(f)))
    return Decision(
        int(d["feature"]),
        float(d["threshold"]),
        tree_from_dict(d["left"]),
        tree_from_dict(d["right"]),
    )


def render_tree(tree, feature_names=None, indent="    "):
    """Plain-text rendering, one node per line."""
    lines = []

    def name(f):
        return feature_names[f] if feature_names else f"x[{f}]"

    def walk(node, depth):
        pad = indent * depth
        if isinstance(node, Leaf):
            label = "Faulty" if node.vote else "Healthy"
            lines.append(f"{pad}leaf {label} counts={list(node.counts)}")
            return
        lines.append(f"{pad}{name(node.feature)} <= {node.threshold:.4g}")
        walk(node.left, depth + 1)
        lines.append(f"{pad}{name(node.feature)} > {node.threshold:.4g}")
        walk(node.right, depth + 1)

    walk(tree, 0)
    return "\n".join(lines)
