"""Comparison classifiers behind one ``train`` / ``score`` interface.

Kinds: single CART tree, Gaussian naive Bayes, L2 logistic regression
(gradient descent), ridge classifier (regularised least squares on +/-1
targets) and an RBF-kernel SVM trained by SMO. Every score is oriented so
that larger means more likely faulty.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit as sigmoid

from .cart import TreeFitConfig, fit_tree, predict_tree_batch, tree_from_dict, tree_to_dict
from .errors import ConfigError, ConvergenceError, DegenerateLabels, FeatureArityError

KINDS = ("cart", "gaussian_nb", "logistic", "ridge", "svm_rbf")
DISPLAY_NAMES = {
    "random_forest": "Random Forest",
    "cart": "CART",
    "gaussian_nb": "Naive Bayes",
    "logistic": "Logistic regression",
    "ridge": "Linear Ridge",
    "svm_rbf": "SVM",
}
# Scores that are probabilities are thresholded at 0.5, the rest at 0.
PROBABILITY_SCORES = {"random_forest", "cart", "logistic"}

DEFAULTS = {
    "cart": {},
    "gaussian_nb": {"var_smoothing": 1e-9},
    "logistic": {"l2_strength": 1.0, "max_iterations": 200_000, "convergence_tol": 1e-6},
    "ridge": {"regularization_strength": 1.0},
    "svm_rbf": {"C": 1.0, "gamma": None, "smo_tol": 1e-3, "max_passes": 1000, "seed": 0},
}
STANDARDIZE_BY_DEFAULT = {"logistic", "ridge", "svm_rbf"}


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)
    standardize_inputs: bool | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown classifier kind {self.kind!r}; expected one of {KINDS}")
        unknown = set(self.hyperparameters) - set(DEFAULTS[self.kind])
        if unknown:
            raise ConfigError(f"{self.kind}: unknown hyperparameters {sorted(unknown)}")
        for name, value in self.params.items():
            if name in ("seed", "gamma") and value is None:
                continue
            if name != "seed" and not value > 0:
                raise ConfigError(f"{self.kind}: {name} must be > 0, got {value}")

    @property
    def params(self):
        return {**DEFAULTS[self.kind], **self.hyperparameters}

    @property
    def standardize(self):
        if self.standardize_inputs is None:
            return self.kind in STANDARDIZE_BY_DEFAULT
        return self.standardize_inputs

    def to_dict(self):
        return {
            "kind": self.kind,
            "hyperparameters": dict(self.hyperparameters),
            "standardize_inputs": self.standardize_inputs,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], dict(d.get("hyperparameters", {})), d.get("standardize_inputs"))


@dataclass(frozen=True)
class TrainedClassifier:
    kind: str
    params: dict  # learned parameters, kind-specific
    n_features: int
    scaler: tuple | None = None  # (mean, std) from the training rows only
    spec: ClassifierSpec | None = None


def fit_scaler(X):
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return mean, std


def _prepare(clf, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != clf.n_features:
        raise FeatureArityError(f"{clf.kind} expects {clf.n_features} features, got {X.shape[1]}")
    if clf.scaler is not None:
        X = (X - clf.scaler[0]) / clf.scaler[1]
    return X


def train(spec, X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if np.unique(y).size < 2:
        raise DegenerateLabels("both classes must be present to train")
    if not np.all(np.isfinite(X)):
        raise ConfigError("features contain NaN or infinite values")
    scaler = fit_scaler(X) if spec.standardize else None
    Xs = (X - scaler[0]) / scaler[1] if scaler is not None else X
    params = _TRAINERS[spec.kind](Xs, y, spec.params)
    return TrainedClassifier(spec.kind, params, X.shape[1], scaler, spec)


def score(clf, X):
    """Real-valued scores, one per row (a single vector gives length 1)."""
    return _SCORERS[clf.kind](clf.params, _prepare(clf, X))


# --- CART -----------------------------------------------------------------


def _train_cart(X, y, hp):
    return {"tree": fit_tree(X, y, TreeFitConfig())}


def _score_cart(params, X):
    return predict_tree_batch(params["tree"], X)


# --- Gaussian naive Bayes ---------------------------------------------------


def _train_nb(X, y, hp):
    floor = hp["var_smoothing"] * float(np.var(X, axis=0).max())
    if not floor > 0:
        # Every feature constant: fall back to an absolute floor.
        floor = hp["var_smoothing"]
    means, variances, log_priors = [], [], []
    for label in (0, 1):
        rows = X[y == label]
        means.append(rows.mean(axis=0))
        variances.append(rows.var(axis=0) + floor)
        log_priors.append(np.log(rows.shape[0] / X.shape[0]))
    return {
        "means": np.array(means),
        "variances": np.array(variances),
        "log_priors": np.array(log_priors),
        "variance_floor": floor,
    }


def _nb_joint_log_likelihood(params, X):
    out = []
    for label in (0, 1):
        mu, var = params["means"][label], params["variances"][label]
        ll = -0.5 * np.sum(np.log(2 * np.pi * var)) - 0.5 * np.sum((X - mu) ** 2 / var, axis=1)
        out.append(params["log_priors"][label] + ll)
    return np.array(out)


def _score_nb(params, X):
    jll = _nb_joint_log_likelihood(params, X)
    return jll[1] - jll[0]


# --- Logistic regression ----------------------------------------------------


def logistic_objective(theta, X, y, l2):
    """Summed log-loss plus ``l2/2 * |w|^2``; ``theta = (w..., b)``."""
    w, b = theta[:-1], theta[-1]
    z = X @ w + b
    return float(np.sum(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * w @ w)


def logistic_gradient(theta, X, y, l2):
    w, b = theta[:-1], theta[-1]
    r = sigmoid(X @ w + b) - y
    return np.concatenate([X.T @ r + l2 * w, [r.sum()]])


def _train_logistic(X, y, hp):
    l2, tol, max_iter = hp["l2_strength"], hp["convergence_tol"], int(hp["max_iterations"])
    Xb = np.hstack([X, np.ones((X.shape[0], 1))])
    # Step 1/L with L an upper bound on the Hessian's largest eigenvalue.
    lipschitz = np.linalg.norm(Xb, 2) ** 2 / 4.0 + l2
    step = 1.0 / lipschitz
    theta = np.zeros(X.shape[1] + 1)
    grad = logistic_gradient(theta, X, y, l2)
    for it in range(max_iter):
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            break
        theta = theta - step * grad
        grad = logistic_gradient(theta, X, y, l2)
    else:
        gnorm = float(np.linalg.norm(grad))
        if gnorm > tol:
            raise ConvergenceError(f"logistic regression did not converge in {max_iter} iterations", gnorm)
    return {"weights": theta[:-1], "bias": float(theta[-1]), "iterations": it, "grad_norm": gnorm}


def _score_logistic(params, X):
    return sigmoid(X @ params["weights"] + params["bias"])


# --- Ridge classifier -------------------------------------------------------


def ridge_system(X, y, alpha):
    """Centered normal equations ``(Xc'Xc + alpha I) w = Xc'tc`` for +/-1 targets."""
    t = np.where(y == 1, 1.0, -1.0)
    x_mean, t_mean = X.mean(axis=0), t.mean()
    Xc, tc = X - x_mean, t - t_mean
    A = Xc.T @ Xc + alpha * np.eye(X.shape[1])
    rhs = Xc.T @ tc
    return A, rhs, x_mean, t_mean


def _train_ridge(X, y, hp):
    A, rhs, x_mean, t_mean = ridge_system(X, y, hp["regularization_strength"])
    w = np.linalg.solve(A, rhs)
    return {"weights": w, "bias": float(t_mean - x_mean @ w)}


def _score_ridge(params, X):
    return X @ params["weights"] + params["bias"]


# --- RBF SVM via SMO ----------------------------------------------------------


def rbf_kernel(A, B, gamma):
    sq = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def smo(K, y, C, tol, max_iter, seed=0):
    """Solve the SVM dual with maximal-violating-pair SMO.

    ``y`` in {-1, +1}. Stops once the KKT gap ``m - M`` is at most ``tol``.
    Ties in the pair selection are broken by a seeded permutation of the
    rows. Returns ``(alpha, bias, gap, iterations)``.
    """
    n = y.size
    order = np.random.default_rng(seed).permutation(n)
    Kp, yp = K[np.ix_(order, order)], y[order]
    alpha = np.zeros(n)
    grad = -np.ones(n)  # G = Q alpha - e
    diag = np.diag(Kp)
    gap = np.inf
    it = 0
    for it in range(max_iter):
        v = -yp * grad
        up = ((yp > 0) & (alpha < C)) | ((yp < 0) & (alpha > 0))
        low = ((yp < 0) & (alpha < C)) | ((yp > 0) & (alpha > 0))
        v_up = np.where(up, v, -np.inf)
        v_low = np.where(low, v, np.inf)
        i, j = int(np.argmax(v_up)), int(np.argmin(v_low))
        gap = v_up[i] - v_low[j]
        if gap <= tol:
            break
        eta = max(diag[i] + diag[j] - 2.0 * Kp[i, j], 1e-12)
        room_i = C - alpha[i] if yp[i] > 0 else alpha[i]
        room_j = alpha[j] if yp[j] > 0 else C - alpha[j]
        t = min(gap / eta, room_i, room_j)
        alpha[i] += yp[i] * t
        alpha[j] -= yp[j] * t
        grad += t * yp * (Kp[:, i] - Kp[:, j])
    else:
        raise ConvergenceError(f"SMO did not reach KKT gap {tol} in {max_iter} iterations", gap)

    v = -yp * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(v[free].mean())
    else:
        up = ((yp > 0) & (alpha < C)) | ((yp < 0) & (alpha > 0))
        low = ((yp < 0) & (alpha < C)) | ((yp > 0) & (alpha > 0))
        bias = float((v[up].max() + v[low].min()) / 2.0)
    out = np.empty(n)
    out[order] = alpha
    return out, bias, float(gap), it


def _train_svm(X, y, hp):
    gamma = hp["gamma"] if hp["gamma"] is not None else 1.0 / X.shape[1]
    ys = np.where(y == 1, 1.0, -1.0)
    K = rbf_kernel(X, X, gamma)
    C = hp["C"]
    alpha, bias, gap, iters = smo(K, ys, C, hp["smo_tol"], int(hp["max_passes"]) * X.shape[0], hp["seed"])
    sv = alpha > 0
    return {
        "support_vectors": X[sv],
        "dual_coef": alpha[sv] * ys[sv],
        "bias": bias,
        "gamma": gamma,
        "C": C,
        "kkt_gap": gap,
        "iterations": iters,
        "alpha": alpha,
    }


def _score_svm(params, X):
    if params["support_vectors"].shape[0] == 0:
        return np.full(X.shape[0], params["bias"])
    K = rbf_kernel(X, params["support_vectors"], params["gamma"])
    return K @ params["dual_coef"] + params["bias"]


def svm_kkt_violations(clf, X, y, tol):
    """Indices of training rows violating the SVM KKT conditions beyond ``tol``."""
    p = clf.params
    margin = np.where(np.asarray(y) == 1, 1.0, -1.0) * score(clf, X)
    alpha = p["alpha"]
    C = p["C"]
    at_zero = alpha <= 0
    at_c = alpha >= C
    free = ~at_zero & ~at_c
    bad = (at_zero & (margin < 1 - tol)) | (at_c & (margin > 1 + tol)) | (free & (np.abs(margin - 1) > tol))
    return np.flatnonzero(bad)


_TRAINERS = {
    "cart": _train_cart,
    "gaussian_nb": _train_nb,
    "logistic": _train_logistic,
    "ridge": _train_ridge,
    "svm_rbf": _train_svm,
}
_SCORERS = {
    "cart": _score_cart,
    "gaussian_nb": _score_nb,
    "logistic": _score_logistic,
    "ridge": _score_ridge,
    "svm_rbf": _score_svm,
}


# --- serialisation ------------------------------------------------------------


def classifier_to_dict(clf):
    params = {}
    for k, v in clf.params.items():
        if k == "tree":
            params[k] = tree_to_dict(v)
        elif isinstance(v, np.ndarray):
            params[k] = v.tolist()
        else:
            params[k] = v
    return {
        "kind": clf.kind,
        "n_features": clf.n_features,
        "params": params,
        "scaler": None if clf.scaler is None else [clf.scaler[0].tolist(), clf.scaler[1].tolist()],
        "spec": clf.spec.to_dict() if clf.spec else None,
    }


def classifier_from_dict(d):
    params = {}
    for k, v in d["params"].items():
        if k == "tree":
            params[k] = tree_from_dict(v)
        elif isinstance(v, list):
            params[k] = np.asarray(v, dtype=float)
        else:
            params[k] = v
    if d["kind"] == "svm_rbf":
        params["support_vectors"] = params["support_vectors"].reshape(-1, d["n_features"])
    scaler = None if d["scaler"] is None else tuple(np.asarray(s, dtype=float) for s in d["scaler"])
    spec = ClassifierSpec.from_dict(d["spec"]) if d.get("spec") else None
    return TrainedClassifier(d["kind"], params, int(d["n_features"]), scaler, spec)
