import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rotorbar import baselines
from rotorbar.baselines import (
    KINDS,
    ClassifierSpec,
    TrainedClassifier,
    classifier_from_dict,
    classifier_to_dict,
    logistic_gradient,
    logistic_objective,
    ridge_system,
    score,
    svm_kkt_violations,
    train,
)
from rotorbar.errors import ConfigError, ConvergenceError, DegenerateLabels, FeatureArityError


def blobs(n=100, p=3, gap=2.0, seed=0):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    X = rng.normal(size=(n, p)) + gap * y[:, None] * np.eye(p)[0]
    return X, y


class TestSpec:
    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            ClassifierSpec("knn")

    def test_unknown_hyperparameter(self):
        with pytest.raises(ConfigError):
            ClassifierSpec("ridge", {"alpha": 1.0})

    def test_nonpositive_hyperparameter(self):
        with pytest.raises(ConfigError):
            ClassifierSpec("svm_rbf", {"C": 0.0})

    def test_standardize_defaults(self):
        assert [ClassifierSpec(k).standardize for k in KINDS] == [False, False, True, True, True]
        assert ClassifierSpec("cart", standardize_inputs=True).standardize

    def test_round_trip(self):
        spec = ClassifierSpec("logistic", {"l2_strength": 0.5}, False)
        assert ClassifierSpec.from_dict(spec.to_dict()) == spec


@pytest.mark.parametrize("kind", KINDS)
class TestEveryKind:
    def test_learns_blobs(self, kind):
        X, y = blobs(gap=4.0)
        s = score(train(ClassifierSpec(kind), X, y), X)
        pred = s >= (0.5 if kind in baselines.PROBABILITY_SCORES else 0.0)
        assert np.mean(pred == y) > 0.9

    def test_deterministic(self, kind):
        X, y = blobs()
        a = score(train(ClassifierSpec(kind), X, y), X)
        b = score(train(ClassifierSpec(kind), X, y), X)
        assert a.tobytes() == b.tobytes()

    def test_json_round_trip(self, kind):
        X, y = blobs()
        clf = train(ClassifierSpec(kind), X, y)
        again = classifier_from_dict(json.loads(json.dumps(classifier_to_dict(clf))))
        np.testing.assert_array_equal(score(again, X), score(clf, X))

    def test_single_class_rejected(self, kind):
        with pytest.raises(DegenerateLabels):
            train(ClassifierSpec(kind), np.zeros((4, 2)), np.ones(4, int))

    def test_arity(self, kind):
        X, y = blobs()
        with pytest.raises(FeatureArityError):
            score(train(ClassifierSpec(kind), X, y), X[:, :2])

    def test_single_vector(self, kind):
        X, y = blobs()
        clf = train(ClassifierSpec(kind), X, y)
        assert score(clf, X[0]).shape == (1,)

    def test_non_finite_rejected(self, kind):
        X, y = blobs()
        X[0, 0] = np.nan
        with pytest.raises(ConfigError):
            train(ClassifierSpec(kind), X, y)


class TestNaiveBayes:
    def test_sample_statistics(self):
        rng = np.random.default_rng(0)
        X = np.r_[rng.normal(0, 1, 50), rng.normal(10, 1, 50)][:, None]
        y = np.r_[np.zeros(50, int), np.ones(50, int)]
        p = train(ClassifierSpec("gaussian_nb"), X, y).params
        assert abs(p["means"][0, 0]) < 0.5 and abs(p["means"][1, 0] - 10) < 0.5
        np.testing.assert_allclose(p["means"][:, 0], [X[:50].mean(), X[50:].mean()])

    def test_symmetric_model_scores_zero(self):
        params = {
            "means": np.array([[1.0, 2.0], [1.0, 2.0]]),
            "variances": np.array([[1.0, 3.0], [1.0, 3.0]]),
            "log_priors": np.log([0.5, 0.5]),
            "variance_floor": 0.0,
        }
        clf = TrainedClassifier("gaussian_nb", params, 2)
        X = np.random.default_rng(1).normal(size=(10, 2)) * 5
        np.testing.assert_allclose(score(clf, X), 0.0, atol=1e-12)

    def test_floor_scales_with_largest_variance(self):
        X, y = blobs()
        X[:, 1] *= 1000
        p = train(ClassifierSpec("gaussian_nb"), X, y).params
        assert p["variance_floor"] == pytest.approx(1e-9 * X.var(axis=0).max())

    def test_constant_features_stay_finite(self):
        X = np.ones((10, 2))
        X[:, 0] = np.arange(10)
        y = np.arange(10) % 2
        assert np.all(np.isfinite(score(train(ClassifierSpec("gaussian_nb"), X, y), X)))
        Xc = np.ones((10, 2))
        assert np.all(np.isfinite(score(train(ClassifierSpec("gaussian_nb"), Xc, y), Xc)))

    def test_log_odds_matches_direct_density(self):
        from scipy.stats import norm

        X, y = blobs(40, 2)
        clf = train(ClassifierSpec("gaussian_nb"), X, y)
        p = clf.params
        x = X[3]
        direct = [np.log(np.mean(y == c)) + norm.logpdf(x, p["means"][c], np.sqrt(p["variances"][c])).sum()
                  for c in (0, 1)]
        assert score(clf, x)[0] == pytest.approx(direct[1] - direct[0], rel=1e-10)


class TestLogistic:
    def test_hand_probability(self):
        clf = TrainedClassifier("logistic", {"weights": np.array([1.0, 0.0, 0.0]), "bias": 0.0}, 3)
        assert score(clf, [2.0, 5.0, -3.0])[0] == pytest.approx(1 / (1 + np.exp(-2)), rel=1e-12)
        assert score(clf, [2.0, 5.0, -3.0])[0] == pytest.approx(0.8808, abs=1e-4)

    def test_separable_small_l2(self):
        x = np.r_[np.linspace(-3, -1, 20), np.linspace(1, 3, 20)][:, None]
        y = (x[:, 0] > 0).astype(int)
        clf = train(ClassifierSpec("logistic", {"l2_strength": 1e-3}), x, y)
        assert np.all((score(clf, x) >= 0.5) == y)

    def test_gradient_central_differences(self):
        X, y = blobs(60, 4)
        rng = np.random.default_rng(2)
        for _ in range(10):
            theta = rng.normal(size=5)
            g = logistic_gradient(theta, X, y, 0.7)
            h = 1e-6
            num = np.array([(logistic_objective(theta + h * e, X, y, 0.7)
                             - logistic_objective(theta - h * e, X, y, 0.7)) / (2 * h)
                            for e in np.eye(5)])
            np.testing.assert_allclose(g, num, rtol=1e-5, atol=1e-7)

    def test_converged_gradient_is_small(self):
        X, y = blobs()
        clf = train(ClassifierSpec("logistic"), X, y)
        assert clf.params["grad_norm"] <= 1e-6

    def test_convergence_error(self):
        X, y = blobs()
        with pytest.raises(ConvergenceError):
            train(ClassifierSpec("logistic", {"max_iterations": 2}), X, y)

    def test_bias_not_penalised(self):
        X, y = blobs(40, 2)
        theta = np.array([0.0, 0.0, 0.3])
        for l2 in (0.0, 1.0, 1e6):
            assert logistic_objective(theta, X, y, l2) == logistic_objective(theta, X, y, 0.0)
            assert logistic_gradient(theta, X, y, l2)[-1] == logistic_gradient(theta, X, y, 0.0)[-1]
        y = (np.arange(40) % 4 != 0).astype(int)
        clf = train(ClassifierSpec("logistic", {"l2_strength": 1e3}), X, y)
        assert score(clf, X).mean() == pytest.approx(0.75, abs=0.02)


class TestRidge:
    def test_normal_equation_residual(self):
        X, y = blobs(80, 4)
        clf = train(ClassifierSpec("ridge", standardize_inputs=False), X, y)
        A, rhs, _, _ = ridge_system(X, y, 1.0)
        assert np.linalg.norm(A @ clf.params["weights"] - rhs) <= 1e-8 * max(1.0, np.linalg.norm(rhs))

    def test_heavy_regularisation_collapses_to_balance(self):
        X, y = blobs(100)
        y = (np.arange(100) % 4 == 0).astype(int)
        clf = train(ClassifierSpec("ridge", {"regularization_strength": 1e12}), X, y)
        assert np.linalg.norm(clf.params["weights"]) < 1e-9
        np.testing.assert_allclose(score(clf, X), 0.25 - 0.75, atol=1e-8)

    def test_matches_lstsq_on_augmented_system(self):
        X, y = blobs(50, 3)
        t = np.where(y == 1, 1.0, -1.0)
        Xc = X - X.mean(0)
        A = np.vstack([Xc, np.sqrt(2.0) * np.eye(3)])
        b = np.r_[t - t.mean(), np.zeros(3)]
        w = np.linalg.lstsq(A, b, rcond=None)[0]
        clf = train(ClassifierSpec("ridge", {"regularization_strength": 2.0}, False), X, y)
        np.testing.assert_allclose(clf.params["weights"], w, rtol=1e-10)


class TestSvm:
    def test_xor(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
        y = np.array([0, 0, 1, 1])
        clf = train(ClassifierSpec("svm_rbf", {"C": 1e3, "gamma": 2.0}, False), X, y)
        s = score(clf, X)
        assert np.all((s >= 0) == (y == 1))

    def test_kkt_on_training_points(self):
        X, y = blobs(120, 3, gap=1.5)
        spec = ClassifierSpec("svm_rbf")
        clf = train(spec, X, y)
        assert svm_kkt_violations(clf, X, y, spec.params["smo_tol"]).size == 0
        alpha = clf.params["alpha"]
        assert np.all((alpha >= 0) & (alpha <= spec.params["C"]))
        assert abs(np.sum(alpha * np.where(y == 1, 1, -1))) < 1e-9

    def test_dual_objective_matches_reference_qp(self):
        from scipy.optimize import minimize

        X, y = blobs(20, 2, gap=1.0, seed=3)
        spec = ClassifierSpec("svm_rbf", {"C": 1.0, "gamma": 0.5, "smo_tol": 1e-6}, False)
        clf = train(spec, X, y)
        ys = np.where(y == 1, 1.0, -1.0)
        Q = ys[:, None] * ys[None, :] * baselines.rbf_kernel(X, X, 0.5)
        dual = lambda a: 0.5 * a @ Q @ a - a.sum()  # noqa: E731
        ref = minimize(dual, np.zeros(20), jac=lambda a: Q @ a - 1, method="SLSQP",
                       bounds=[(0, 1.0)] * 20,
                       constraints=[{"type": "eq", "fun": lambda a: a @ ys, "jac": lambda a: ys}],
                       options={"ftol": 1e-12, "maxiter": 500})
        assert dual(clf.params["alpha"]) == pytest.approx(ref.fun, abs=1e-5)

    def test_convergence_error(self):
        X, y = blobs(60, 3, gap=0.5)
        with pytest.raises(ConvergenceError):
            train(ClassifierSpec("svm_rbf", {"max_passes": 0.01, "smo_tol": 1e-9}), X, y)

    def test_rbf_kernel(self):
        A = np.array([[0.0, 0.0], [1.0, 2.0]])
        K = baselines.rbf_kernel(A, A, 0.5)
        np.testing.assert_allclose(K, [[1.0, np.exp(-2.5)], [np.exp(-2.5), 1.0]])


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 100), st.floats(-100, 100), st.sampled_from(["logistic", "ridge"]))
def test_standardised_models_are_affine_invariant(c, d, kind):
    X, y = blobs(60, 3)
    a = score(train(ClassifierSpec(kind), X, y), X)
    b = score(train(ClassifierSpec(kind), c * X + d, y), c * X + d)
    np.testing.assert_allclose(b, a, rtol=1e-6, atol=1e-9)


def test_scaler_uses_training_rows_only():
    X, y = blobs(50)
    clf = train(ClassifierSpec("ridge"), X, y)
    np.testing.assert_allclose(clf.scaler[0], X.mean(0))
    before = score(clf, X[:5])
    score(clf, np.r_[X[:5], [[1e9, 1e9, 1e9]]])
    np.testing.assert_array_equal(score(clf, X[:5]), before)
