"""Random search over generator parameters. Each candidate is scored on the
quantities the evaluation cares about (forest AUC on all features and on the
mean_index/impulsion pair, naive Bayes AUC, importance ranks) and appended to
a JSON-lines log for later filtering."""
import argparse
import json

import numpy as np

from rotorbar import baselines
from rotorbar.dataset import dataset_from_records
from rotorbar.errors import RotorBarError
from rotorbar.evaluation import auc, cross_validate, stratified_folds
from rotorbar.features import FEATURE_NAMES
from rotorbar.forest import ForestConfig, fit_forest
from rotorbar.signals import GeneratorConfig, generate_dataset

MEAN, IMPULSION = FEATURE_NAMES.index("mean_index"), FEATURE_NAMES.index("impulsion")


def sample(rng):
    u = lambda a, b: float(rng.uniform(a, b))  # noqa: E731
    s = u(0.1, 0.3)
    return {
        "sync_time_s": {"L0": s, "L0_5": s * 1.1, "L1_0": s * 1.2, "L1_5": s * 1.3},
        "startup_peak_multiple": u(3, 6),
        "fault_sync_time_factor": u(1.2, 1.8),
        "fault_modulation_depth": u(0.01, 0.1),
        "fault_modulation_hz": u(49, 49.95),
        "fault_modulation_decay_s": float(np.exp(u(np.log(0.2), np.log(3)))),
        "fault_modulation_phase_rad": float(rng.choice([0.0, u(0, 1.9)])),
        "noise_std_a": u(0.005, 0.02),
        "sync_time_spread": u(0.05, 0.5),
        "peak_multiple_spread": u(0, 0.1),
        "peak_sync_coupling": u(0, 0.3),
        "modulation_depth_spread": u(0, 0.6),
        "noise_std_spread": u(0, 0.5),
    }


def score(cfg, trials, data_seed):
    ds = dataset_from_records(generate_dataset(cfg, trials, data_seed))
    X, y = ds.X, ds.y
    folds = stratified_folds(y, 5, 0)

    def forest(a, b, c):
        return fit_forest(a, b, ForestConfig(100, rng_seed=0)).predict_proba(c)

    def nb(a, b, c):
        return baselines.score(baselines.train(baselines.ClassifierSpec("gaussian_nb"), a, b), c)

    imp = fit_forest(X, y, ForestConfig(100, rng_seed=0)).importances
    order = list(np.argsort(-imp))
    return {
        "single_auc": [round(max(a, 1 - a), 4) for a in (auc(X[:, j], y) for j in range(X.shape[1]))],
        "forest_all": float(np.mean(cross_validate(forest, X, y, folds, 0.5)[0])),
        "forest_pair": float(np.mean(cross_validate(forest, X[:, [MEAN, IMPULSION]], y, folds, 0.5)[0])),
        "naive_bayes": float(np.mean(cross_validate(nb, X, y, folds, 0.0)[0])),
        "importances": np.round(imp, 4).tolist(),
        "rank_mean_index": order.index(MEAN),
        "rank_impulsion": order.index(IMPULSION),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("log", help="JSON-lines output, appended to")
    ap.add_argument("--iterations", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trials", type=int, default=40)
    ap.add_argument("--data-seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    base = GeneratorConfig().to_dict()
    with open(args.log, "a") as log:
        for _ in range(args.iterations):
            params = sample(rng)
            try:
                cfg = GeneratorConfig.from_dict({**base, **params}).validate()
                row = {"params": params, **score(cfg, args.trials, args.data_seed)}
            except RotorBarError as exc:
                row = {"params": params, "error": f"{type(exc).__name__}: {exc}"}
            log.write(json.dumps(row) + "\n")
            log.flush()


if __name__ == "__main__":
    main()
