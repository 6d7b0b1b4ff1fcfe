"""Diagnostics for a generator configuration: single-feature AUCs, the
evaluation tables, the importance ranking and which pair the top-2
selection picks across forest seeds."""
import argparse
import json
from pathlib import Path

from rotorbar.dataset import dataset_from_records
from rotorbar.evaluation import EvalPlan, auc, classifier_table, run_plan, select_features, tree_count_table
from rotorbar.signals import GeneratorConfig, generate_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--generator", help="JSON file of GeneratorConfig overrides")
    ap.add_argument("--trials", type=int, default=40)
    ap.add_argument("--data-seed", type=int, default=0)
    ap.add_argument("--selection-seeds", type=int, default=10)
    args = ap.parse_args()

    overrides = json.loads(Path(args.generator).read_text()) if args.generator else {}
    cfg = GeneratorConfig.from_dict({**GeneratorConfig().to_dict(), **overrides}).validate()
    ds = dataset_from_records(generate_dataset(cfg, args.trials, args.data_seed))

    print("single-feature AUC (orientation-free)")
    for j, name in enumerate(ds.feature_names):
        a = auc(ds.X[:, j], ds.y)
        print(f"  {name:22s} {max(a, 1 - a):.4f}")
    report = run_plan(EvalPlan(seed=0), ds)
    print()
    print(tree_count_table(report))
    print()
    print(classifier_table(report))
    print()
    print("importances:", ", ".join(f"{n}={v:.3f}" for n, v in report.importances[:5]))
    picks = [tuple(sorted(select_features(ds, 2, seed=s))) for s in range(args.selection_seeds)]
    for pair in sorted(set(picks)):
        print(f"top-2 {pair}: {picks.count(pair)}/{len(picks)} seeds")


if __name__ == "__main__":
    main()
