"""Simulate the default corpus, cross-validate the full plan and write the
tree-count table, the classifier comparison and the importance ranking."""
import argparse
from pathlib import Path

from rotorbar.dataset import dataset_from_records
from rotorbar.evaluation import EvalPlan, classifier_table, importance_csv, run_plan, tree_count_table
from rotorbar.io import write_text
from rotorbar.signals import GeneratorConfig, generate_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=40, help="trials per (condition, load) cell")
    ap.add_argument("--data-seed", type=int, default=0)
    ap.add_argument("--seed", type=int, default=0, help="fold and forest seed")
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    ds = dataset_from_records(generate_dataset(GeneratorConfig(), args.trials, args.data_seed))
    report = run_plan(EvalPlan(seed=args.seed), ds, {"data_seed": args.data_seed, "trials": args.trials})
    out = Path(args.out)
    write_text(out / "report.json", report.to_json())
    write_text(out / "table_tree_counts_auc.txt", tree_count_table(report, "auc"))
    write_text(out / "table_tree_counts_accuracy.txt", tree_count_table(report, "accuracy"))
    write_text(out / "table_classifiers_all13.txt", classifier_table(report, "All13"))
    write_text(out / "table_classifiers_top2.txt", classifier_table(report, "Top2"))
    write_text(out / "importances.csv", importance_csv(report))
    print(tree_count_table(report, "auc"))
    print()
    print(classifier_table(report, "All13"))
    print()
    print(importance_csv(report), end="")


if __name__ == "__main__":
    main()
