"""Print the first few trees of a forest trained on the default corpus,
one node per line, with depth and leaf counts."""
import argparse

from rotorbar.cart import iter_nodes, render_tree, tree_depth
from rotorbar.dataset import dataset_from_records
from rotorbar.forest import ForestConfig, fit_forest
from rotorbar.signals import GeneratorConfig, generate_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=40)
    ap.add_argument("--data-seed", type=int, default=0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trees", type=int, default=100)
    ap.add_argument("--show", type=int, default=3, help="number of trees to print")
    ap.add_argument("--features", help="comma-separated subset, default all")
    args = ap.parse_args()

    ds = dataset_from_records(generate_dataset(GeneratorConfig(), args.trials, args.data_seed))
    if args.features:
        ds = ds.select(args.features.split(","))
    model = fit_forest(ds.X, ds.y, ForestConfig(n_trees=args.trees, rng_seed=args.seed), ds.feature_names)
    for i, tree in enumerate(model.trees[: args.show]):
        n_nodes = sum(1 for _ in iter_nodes(tree))
        print(f"# tree {i}: depth {tree_depth(tree)}, {n_nodes} nodes")
        print(render_tree(tree, ds.feature_names))
        print()


if __name__ == "__main__":
    main()
