"""Labelled feature matrix with per-row provenance, plus its CSV format."""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError, FeatureArityError
from .features import FEATURE_NAMES, extract_features
from .signals import Condition, Load, preprocess

META_COLUMNS = ("trial_id", "condition", "load")
CSV_COLUMNS = META_COLUMNS + FEATURE_NAMES


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray  # 1 = faulty
    feature_names: tuple
    trial_id: np.ndarray
    load: tuple  # Load value strings, one per row

    def __post_init__(self):
        if self.X.shape != (len(self.y), len(self.feature_names)):
            raise ValueError("X shape does not match labels and feature names")

    def __len__(self):
        return len(self.y)

    def select(self, names):
        """Columns by name, in the order given."""
        missing = [n for n in names if n not in self.feature_names]
        if missing:
            raise FeatureArityError(f"dataset lacks feature columns {missing}", missing)
        cols = [self.feature_names.index(n) for n in names]
        return Dataset(self.X[:, cols], self.y, tuple(names), self.trial_id, self.load)

    def take(self, rows):
        rows = np.asarray(rows)
        return Dataset(
            self.X[rows], self.y[rows], self.feature_names, self.trial_id[rows],
            tuple(self.load[i] for i in rows),
        )

    def with_labels(self, y):
        return Dataset(self.X, np.asarray(y, dtype=int), self.feature_names, self.trial_id, self.load)


def dataset_from_records(records, periods=40):
    """Preprocess and featurise raw records."""
    rows = [extract_features(preprocess(r, periods)).as_array() for r in records]
    return Dataset(
        X=np.array(rows).reshape(len(rows), len(FEATURE_NAMES)),
        y=np.array([r.condition.label for r in records], dtype=int),
        feature_names=FEATURE_NAMES,
        trial_id=np.array([r.trial_id for r in records], dtype=int),
        load=tuple(r.load.value for r in records),
    )


def write_feature_csv(path, dataset):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(META_COLUMNS + tuple(dataset.feature_names))
        for i in range(len(dataset)):
            condition = Condition.FAULTY if dataset.y[i] else Condition.HEALTHY
            meta = [int(dataset.trial_id[i]), condition.value, dataset.load[i]]
            w.writerow(meta + [repr(float(v)) for v in dataset.X[i]])


def read_feature_csv(path, feature_names=None):
    """Load a feature CSV; feature columns are found by header name.

    ``feature_names`` restricts (and orders) the columns; by default every
    known feature column present in the header is used.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    missing_meta = [c for c in META_COLUMNS if c not in header]
    if missing_meta and header:
        raise FeatureArityError(f"{path}: missing columns {missing_meta}", missing_meta)
    if feature_names is None:
        feature_names = [n for n in FEATURE_NAMES if n in header]
    missing = [n for n in feature_names if n not in header]
    if missing and header:
        raise FeatureArityError(f"{path}: missing feature columns {missing}", missing)
    try:
        X = np.array([[float(r[n]) for n in feature_names] for r in rows], dtype=float)
        y = np.array([Condition(r["condition"]).label for r in rows], dtype=int)
        trial_id = np.array([int(r["trial_id"]) for r in rows], dtype=int)
        load = tuple(Load(r["load"]).value for r in rows)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed row: {exc}") from exc
    return Dataset(X.reshape(len(rows), len(feature_names)), y, tuple(feature_names), trial_id, load)
