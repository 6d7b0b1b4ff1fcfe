"""On-disk formats: per-record signal CSVs, the dataset manifest, trained
model JSON and the report schema."""

import csv
import hashlib
import json
from importlib import resources
from pathlib import Path

import numpy as np

from . import baselines
from .errors import DataError
from .forest import model_from_dict, model_to_dict
from .signals import Condition, Load, SignalRecord

MODEL_FORMAT = "rotorbar-model/1"
MANIFEST_FORMAT = "rotorbar-manifest/1"


def dumps(obj):
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_text(path, text):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def record_filename(record):
    return f"{record.condition.value.lower()}_{record.load.value}_{record.trial_id:03d}.csv"


def write_signal_csv(path, record):
    t = record.times
    lines = ["t_s,current_a"]
    lines += [f"{a!r},{b!r}" for a, b in zip(t.tolist(), np.asarray(record.samples).tolist())]
    write_text(path, "\n".join(lines) + "\n")


def read_signal_csv(path, condition, load, trial_id, seed, sample_rate):
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = [r for r in reader if r]
    except OSError as exc:
        raise DataError(f"cannot read signal file {path}: {exc.strerror}") from exc
    if header != ["t_s", "current_a"]:
        raise DataError(f"{path}: expected header t_s,current_a, got {header}")
    if not rows:
        raise DataError(f"{path}: no samples (trial {trial_id})")
    try:
        data = np.array([[float(a), float(b)] for a, b in rows])
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    return SignalRecord(
        samples=data[:, 1],
        sample_rate=float(sample_rate),
        condition=Condition(condition),
        load=Load(load),
        trial_id=int(trial_id),
        seed=int(seed),
        t0=float(data[0, 0]),
    )


def write_dataset(out_dir, records, provenance):
    """One CSV per record under ``signals/`` plus ``manifest.json``."""
    out_dir = Path(out_dir)
    entries = []
    for r in records:
        name = f"signals/{record_filename(r)}"
        write_signal_csv(out_dir / name, r)
        entries.append({
            "file": name,
            "condition": r.condition.value,
            "load": r.load.value,
            "trial_id": r.trial_id,
            "seed": r.seed,
            "sample_rate": r.sample_rate,
        })
    manifest = {"format": MANIFEST_FORMAT, "provenance": provenance, "records": entries}
    write_text(out_dir / "manifest.json", dumps(manifest))
    return out_dir / "manifest.json"


def read_manifest(path):
    try:
        manifest = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest {path} is not valid JSON: {exc}") from exc
    if "records" not in manifest:
        raise DataError(f"manifest {path} has no 'records' list")
    return manifest


def iter_manifest_records(manifest_path):
    """Yield ``(entry, record_or_error)`` for every manifest entry."""
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    for entry in manifest["records"]:
        try:
            record = read_signal_csv(
                manifest_path.parent / entry["file"],
                entry["condition"], entry["load"], entry["trial_id"],
                entry["seed"], entry["sample_rate"],
            )
        except (DataError, KeyError, ValueError) as exc:
            yield entry, exc
            continue
        yield entry, record


# Models -----------------------------------------------------------------


def model_document(kind, model, feature_names, provenance):
    body = model_to_dict(model) if kind == "random_forest" else baselines.classifier_to_dict(model)
    return {
        "format": MODEL_FORMAT,
        "classifier": kind,
        "feature_names": list(feature_names),
        "model": body,
        "provenance": provenance,
    }


def load_model_document(doc):
    """``(kind, model, feature_names)`` from a parsed model document."""
    if doc.get("format") != MODEL_FORMAT:
        raise DataError(f"not a model file (format {doc.get('format')!r})")
    kind = doc["classifier"]
    if kind == "random_forest":
        model = model_from_dict(doc["model"])
    else:
        model = baselines.classifier_from_dict(doc["model"])
    return kind, model, tuple(doc["feature_names"])


def read_model(path):
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"model {path} is not valid JSON: {exc}") from exc
    return load_model_document(doc)


def report_schema():
    return json.loads(resources.files("rotorbar").joinpath("report.schema.json").read_text())
