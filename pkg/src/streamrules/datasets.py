"""Labeled ML datasets from (program, stream) pairs.

Each sample is the window of raw sensor readings ending at a tick,
encoded as a fixed w x n matrix (rows chronological, one column per
(sector, predicate, metric) slot, missing readings zero), labeled with
the reasoner's answer at that tick.  Splits are chronological (windows
overlap, so shuffling would leak labels across the split boundary) and
feature standardization is fit on the training split only.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .model import Program, Stream
from .naive import run_stream_naive
from .incremental import run_stream_incremental


@dataclass(frozen=True)
class FeatureSlot:
    sector: float
    predicate: str
    metric: str


@dataclass
class FeatureSchema:
    """Deterministic (sector, predicate, metric) -> column mapping; the
    slot order is lexicographic and stable across runs."""

    slots: list
    window: int

    def __post_init__(self):
        self.index = {
            (s.sector, s.predicate, s.metric): i for i, s in enumerate(self.slots)
        }

    @property
    def n(self) -> int:
        return len(self.slots)

    @classmethod
    def from_stream(cls, stream: Stream, window: int, predicates=None) -> "FeatureSchema":
        keys = set()
        for t in stream.times():
            for atom in stream.at(t):
                key = _slot_key(atom)
                if key is None:
                    continue
                if predicates is not None and atom[0] not in predicates:
                    continue
                keys.add(key)
        slots = [FeatureSlot(*k) for k in sorted(keys)]
        return cls(slots, window)

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "columns": [
                {"sector": s.sector, "predicate": s.predicate, "metric": s.metric}
                for s in self.slots
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureSchema":
        slots = [
            FeatureSlot(c["sector"], c["predicate"], c["metric"])
            for c in data["columns"]
        ]
        return cls(slots, data["window"])


def _slot_key(atom) -> Optional[tuple]:
    """(sector, predicate, metric) of a sensor reading; None when the atom
    is not a featurizable reading (arity other than 3 or 4)."""
    if len(atom) == 4:  # pred(metric, value, sector)
        return (atom[3], atom[0], _metric_str(atom[1]))
    if len(atom) == 5:  # pred(type, value, sensor, sector)
        return (atom[4], atom[0], f"{_metric_str(atom[1])}:{_metric_str(atom[3])}")
    return None


def _metric_str(x) -> str:
    if isinstance(x, str):
        return x
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def _value_of(atom) -> float:
    return atom[2]


def encode_window(stream: Stream, schema: FeatureSchema, t: int) -> np.ndarray:
    """w x n matrix of readings for ticks (t-w+1 .. t), oldest row first.
    Missing readings are zero; duplicate readings for one slot keep the
    largest value (set semantics admits several atoms per slot)."""
    w = schema.window
    if t < stream.tmin + w - 1 or t > stream.tmax:
        raise ValueError(f"tick {t} out of range for window {w}")
    out = np.zeros((w, schema.n), dtype=np.float64)
    filled = np.zeros((w, schema.n), dtype=bool)
    index = schema.index
    for i in range(w):
        tick = t - w + 1 + i
        for atom in stream.at(tick):
            key = _slot_key(atom)
            if key is None:
                continue
            col = index.get(key)
            if col is None:
                continue
            value = _value_of(atom)
            if not filled[i, col] or value > out[i, col]:
                out[i, col] = value
                filled[i, col] = True
    return out


@dataclass(frozen=True)
class TaskKind:
    """Label construction: boolean | multilabel | multiclass | count.
    For multiclass, `classes` lists the output predicates from lowest to
    highest priority; class 0 means none of them holds."""

    kind: str
    k: int = 1
    classes: tuple = ()

    def __post_init__(self):
        if self.kind not in ("boolean", "multilabel", "multiclass", "count"):
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.kind == "multiclass" and len(self.classes) + 1 != self.k:
            raise ValueError("multiclass k must be len(classes) + 1")

    @classmethod
    def boolean(cls) -> "TaskKind":
        return cls("boolean", 1)

    @classmethod
    def multilabel(cls, k: int) -> "TaskKind":
        return cls("multilabel", k)

    @classmethod
    def multiclass(cls, classes) -> "TaskKind":
        classes = tuple(classes)
        return cls("multiclass", len(classes) + 1, classes)

    @classmethod
    def count(cls) -> "TaskKind":
        return cls("count", 1)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "k": self.k, "classes": list(self.classes)}

    @classmethod
    def from_dict(cls, data: dict) -> "TaskKind":
        return cls(data["kind"], data["k"], tuple(data.get("classes", ())))


def make_labels(results: list, task: TaskKind, universe: Optional[list] = None) -> list:
    """Per-tick labels from per-tick output atom sets.

    boolean    -> 1 iff any output atom holds
    multilabel -> one bit per universe entity occurring as an argument
    multiclass -> per universe entity, the highest-priority class whose
                  predicate holds for it (0 = none)
    count      -> number of distinct entities across all output atoms
    """
    if task.kind in ("multilabel", "multiclass") and not universe:
        raise ValueError(f"{task.kind} labels need a universe")
    labels = []
    for atoms in results:
        if task.kind == "boolean":
            labels.append(1 if atoms else 0)
        elif task.kind == "count":
            entities = {arg for atom in atoms for arg in atom[1:]}
            if universe:
                _check_universe(entities, universe)
            labels.append(float(len(entities)))
        elif task.kind == "multilabel":
            entities = {arg for atom in atoms for arg in atom[1:]}
            _check_universe(entities, universe)
            labels.append([1 if e in entities else 0 for e in universe])
        else:  # multiclass
            per_entity = []
            for e in universe:
                cls = 0
                for ci, pred in enumerate(task.classes):
                    if any(a[0] == pred and e in a[1:] for a in atoms):
                        cls = ci + 1
                per_entity.append(cls)
            entities = {arg for atom in atoms for arg in atom[1:]}
            _check_universe(entities, universe)
            labels.append(per_entity)
    return labels


def _check_universe(entities, universe) -> None:
    extra = set(entities) - set(universe)
    if extra:
        raise ValueError(f"entities outside the universe: {sorted(extra)}")


@dataclass
class StandardizationParams:
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray  # bool per column

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "constant": [bool(b) for b in self.constant],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StandardizationParams":
        return cls(
            np.asarray(data["mean"], dtype=np.float64),
            np.asarray(data["std"], dtype=np.float64),
            np.asarray(data["constant"], dtype=bool),
        )


def fit_standardize(train: np.ndarray) -> StandardizationParams:
    """Per-column mean/std over the training samples (rows of all windows
    pooled).  Columns with zero deviation are flagged constant."""
    if train.size == 0:
        raise ValueError("empty training split")
    flat = train.reshape(-1, train.shape[-1])
    mean = flat.mean(axis=0)
    std = flat.std(axis=0)
    constant = std == 0.0
    return StandardizationParams(mean, std, constant)


def apply_standardize(x: np.ndarray, params: StandardizationParams) -> np.ndarray:
    """Elementwise (x - mean) / std; constant columns map to zero."""
    std = np.where(params.constant, 1.0, params.std)
    out = (x - params.mean) / std
    if params.constant.any():
        out[..., params.constant] = 0.0
    return out


def split_dataset(samples, train_frac: float = 0.8, val_frac: float = 0.2):
    """Chronological (train, val, test) split: `train_frac` of the samples
    go to training, of which `val_frac` are held out (from the end of the
    training range) for validation; the rest is the test split."""
    if not 0 < train_frac < 1 or not 0 <= val_frac < 1:
        raise ValueError("fractions must lie in (0, 1)")
    n = len(samples)
    n_train_total = int(n * train_frac)
    n_val = int(n_train_total * val_frac)
    n_train = n_train_total - n_val
    if n_train == 0 or n - n_train_total == 0:
        raise ValueError(f"cannot split {n} samples with train_frac={train_frac}")
    return (
        samples[:n_train],
        samples[n_train:n_train_total],
        samples[n_train_total:],
    )


@dataclass
class LabeledDataset:
    schema: FeatureSchema
    task: TaskKind
    x: np.ndarray  # (N, w, n), standardized
    labels: np.ndarray  # (N,) or (N, k)
    ticks: np.ndarray  # (N,)
    splits: list  # per-sample "train" | "val" | "test"
    params: StandardizationParams
    universe: list = field(default_factory=list)

    def split_arrays(self, name: str):
        mask = np.asarray([s == name for s in self.splits])
        return self.x[mask], self.labels[mask]

    def counts(self) -> dict:
        out = {"train": 0, "val": 0, "test": 0}
        for s in self.splits:
            out[s] += 1
        return out


def build_dataset(
    program: Program,
    stream: Stream,
    outputs,
    task: TaskKind,
    window: int,
    universe: Optional[list] = None,
    train_frac: float = 0.8,
    val_frac: float = 0.2,
    engine: str = "incremental",
) -> LabeledDataset:
    """Run the reasoner over the stream and assemble the labeled dataset."""
    if engine == "incremental":
        answers = run_stream_incremental(program, stream, outputs)
    elif engine == "naive":
        answers = run_stream_naive(program, stream, outputs)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    if universe is None:
        universe = [float(s) for s in _default_universe(stream)]
    schema = FeatureSchema.from_stream(stream, window)
    first = stream.tmin + window - 1
    ticks = [t for t, _ in answers if t >= first]
    per_tick = {t: atoms for t, atoms in answers}
    labels = make_labels([per_tick[t] for t in ticks], task, universe)
    raw = np.stack([encode_window(stream, schema, t) for t in ticks])
    idx = list(range(len(ticks)))
    train_i, val_i, test_i = split_dataset(idx, train_frac, val_frac)
    splits = (
        ["train"] * len(train_i) + ["val"] * len(val_i) + ["test"] * len(test_i)
    )
    params = fit_standardize(raw[: len(train_i)])
    x = apply_standardize(raw, params)
    label_arr = np.asarray(labels, dtype=np.float64)
    return LabeledDataset(
        schema, task, x, label_arr, np.asarray(ticks), splits, params, list(universe)
    )


def _default_universe(stream: Stream) -> list:
    sectors = set()
    for t in stream.times():
        for atom in stream.at(t):
            key = _slot_key(atom)
            if key is not None:
                sectors.add(key[0])
    return sorted(sectors)


def export_dataset(dataset: LabeledDataset, path, format: str = "ndjson") -> None:
    """Write one record per sample (flattened row-major matrix, label,
    tick, split) plus a `<path>.meta.json` sidecar with the schema, task,
    universe, standardization parameters and split counts."""
    path = Path(path)
    if format not in ("ndjson", "csv"):
        raise ValueError(f"unknown format {format!r}")
    meta = {
        "format": format,
        "schema": dataset.schema.to_dict(),
        "task": dataset.task.to_dict(),
        "universe": list(dataset.universe),
        "standardization": dataset.params.to_dict(),
        "counts": dataset.counts(),
    }
    with open(str(path) + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    n = dataset.x.shape[0]
    if format == "ndjson":
        with open(path, "w") as fh:
            for i in range(n):
                rec = {
                    "t": int(dataset.ticks[i]),
                    "split": dataset.splits[i],
                    "label": _label_json(dataset.labels[i]),
                    "x": dataset.x[i].reshape(-1).tolist(),
                }
                fh.write(json.dumps(rec))
                fh.write("\n")
        return
    w, ncol = dataset.schema.window, dataset.schema.n
    label_width = 1 if dataset.labels.ndim == 1 else dataset.labels.shape[1]
    header = (
        ["t", "split"]
        + [f"label_{j}" for j in range(label_width)]
        + [f"x_{r}_{c}" for r in range(w) for c in range(ncol)]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(n):
            label = dataset.labels[i]
            label_cells = (
                [repr(float(label))]
                if label_width == 1
                else [repr(float(v)) for v in label]
            )
            row = (
                [str(int(dataset.ticks[i])), dataset.splits[i]]
                + label_cells
                + [repr(float(v)) for v in dataset.x[i].reshape(-1)]
            )
            writer.writerow(row)


def _label_json(label):
    if np.ndim(label) == 0:
        return float(label)
    return [float(v) for v in label]


def read_dataset(path) -> LabeledDataset:
    """Read a dataset written by export_dataset (either format)."""
    path = Path(path)
    with open(str(path) + ".meta.json") as fh:
        meta = json.load(fh)
    schema = FeatureSchema.from_dict(meta["schema"])
    task = TaskKind.from_dict(meta["task"])
    params = StandardizationParams.from_dict(meta["standardization"])
    universe = meta["universe"]
    w, ncol = schema.window, schema.n
    ticks, splits, labels, xs = [], [], [], []
    if meta["format"] == "ndjson":
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                ticks.append(rec["t"])
                splits.append(rec["split"])
                labels.append(rec["label"])
                xs.append(np.asarray(rec["x"], dtype=np.float64).reshape(w, ncol))
    else:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            label_width = sum(1 for h in header if h.startswith("label_"))
            for row in reader:
                ticks.append(int(row[0]))
                splits.append(row[1])
                raw_labels = [float(v) for v in row[2 : 2 + label_width]]
                labels.append(raw_labels[0] if label_width == 1 else raw_labels)
                xs.append(
                    np.asarray(row[2 + label_width :], dtype=np.float64).reshape(w, ncol)
                )
    x = np.stack(xs) if xs else np.zeros((0, w, ncol))
    return LabeledDataset(
        schema,
        task,
        x,
        np.asarray(labels, dtype=np.float64),
        np.asarray(ticks),
        splits,
        params,
        universe,
    )
