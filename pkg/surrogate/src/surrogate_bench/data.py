"""Reader for the dataset interchange files the stream engine exports.

A dataset is a data file (NDJSON or CSV, one record per sample holding the
flattened window matrix, label, tick and split tag) plus a
``<file>.meta.json`` sidecar with the feature schema, task kind, universe,
standardization parameters and split counts.  Split membership always
comes from the file; it is never recomputed here.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class Task:
    kind: str  # boolean | multilabel | multiclass | count
    k: int
    classes: tuple = ()

    @property
    def output_width(self) -> int:
        if self.kind in ("boolean", "count"):
            return 1
        return self.k


@dataclass
class DatasetBundle:
    x: np.ndarray  # (N, w, n)
    labels: np.ndarray  # (N,) or (N, width)
    splits: list
    ticks: np.ndarray
    task: Task
    universe: list
    window: int
    columns: int
    meta: dict

    def split(self, name: str):
        mask = np.asarray([s == name for s in self.splits])
        return self.x[mask], self.labels[mask]

    def counts(self) -> dict:
        out: dict = {}
        for s in self.splits:
            out[s] = out.get(s, 0) + 1
        return out


def load_dataset(path) -> DatasetBundle:
    path = Path(path)
    with open(str(path) + ".meta.json") as fh:
        meta = json.load(fh)
    schema = meta["schema"]
    w = schema["window"]
    n = len(schema["columns"])
    task = Task(
        meta["task"]["kind"], meta["task"]["k"], tuple(meta["task"].get("classes", ()))
    )
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
                xs.append(rec["x"])
    else:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            label_width = sum(1 for h in header if h.startswith("label_"))
            for row in reader:
                ticks.append(int(row[0]))
                splits.append(row[1])
                vals = [float(v) for v in row[2 : 2 + label_width]]
                labels.append(vals[0] if label_width == 1 else vals)
                xs.append([float(v) for v in row[2 + label_width :]])
    x = np.asarray(xs, dtype=np.float32).reshape(len(xs), w, n)
    return DatasetBundle(
        x=x,
        labels=np.asarray(labels, dtype=np.float32),
        splits=splits,
        ticks=np.asarray(ticks),
        task=task,
        universe=meta.get("universe", []),
        window=w,
        columns=n,
        meta=meta,
    )
