"""Training and evaluation harness.

Splits come from the dataset file, never recomputed.  Defaults the paper
protocol leaves open (optimizer, learning rate, batch size) are fixed here
and recorded in every report.
"""

from __future__ import annotations

import json
import statistics
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .arch import ARCHS, DEFAULT_EPOCHS, ArchSpec, ConfigurationError, build_model, check_task_compatible
from .data import DatasetBundle, Task

DEFAULTS = {
    "optimizer": "adam",
    "learning_rate": 1e-3,
    "batch_size": 128,
}


@dataclass
class TrainReport:
    query: str
    family: str
    arch: str
    task: str
    epochs: int
    seed: int
    config: dict
    history: dict
    test_metric_name: str
    test_metric: float
    test_loss: float
    wall_clock_s: float
    latency_us_median: Optional[float] = None
    latency_us_p99: Optional[float] = None
    sector: Optional[int] = None

    def to_json(self, path=None) -> str:
        text = json.dumps(asdict(self), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text


def _compile_for_task(model, task: Task):
    if task.kind == "boolean":
        model.compile(
            optimizer=_optimizer(), loss="binary_crossentropy", metrics=["accuracy"]
        )
        return "accuracy"
    if task.kind == "multilabel":
        model.compile(
            optimizer=_optimizer(), loss="binary_crossentropy",
            metrics=["binary_accuracy"],
        )
        return "binary_accuracy"
    if task.kind == "multiclass":
        model.compile(
            optimizer=_optimizer(), loss="sparse_categorical_crossentropy",
            metrics=["accuracy"],
        )
        return "accuracy"
    model.compile(optimizer=_optimizer(), loss="mse", metrics=["mse"])
    return "mse"


def _optimizer():
    import keras

    return keras.optimizers.Adam(learning_rate=DEFAULTS["learning_rate"])


def _task_arrays(bundle: DatasetBundle, sector: Optional[int]):
    """(train, val, test) (x, y) pairs; multiclass tasks train one model
    per universe entity, selected by `sector` (an index into the
    universe)."""
    task = bundle.task
    out = []
    for name in ("train", "val", "test"):
        x, y = bundle.split(name)
        if task.kind == "multiclass":
            if sector is None:
                raise ConfigurationError("multiclass training needs a sector index")
            y = y[:, sector]
        out.append((x, y))
    return out


def train(
    query: str,
    family: str,
    bundle: DatasetBundle,
    epochs: Optional[int] = None,
    seed: int = 0,
    sector: Optional[int] = None,
    verbose: int = 0,
) -> tuple:
    """Train one architecture on a loaded dataset; returns (model, report).

    Deterministic for a fixed seed up to backend nondeterminism.  With
    epochs=0 the report carries the untrained baseline metric.
    """
    import keras

    spec = ARCHS[(query, family)]
    check_task_compatible(spec, bundle.task.output_width)
    if epochs is None:
        epochs = DEFAULT_EPOCHS[family]
    keras.utils.set_random_seed(seed)
    (x_train, y_train), (x_val, y_val), (x_test, y_test) = _task_arrays(bundle, sector)
    model = build_model(spec, bundle.x.shape[1:])
    metric_name = _compile_for_task(model, bundle.task)
    start = time.perf_counter()
    history: dict = {}
    if epochs > 0:
        fit = model.fit(
            x_train,
            y_train,
            validation_data=(x_val, y_val) if len(x_val) else None,
            epochs=epochs,
            batch_size=DEFAULTS["batch_size"],
            verbose=verbose,
        )
        history = {k: [float(v) for v in vs] for k, vs in fit.history.items()}
    wall = time.perf_counter() - start
    test_loss, test_metric = model.evaluate(x_test, y_test, verbose=0)
    report = TrainReport(
        query=query,
        family=family,
        arch=spec.describe(),
        task=bundle.task.kind,
        epochs=epochs,
        seed=seed,
        config=dict(DEFAULTS),
        history=history,
        test_metric_name=metric_name,
        test_metric=float(test_metric),
        test_loss=float(test_loss),
        wall_clock_s=round(wall, 2),
        sector=sector,
    )
    return model, report


def train_per_sector(
    query: str,
    family: str,
    bundle: DatasetBundle,
    epochs: Optional[int] = None,
    seed: int = 0,
    verbose: int = 0,
) -> tuple:
    """One model per universe entity for multiclass datasets; returns the
    per-sector reports plus the mean test accuracy across sectors."""
    if bundle.task.kind != "multiclass":
        raise ConfigurationError("per-sector training applies to multiclass tasks")
    reports = []
    for sector in range(len(bundle.universe)):
        _, report = train(
            query, family, bundle, epochs=epochs, seed=seed + sector,
            sector=sector, verbose=verbose,
        )
        reports.append(report)
    aggregate = float(np.mean([r.test_metric for r in reports]))
    return reports, aggregate


def measure_latency(model, samples: np.ndarray, repeats: int = 200) -> dict:
    """Median and p99 single-sample inference latency in microseconds at
    batch size 1, using an XLA-compiled forward pass (warmed up first);
    recurrent stacks are several times slower without the fused loop."""
    import tensorflow as tf

    if len(samples) == 0:
        raise ValueError("empty sample set")
    fn = tf.function(lambda t: model(t, training=False), jit_compile=True)
    tensors = [
        tf.constant(samples[i % len(samples)][None, ...]) for i in range(min(len(samples), 16))
    ]
    for t in tensors:  # warmup + trace
        fn(t)
    times = []
    for i in range(repeats):
        t = tensors[i % len(tensors)]
        start = time.perf_counter()
        fn(t)
        times.append((time.perf_counter() - start) * 1e6)
    ordered = sorted(times)
    return {
        "median_us": statistics.median(ordered),
        "p99_us": ordered[min(len(ordered) - 1, int(len(ordered) * 0.99))],
        "repeats": repeats,
    }


def save_curves(report: TrainReport, path) -> None:
    """Loss and metric curves (train + validation) as one PNG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    history = report.history
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    axes[0].plot(history.get("loss", []), label="train")
    if "val_loss" in history:
        axes[0].plot(history["val_loss"], label="val")
    axes[0].set_title(f"{report.query} {report.family}: loss")
    axes[0].set_xlabel("epoch")
    axes[0].legend()
    metric = report.test_metric_name
    axes[1].plot(history.get(metric, []), label="train")
    if f"val_{metric}" in history:
        axes[1].plot(history[f"val_{metric}"], label="val")
    axes[1].set_title(f"{report.query} {report.family}: {metric}")
    axes[1].set_xlabel("epoch")
    axes[1].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
