"""Surrogate acceptance: training quality and inference latency.

Thresholds are deliberately loose relative to the study's real-data
figures (its boolean query reached ~0.99 test accuracy and its count
query ~0.006 test MSE on hardware and data we do not reproduce): both
architectures must reach 0.90 accuracy on a balanced synthetic boolean
dataset, the count CNN must reach 0.5 MSE, and batch-1 inference must
stay under a millisecond median.
"""

import time

import pytest

from surrogate_bench import load_dataset, measure_latency, train

pytestmark = pytest.mark.acceptance


def _report(name):
    print(f"ACCEPTANCE PASS: {name}")


@pytest.fixture(scope="module")
def trained_q1(q1_full):
    bundle = load_dataset(q1_full)
    assert bundle.x.shape[0] >= 10000
    labels = bundle.labels
    positive = float(labels.mean())
    assert 0.35 <= positive <= 0.65, f"unbalanced dataset: {positive:.2f} positive"
    out = {}
    start = time.perf_counter()
    out["cnn"] = train("q1", "cnn", bundle, seed=0)  # default 50 epochs
    out["lstm"] = train("q1", "lstm", bundle, seed=0)  # default 100 epochs
    out["wall"] = time.perf_counter() - start
    out["bundle"] = bundle
    return out


def test_boolean_surrogate_quality(trained_q1):
    cnn_acc = trained_q1["cnn"][1].test_metric
    lstm_acc = trained_q1["lstm"][1].test_metric
    assert cnn_acc >= 0.90, f"CNN accuracy {cnn_acc:.4f}"
    assert lstm_acc >= 0.90, f"LSTM accuracy {lstm_acc:.4f}"
    _report(
        f"boolean surrogates: CNN accuracy {cnn_acc:.4f}, "
        f"LSTM accuracy {lstm_acc:.4f} on {trained_q1['bundle'].x.shape[0]} samples"
    )


def test_count_surrogate_quality(q4_full):
    bundle = load_dataset(q4_full)
    _, report = train("q4", "cnn", bundle, seed=0)  # default 50 epochs
    assert report.test_metric <= 0.5, f"count MSE {report.test_metric:.4f}"
    _report(f"count surrogate: CNN test MSE {report.test_metric:.4f}")


def test_training_within_cpu_budget(trained_q1):
    # Both boolean trainings together stay far inside the 30-minute budget.
    assert trained_q1["wall"] < 1500, trained_q1["wall"]
    _report(f"training wall clock: {trained_q1['wall']:.0f}s for both architectures")


def test_inference_latency(trained_q1):
    bundle = trained_q1["bundle"]
    x_test, _ = bundle.split("test")
    for family in ("cnn", "lstm"):
        model = trained_q1[family][0]
        stats = measure_latency(model, x_test, repeats=300)
        assert stats["median_us"] <= 1000, (family, stats)
        _report(
            f"latency {family}: median {stats['median_us']:.0f} us, "
            f"p99 {stats['p99_us']:.0f} us at batch 1"
        )
