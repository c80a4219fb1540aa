import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "3")

QUERY_DIR = Path(__file__).resolve().parents[2] / "src" / "streamrules" / "queries"


def export_dataset(tmp_dir: Path, name: str, **kwargs) -> Path:
    """Produce a labeled dataset through the stream engine's CLI (the
    surrogate consumes the engine only via its exported files)."""
    config = dict(kwargs.pop("config"))
    out = tmp_dir / f"{name}.ndjson"
    cfg_path = tmp_dir / f"{name}.config.json"
    cfg_path.write_text(json.dumps(config))
    cmd = [
        sys.executable,
        "-m",
        "streamrules",
        "export",
        "--program",
        str(QUERY_DIR / kwargs.pop("program")),
        "--synthetic",
        str(cfg_path),
        "--out",
        str(out),
    ]
    for key, value in kwargs.items():
        cmd += [f"--{key.replace('_', '-')}", str(value)]
    subprocess.run(cmd, check=True, capture_output=True, text=True)
    return out


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("datasets")


@pytest.fixture(scope="session")
def q1_small(data_dir):
    """A small balanced boolean dataset for fast smoke tests."""
    return export_dataset(
        data_dir,
        "q1_small",
        config={
            "seed": 5,
            "sectors": 4,
            "sensors_per_sector": 3,
            "ticks": 450,
            "scenario": "metro",
            "anomaly_probability": 0.5,
        },
        program="q1_metropolitan.rules",
        outputs="city",
        task="boolean",
        window=21,
    )


@pytest.fixture(scope="session")
def q3_small(data_dir):
    """A small multiclass dataset for the per-sector training option."""
    return export_dataset(
        data_dir,
        "q3_small",
        config={
            "seed": 6,
            "sectors": 3,
            "sensors_per_sector": 3,
            "ticks": 300,
            "scenario": "zones",
            "anomaly_probability": 0.6,
        },
        program="q3_sector_classification.rules",
        outputs="urban_box,highway_box,industrial_box",
        task="multiclass",
        classes="urban_box,highway_box,industrial_box",
        universe="1,2,3",
        window=21,
    )


@pytest.fixture(scope="session")
def q1_full(data_dir):
    """The balanced >= 10000-sample boolean dataset the quality criterion
    trains on.  The 21-tick window covers the query's full derivation
    horizon (9-tick windows over 9-tick-windowed intermediates plus a
    3-step box), so every label is decidable from its input matrix."""
    return export_dataset(
        data_dir,
        "q1_full",
        config={
            "seed": 41,
            "sectors": 5,
            "sensors_per_sector": 3,
            "ticks": 10028,
            "scenario": "metro",
            "anomaly_probability": 0.5,
        },
        program="q1_metropolitan.rules",
        outputs="city",
        task="boolean",
        window=21,
    )


@pytest.fixture(scope="session")
def q4_full(data_dir):
    """Count-capped regression dataset (counts 0..3, 19-tick horizon)."""
    return export_dataset(
        data_dir,
        "q4_full",
        config={
            "seed": 43,
            "sectors": 5,
            "sensors_per_sector": 3,
            "ticks": 6018,
            "scenario": "rural",
            "anomaly_probability": 0.4,
            "max_concurrent": 3,
        },
        program="q4_rural_count.rules",
        outputs="urban_area",
        task="count",
        window=19,
    )
