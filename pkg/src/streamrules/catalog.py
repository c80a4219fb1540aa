"""Registry of the shipped query programs and their companion synthetic
stream configurations, dataset task kinds, and window sizes."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .datasets import TaskKind
from .parser import parse_program
from .synth import SyntheticConfig


@dataclass(frozen=True)
class QueryInfo:
    name: str
    file: str
    config_file: str
    outputs: tuple
    window: int  # dataset window length (the query's nominal window)
    task: TaskKind
    universe: str = "sectors"  # sectors | cities


_Q3_CLASSES = ("urban_box", "highway_box", "industrial_box")

QUERIES = {
    "q1": QueryInfo(
        "q1",
        "q1_metropolitan.rules",
        "q1_metropolitan.config.json",
        ("city",),
        9,
        TaskKind.boolean(),
    ),
    "q2": QueryInfo(
        "q2",
        "q2_conflicting_sectors.rules",
        "q2_conflicting_sectors.config.json",
        ("x",),
        3,
        TaskKind.multilabel(10),
    ),
    "q3": QueryInfo(
        "q3",
        "q3_sector_classification.rules",
        "q3_sector_classification.config.json",
        _Q3_CLASSES,
        9,
        TaskKind.multiclass(_Q3_CLASSES),
    ),
    "q4": QueryInfo(
        "q4",
        "q4_rural_count.rules",
        "q4_rural_count.config.json",
        ("urban_area",),
        9,
        TaskKind.count(),
    ),
    "q5": QueryInfo(
        "q5",
        "q5_anomaly_alerts.rules",
        "q5_anomaly_alerts.config.json",
        ("alert",),
        4,
        TaskKind.multilabel(3),
        universe="cities",
    ),
}

QUERY_NAMES = tuple(QUERIES)


def query_dir() -> Path:
    return Path(resources.files("streamrules") / "queries")


def program_path(name: str) -> Path:
    return query_dir() / QUERIES[name].file


def config_path(name: str) -> Path:
    return query_dir() / QUERIES[name].config_file


def load_program(name: str):
    return parse_program(program_path(name).read_text())


def load_config(name: str, **overrides) -> SyntheticConfig:
    with open(config_path(name)) as fh:
        data = json.load(fh)
    data.update(overrides)
    return SyntheticConfig.from_dict(data)


def universe_for(name: str, config: SyntheticConfig) -> list:
    info = QUERIES[name]
    if info.universe == "cities":
        return [3.0, 4.0, 6.0]
    return [float(s) for s in range(1, config.sectors + 1)]


def bench_config(**overrides) -> SyntheticConfig:
    """The shipped throughput benchmark: 273 facts per tick, 1000 ticks."""
    with open(query_dir() / "bench_273.config.json") as fh:
        data = json.load(fh)
    data.update(overrides)
    return SyntheticConfig.from_dict(data)
