"""Seeded synthetic sensor streams.

Baseline readings are uniform noise kept away from every value band the
shipped queries react to, so a stream with no anomaly episodes yields
all-negative answers.  Anomaly episodes overlay extra readings that hit
exactly the bands a scenario's target query needs, at a configurable
rate, which is how exported datasets get a controllable label balance.

Scenarios (one per shipped query family):

* ``metro``    -- one sector gets industrial+highway+urban signatures at
                  once (drives the metropolitan-event query).
* ``conflict`` -- a sector pair gets sustained low vs high constant
                  readings plus a parking event (conflicting-sectors).
* ``zones``    -- one sector gets one of the three zone signatures
                  (sector-classification).
* ``rural``    -- one to `max_concurrent` sectors get the quiet/urban
                  signature (rural-event counting).
* ``alerts``   -- a city sector and two of its suburbs get sustained
                  two-type pollution peaks (4-ary facts, anomaly alerts).
* ``noise``    -- baseline only.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .model import Stream

# Suburb structure of the anomaly-alerts background knowledge.
CITY_SUBURBS = {3: (1, 2, 10), 4: (8, 9), 6: (7, 5)}

SCENARIOS = ("metro", "conflict", "zones", "rural", "alerts", "noise")


# Per-scenario (episode period, episode length).  Lengths are short; the
# positive span of an episode extends past its last banded tick by the
# query's window depth (each diamond layer adds its window), so periods
# are sized to make the positive fraction track anomaly_probability.
SCENARIO_EPISODES = {
    "metro": (20, 4),
    "zones": (20, 4),
    "rural": (28, 4),
    "conflict": (16, 6),
    "alerts": (20, 8),
    "noise": (20, 4),
}


@dataclass(frozen=True)
class SyntheticConfig:
    seed: int = 0
    sectors: int = 10
    sensors_per_sector: int = 3
    ticks: int = 1000
    scenario: str = "metro"
    anomaly_probability: float = 0.5
    episode_period: Optional[int] = None
    episode_length: Optional[int] = None
    pollution_range: tuple = (30.0, 180.0)
    traffic_range: tuple = (60.0, 140.0)
    parking_rate: float = 0.2
    max_concurrent: int = 3

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.scenario == "alerts" and self.sectors < 10:
            raise ValueError("alerts scenario needs at least 10 sectors")
        if self.period() <= self.length():
            raise ValueError("episode_length must be below episode_period")

    def period(self) -> int:
        return self.episode_period or SCENARIO_EPISODES[self.scenario][0]

    def length(self) -> int:
        return self.episode_length or SCENARIO_EPISODES[self.scenario][1]

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticConfig":
        data = dict(data)
        for key in ("pollution_range", "traffic_range"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "SyntheticConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pollution_range"] = list(self.pollution_range)
        out["traffic_range"] = list(self.traffic_range)
        return out


# Value bands the queries trigger on (see the shipped query programs).
POLL_HIGH = 214.5  # in [214, 215]
POLL_LOW = 7.0  # in [0, 15]
TRAFF_LOW = 10.5  # in [10, 11]
TRAFF_HIGH = 275.0  # in [250, 300]
CONFLICT_TRAFF_LOW = 40.0  # <= 45
CONFLICT_POLL_LOW = 10.0  # <= 16
CONFLICT_TRAFF_HIGH = 160.0  # >= 150
CONFLICT_POLL_HIGH = 200.0  # >= 195
ALERT_POLLUTION = 150.0  # > 125


def _device_kinds(n: int) -> list:
    # Alternate kinds, pollution first, so any n >= 2 has both.
    return ["pollution" if i % 2 == 0 else "traffic" for i in range(n)]


def generate_synthetic(config: SyntheticConfig) -> Stream:
    """Generate a stream; identical configs give identical streams."""
    rng = np.random.default_rng(config.seed)
    if config.scenario == "alerts":
        return _generate_alerts(config, rng)

    kinds = _device_kinds(config.sensors_per_sector)
    p_lo, p_hi = config.pollution_range
    t_lo, t_hi = config.traffic_range
    episodes = _schedule_episodes(config, rng)

    ticks = {}
    for t in range(config.ticks):
        facts = []
        poll = rng.uniform(p_lo, p_hi, size=(config.sectors, len(kinds)))
        traf = rng.uniform(t_lo, t_hi, size=(config.sectors, len(kinds)))
        park = rng.random(config.sectors)
        for sec in range(1, config.sectors + 1):
            fsec = float(sec)
            for j, kind in enumerate(kinds):
                if kind == "pollution":
                    facts.append(("pollution", f"p{j}", float(poll[sec - 1, j]), fsec))
                else:
                    facts.append(("traffic", f"t{j}", float(traf[sec - 1, j]), fsec))
            if park[sec - 1] < config.parking_rate:
                facts.append(("parking", "k0", 1.0, fsec))
        for emission in episodes.get(t, ()):
            facts.append(emission)
        ticks[t] = facts
    if not ticks:
        return Stream.empty()
    return Stream(0, config.ticks - 1, ticks)


def _schedule_episodes(config: SyntheticConfig, rng) -> dict:
    """Map tick -> extra banded readings, one candidate episode per period."""
    emissions: dict = {}

    def emit(t, fact):
        if t < config.ticks:
            emissions.setdefault(t, []).append(fact)

    period = config.period()
    length = config.length()
    n_periods = (config.ticks + period - 1) // period
    for k in range(n_periods):
        if rng.random() >= config.anomaly_probability:
            continue
        start = k * period
        scenario = config.scenario
        if scenario == "noise":
            continue
        # Episode readings use their own measure symbols (px / tx) so the
        # exported feature matrices keep them in dedicated columns; sharing
        # a baseline metric would hide below-baseline values behind the
        # per-slot maximum.
        if scenario == "metro":
            sec = float(rng.integers(1, config.sectors + 1))
            for t in range(start, start + length + 1):
                emit(t, ("pollution", "px", POLL_HIGH, sec))
                emit(t, ("pollution", "px", POLL_LOW, sec))
                emit(t, ("traffic", "tx", TRAFF_LOW, sec))
                emit(t, ("traffic", "tx", TRAFF_HIGH, sec))
        elif scenario == "zones":
            sec = float(rng.integers(1, config.sectors + 1))
            zone = ("urban", "highway", "industrial")[rng.integers(0, 3)]
            for t in range(start, start + length + 1):
                if zone == "urban":
                    emit(t, ("pollution", "px", POLL_LOW, sec))
                    emit(t, ("traffic", "tx", TRAFF_LOW, sec))
                elif zone == "highway":
                    emit(t, ("pollution", "px", POLL_HIGH, sec))
                    emit(t, ("traffic", "tx", TRAFF_HIGH, sec))
                else:
                    emit(t, ("pollution", "px", POLL_HIGH, sec))
                    emit(t, ("traffic", "tx", TRAFF_LOW, sec))
        elif scenario == "rural":
            count = int(rng.integers(1, config.max_concurrent + 1))
            secs = rng.choice(config.sectors, size=count, replace=False) + 1
            for sec_i in secs:
                sec = float(sec_i)
                for t in range(start, start + length + 1):
                    emit(t, ("pollution", "px", POLL_LOW, sec))
                    emit(t, ("traffic", "tx", TRAFF_LOW, sec))
        elif scenario == "conflict":
            s1 = int(rng.integers(1, config.sectors + 1))
            s2 = int(rng.integers(1, config.sectors + 1))
            if s2 == s1:
                s2 = s1 % config.sectors + 1
            f1, f2 = float(s1), float(s2)
            for t in range(start, start + length + 1):
                emit(t, ("traffic", "tx", CONFLICT_TRAFF_LOW, f1))
                emit(t, ("pollution", "px", CONFLICT_POLL_LOW, f1))
                emit(t, ("traffic", "tx", CONFLICT_TRAFF_HIGH, f2))
                emit(t, ("pollution", "px", CONFLICT_POLL_HIGH, f2))
                emit(t, ("parking", "k0", 1.0, f1))
    return emissions


def _generate_alerts(config: SyntheticConfig, rng) -> Stream:
    """4-ary pollution facts pollution(type, value, sensor, sector); an
    episode pushes both pollutant types above threshold for four sensors
    in a city sector and two of its suburbs."""
    n_sens = max(config.sensors_per_sector, 4)
    cities = [c for c in CITY_SUBURBS if c <= config.sectors]
    lo, hi = 10.0, 120.0  # below the 125 threshold

    episodes: dict = {}
    period = config.period()
    length = config.length()
    n_periods = (config.ticks + period - 1) // period
    for k in range(n_periods):
        if rng.random() >= config.anomaly_probability:
            continue
        start = k * period
        city = cities[int(rng.integers(0, len(cities)))]
        suburbs = CITY_SUBURBS[city]
        pick = rng.choice(len(suburbs), size=2, replace=False)
        targets = [city, suburbs[pick[0]], suburbs[pick[1]]]
        for t in range(start, min(start + length + 1, config.ticks)):
            episodes.setdefault(t, []).extend(
                ("pollution", ptype, ALERT_POLLUTION, float(sens), float(sec))
                for sec in targets
                for sens in range(1, 5)
                for ptype in (1.0, 2.0)
            )

    ticks = {}
    for t in range(config.ticks):
        facts = []
        values = rng.uniform(lo, hi, size=(config.sectors, n_sens, 2))
        for sec in range(1, config.sectors + 1):
            fsec = float(sec)
            for sens in range(1, n_sens + 1):
                for pi, ptype in enumerate((1.0, 2.0)):
                    facts.append(
                        ("pollution", ptype, float(values[sec - 1, sens - 1, pi]), float(sens), fsec)
                    )
        facts.extend(episodes.get(t, ()))
        ticks[t] = facts
    if not ticks:
        return Stream.empty()
    return Stream(0, config.ticks - 1, ticks)
