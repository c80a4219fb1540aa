"""Stream ingestion and interchange: sensor CSVs, NDJSON stream files,
and background-knowledge fact files.

The canonical interchange format is NDJSON with one object per tick::

    {"t": 4, "facts": [["pollution", "p0", 120.0, 3.0], ...]}

Sensor CSVs carry one reading per row (columns ``timestamp`` (ISO-8601),
``sensor``, ``value`` and optionally ``type``); rows are bucketed into
ticks of a fixed number of minutes counted from the earliest timestamp.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Optional

from .model import Atom, Program, Rule, Stream, is_ground
from .parser import parse_program


@dataclass(frozen=True)
class SensorMeta:
    """One sensor: its kind decides the fact predicate, its sector the
    last fact argument.  `numeric_id` is a stable per-table index used
    where sensor identity must be a number (4-ary pollution facts)."""

    sensor_id: str
    kind: str  # pollution | traffic | parking | weather
    sector: int
    numeric_id: int = 0


@dataclass
class IngestReport:
    rows_read: int = 0
    rows_skipped_unknown: int = 0
    rows_superseded: int = 0
    facts: int = 0

    def accepted(self) -> int:
        return self.rows_read - self.rows_skipped_unknown - self.rows_superseded


def assign_sectors(positions: list, k: int) -> dict:
    """Partition sensors into k sectors by a grid over the bounding box of
    their coordinates (rows x cols with rows*cols == k, numbered row-major
    starting at 1).  Points exactly on an interior boundary go to the
    lower-numbered cell.  `positions` is a list of (id, lat, lon)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not positions:
        return {}
    rows = 1
    for d in range(int(math.isqrt(k)), 0, -1):
        if k % d == 0:
            rows = d
            break
    cols = k // rows
    lats = [p[1] for p in positions]
    lons = [p[2] for p in positions]
    lat_lo, lat_hi = min(lats), max(lats)
    lon_lo, lon_hi = min(lons), max(lons)

    def cell(value, lo, hi, n):
        if n == 1 or hi == lo:
            return 0
        frac = (value - lo) / (hi - lo) * n
        idx = int(frac)
        if idx > 0 and frac == idx:
            idx -= 1  # boundary tie: lower cell
        return min(idx, n - 1)

    out = {}
    for sid, lat, lon in positions:
        r = cell(lat, lat_lo, lat_hi, rows)
        c = cell(lon, lon_lo, lon_hi, cols)
        out[sid] = r * cols + c + 1
    return out


def read_sensor_meta(path, sectors: Optional[int] = None) -> dict:
    """Load a sensor table CSV with columns id, kind, lat, lon and an
    optional sector column; missing sectors are assigned geographically
    (requires `sectors`)."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append(row)
    have_sector = rows and rows[0].get("sector") not in (None, "")
    if not have_sector:
        if sectors is None:
            raise ValueError("sensor table has no sector column; pass sectors=k")
        assignment = assign_sectors(
            [(r["id"], float(r["lat"]), float(r["lon"])) for r in rows], sectors
        )
    out = {}
    for i, r in enumerate(sorted(rows, key=lambda r: r["id"])):
        sector = int(r["sector"]) if have_sector else assignment[r["id"]]
        out[r["id"]] = SensorMeta(r["id"], r["kind"], sector, numeric_id=i + 1)
    return out


def load_csv(
    paths: Iterable,
    meta: dict,
    tick_minutes: int = 5,
    four_ary: bool = False,
    report: Optional[IngestReport] = None,
) -> Stream:
    """Bucket reading rows into ticks of `tick_minutes` and build a stream.

    Each accepted row yields one fact: kind(sensor, value, sector), or
    pollution(type, value, sensor_number, sector) with `four_ary`.  When a
    sensor reports twice for the same tick (and type), the reading with
    the latest timestamp wins.  Unknown sensors are skipped and counted.
    """
    if report is None:
        report = IngestReport()
    rows = []
    for path in paths:
        with open(path, newline="") as fh:
            for line_no, row in enumerate(csv.DictReader(fh), start=2):
                report.rows_read += 1
                sid = row.get("sensor", "")
                if sid not in meta:
                    report.rows_skipped_unknown += 1
                    continue
                try:
                    ts = datetime.fromisoformat(row["timestamp"])
                except (KeyError, ValueError) as exc:
                    raise ValueError(
                        f"{path}:{line_no}: bad timestamp {row.get('timestamp')!r}"
                    ) from exc
                value = float(row["value"])
                ptype = float(row["type"]) if four_ary and row.get("type") else None
                rows.append((ts, sid, value, ptype))
    if not rows:
        return Stream.empty()
    t0 = min(r[0] for r in rows)
    span = tick_minutes * 60
    latest: dict = {}  # (tick, sensor, type) -> (ts, fact)
    tmax = 0
    for ts, sid, value, ptype in rows:
        tick = int((ts - t0).total_seconds() // span)
        tmax = max(tmax, tick)
        m = meta[sid]
        if four_ary:
            fact = (m.kind, ptype or 0.0, value, float(m.numeric_id), float(m.sector))
            key = (tick, sid, ptype)
        else:
            fact = (m.kind, sid, value, float(m.sector))
            key = (tick, sid)
        prev = latest.get(key)
        if prev is None or ts >= prev[0]:
            if prev is not None:
                report.rows_superseded += 1
            latest[key] = (ts, tick, fact)
        else:
            report.rows_superseded += 1
    ticks: dict = {}
    for _, tick, fact in latest.values():
        ticks.setdefault(tick, set()).add(fact)
    report.facts = sum(len(v) for v in ticks.values())
    return Stream(0, tmax, ticks)


def write_stream(stream: Stream, path) -> None:
    """Write the NDJSON interchange form, one line per tick (empty ticks
    included, so the timeline round-trips)."""
    with open(path, "w") as fh:
        for t in stream.times():
            facts = sorted(stream.at(t))
            fh.write(json.dumps({"t": t, "facts": [list(a) for a in facts]}))
            fh.write("\n")


def _json_term(x):
    if isinstance(x, bool):
        raise ValueError(f"boolean {x} is not a stream term")
    if isinstance(x, (int, float)):
        return float(x)
    if isinstance(x, str):
        return x
    raise ValueError(f"bad term in stream file: {x!r}")


def read_stream(path) -> Stream:
    """Read the NDJSON interchange form."""
    ticks: dict = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                t = obj["t"]
                facts = obj["facts"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no}: bad stream line") from exc
            if not isinstance(t, int):
                raise ValueError(f"{path}:{line_no}: tick must be an integer")
            ticks[t] = {
                (str(f[0]),) + tuple(_json_term(x) for x in f[1:]) for f in facts
            }
    if not ticks:
        return Stream.empty()
    return Stream(min(ticks), max(ticks), ticks)


def load_background(path) -> list:
    """Load a background-knowledge file: facts only, in rule syntax.
    Returns the fact rules, ready to be merged into a query program."""
    program = parse_program(Path(path).read_text())
    for rule in program.rules:
        if not rule.is_fact():
            raise ValueError(
                f"background file {path} contains a non-fact rule "
                f"for {rule.head_pred()!r}"
            )
    return program.rules


def merge_background(program: Program, facts: list) -> Program:
    """A new program with background facts prepended."""
    merged = list(facts) + list(program.rules)
    return Program(merged)
