"""Command-line front end.

Subcommands:

* ``run``    -- evaluate a program over a stream, one NDJSON line per tick
* ``bench``  -- compare naive vs incremental per-tick latency
* ``export`` -- produce a labeled ML dataset from a (program, stream) pair
* ``check``  -- equivalence-fuzz the two engines over the shipped queries

Exit codes: 0 success, 1 usage/parse/ingestion error, 2 engine mismatch.
The STREAMRULES_THREADS environment variable sets the worker count for
``check`` (default 1).
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
import time
from pathlib import Path

from . import catalog
from .datasets import TaskKind, build_dataset, export_dataset, make_labels
from .incremental import (
    answers_at,
    check_equivalence,
    init_state,
    push_tick,
)
from .model import Program, Stream, atom_sort_key
from .naive import EvalStats, evaluate_tick_naive, new_history
from .parser import ParseError, parse_program
from .streamio import load_csv, read_sensor_meta, read_stream, write_stream
from .synth import SyntheticConfig, generate_synthetic


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_stream_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--stream", help="NDJSON stream file")
    p.add_argument("--csv", nargs="+", help="sensor reading CSV files")
    p.add_argument("--meta", help="sensor table CSV (with --csv)")
    p.add_argument("--tick-minutes", type=int, default=5)
    p.add_argument("--four-ary", action="store_true", help="4-ary pollution facts")
    p.add_argument("--synthetic", help="synthetic stream config JSON")


def _load_stream(args) -> Stream:
    sources = [bool(args.stream), bool(args.csv), bool(args.synthetic)]
    if sum(sources) != 1:
        raise SystemExit(_fail("exactly one of --stream/--csv/--synthetic required"))
    if args.stream:
        return read_stream(args.stream)
    if args.csv:
        if not args.meta:
            raise SystemExit(_fail("--csv needs --meta"))
        meta = read_sensor_meta(args.meta)
        return load_csv(args.csv, meta, args.tick_minutes, four_ary=args.four_ary)
    return generate_synthetic(SyntheticConfig.from_json(args.synthetic))


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _load_program(path: str) -> Program:
    p = Path(path)
    if not p.exists():
        raise SystemExit(_fail(f"program file not found: {path}"))
    return parse_program(p.read_text())


def _atom_json(atom) -> list:
    return list(atom)


def cmd_run(args) -> int:
    program = _load_program(args.program)
    stream = _load_stream(args)
    outputs = set(args.outputs.split(",")) if args.outputs else program.head_predicates()
    unknown = outputs - set(program.predicates)
    if unknown:
        return _fail(f"output predicates not in program: {sorted(unknown)}")
    out_fh = open(args.report, "w") if args.report else sys.stdout
    try:
        if args.engine in ("naive", "incremental"):
            for line in _run_single(program, stream, outputs, args.engine):
                out_fh.write(line + "\n")
            return 0
        # both: evaluate in lockstep and verify per-tick equality
        history = new_history()
        state = init_state(program)
        for t in stream.times():
            t0 = time.perf_counter()
            naive_result = evaluate_tick_naive(program, stream, history, t)
            inc_result = push_tick(state, t, stream.at(t))
            micros = (time.perf_counter() - t0) * 1e6
            if naive_result != inc_result:
                print(f"engine mismatch at t={t}", file=sys.stderr)
                print(f"  naive: {naive_result}", file=sys.stderr)
                print(f"  incremental: {inc_result}", file=sys.stderr)
                return 2
            answers = sorted(answers_at(state, outputs), key=atom_sort_key)
            out_fh.write(
                json.dumps(
                    {
                        "t": t,
                        "answers": [_atom_json(a) for a in answers],
                        "latency_us": round(micros, 1),
                    }
                )
                + "\n"
            )
        return 0
    finally:
        if args.report:
            out_fh.close()


def _run_single(program, stream, outputs, engine):
    if engine == "incremental":
        state = init_state(program)
        for t in stream.times():
            t0 = time.perf_counter()
            push_tick(state, t, stream.at(t))
            answers = sorted(answers_at(state, outputs), key=atom_sort_key)
            micros = (time.perf_counter() - t0) * 1e6
            yield json.dumps(
                {"t": t, "answers": [_atom_json(a) for a in answers],
                 "latency_us": round(micros, 1)}
            )
    else:
        history = new_history()
        for t in stream.times():
            t0 = time.perf_counter()
            evaluate_tick_naive(program, stream, history, t)
            visible = set(stream.at(t)) | set(history.at(t))
            answers = sorted(
                (a for a in visible if a[0] in outputs), key=atom_sort_key
            )
            micros = (time.perf_counter() - t0) * 1e6
            yield json.dumps(
                {"t": t, "answers": [_atom_json(a) for a in answers],
                 "latency_us": round(micros, 1)}
            )


def _latency_stats(samples) -> dict:
    if not samples:
        return {"ticks": 0}
    ordered = sorted(samples)
    p99 = ordered[min(len(ordered) - 1, int(len(ordered) * 0.99))]
    return {
        "ticks": len(samples),
        "mean_us": round(statistics.fmean(samples), 1),
        "median_us": round(statistics.median(samples), 1),
        "p99_us": round(p99, 1),
    }


def bench_engines(program, stream, warmup: int = 0) -> dict:
    """Per-tick latency for both engines; the first `warmup` ticks are
    excluded from the statistics."""
    naive_lat = []
    history = new_history()
    naive_stats = EvalStats()
    for i, t in enumerate(stream.times()):
        t0 = time.perf_counter()
        evaluate_tick_naive(program, stream, history, t, naive_stats)
        if i >= warmup:
            naive_lat.append((time.perf_counter() - t0) * 1e6)
    inc_lat = []
    state = init_state(program)
    for i, t in enumerate(stream.times()):
        t0 = time.perf_counter()
        push_tick(state, t, stream.at(t))
        if i >= warmup:
            inc_lat.append((time.perf_counter() - t0) * 1e6)
    report = {
        "warmup_ticks": warmup,
        "naive": _latency_stats(naive_lat),
        "incremental": _latency_stats(inc_lat),
        "rules_fired": {
            "naive": naive_stats.rules_fired,
            "incremental": state.stats.rules_fired,
        },
    }
    if naive_lat and inc_lat:
        naive_mean = statistics.fmean(naive_lat)
        inc_mean = statistics.fmean(inc_lat)
        report["speedup"] = round(naive_mean / inc_mean, 3) if inc_mean else None
    return report


def cmd_bench(args) -> int:
    program = _load_program(args.program)
    stream = _load_stream(args)
    report = bench_engines(program, stream, args.warmup)
    text = json.dumps(report, indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)
    return 0


_TASKS = ("boolean", "multilabel", "multiclass", "count")


def cmd_export(args) -> int:
    program = _load_program(args.program)
    stream = _load_stream(args)
    outputs = set(args.outputs.split(","))
    unknown = outputs - set(program.predicates)
    if unknown:
        return _fail(f"output predicates not in program: {sorted(unknown)}")
    universe = (
        [float(v) for v in args.universe.split(",")] if args.universe else None
    )
    if args.task == "boolean":
        task = TaskKind.boolean()
    elif args.task == "count":
        task = TaskKind.count()
    elif args.task == "multilabel":
        size = len(universe) if universe else 10
        task = TaskKind.multilabel(size)
    else:
        if not args.classes:
            return _fail("multiclass task needs --classes")
        task = TaskKind.multiclass(args.classes.split(","))
    dataset = build_dataset(
        program,
        stream,
        outputs,
        task,
        args.window,
        universe=universe,
        train_frac=args.train_frac,
        val_frac=args.val_frac,
        engine=args.engine,
    )
    export_dataset(dataset, args.out, args.format)
    hist: dict = {}
    for label in dataset.labels:
        key = (
            repr(float(label))
            if dataset.labels.ndim == 1
            else repr([float(v) for v in label])
        )
        hist[key] = hist.get(key, 0) + 1
    top = sorted(hist.items(), key=lambda kv: -kv[1])[:8]
    counts = dataset.counts()
    print(
        f"samples={len(dataset.splits)} train={counts['train']} "
        f"val={counts['val']} test={counts['test']} columns={dataset.schema.n}"
    )
    print("label histogram: " + ", ".join(f"{k}: {v}" for k, v in top))
    return 0


def cmd_check(args) -> int:
    names = catalog.QUERY_NAMES if args.queries == "all" else tuple(
        args.queries.split(",")
    )
    for name in names:
        if name not in catalog.QUERIES:
            return _fail(f"unknown query {name!r} (have {', '.join(catalog.QUERY_NAMES)})")
    jobs = []
    for name in names:
        for i in range(args.streams):
            jobs.append((name, args.seed + i))
    threads = int(os.environ.get("STREAMRULES_THREADS", "1") or "1")
    mismatches = []
    runner = _CheckJob(args.ticks, args.sectors, args.sensors)
    if threads > 1:
        import multiprocessing

        with multiprocessing.Pool(threads) as pool:
            for result in pool.imap_unordered(runner, jobs):
                if result:
                    mismatches.append(result)
    else:
        for job in jobs:
            result = runner(job)
            if result:
                mismatches.append(result)
    print(
        f"checked {len(jobs)} (query, stream) pairs: "
        f"{len(mismatches)} mismatch(es)"
    )
    for m in mismatches[:10]:
        print(m)
    return 2 if mismatches else 0


class _CheckJob:
    """Picklable equivalence-check worker for one (query, seed) pair."""

    def __init__(self, ticks: int, sectors: int, sensors: int):
        self.ticks = ticks
        self.sectors = sectors
        self.sensors = sensors

    def __call__(self, job):
        name, seed = job
        program = catalog.load_program(name)
        config = catalog.load_config(
            name,
            seed=seed,
            ticks=self.ticks,
            sectors=self.sectors,
            sensors_per_sector=max(
                self.sensors, 4 if catalog.QUERIES[name].universe == "cities" else 1
            ),
        )
        stream = generate_synthetic(config)
        diffs = check_equivalence(
            program, stream, outputs=set(catalog.QUERIES[name].outputs)
        )
        if diffs:
            return f"{name} seed={seed}: " + diffs[0]
        return None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="streamrules", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="evaluate a program over a stream")
    p_run.add_argument("--program", required=True)
    p_run.add_argument("--outputs", help="comma-separated output predicates")
    p_run.add_argument(
        "--engine", choices=("naive", "incremental", "both"), default="incremental"
    )
    p_run.add_argument("--report", help="write NDJSON here instead of stdout")
    _add_stream_args(p_run)

    p_bench = sub.add_parser("bench", help="naive vs incremental latency")
    p_bench.add_argument("--program", required=True)
    p_bench.add_argument("--warmup", type=int, default=100)
    p_bench.add_argument("--output", help="write the JSON report here")
    _add_stream_args(p_bench)

    p_exp = sub.add_parser("export", help="export a labeled dataset")
    p_exp.add_argument("--program", required=True)
    p_exp.add_argument("--outputs", required=True)
    p_exp.add_argument("--task", choices=_TASKS, required=True)
    p_exp.add_argument("--window", type=int, required=True)
    p_exp.add_argument("--train-frac", type=float, default=0.8)
    p_exp.add_argument("--val-frac", type=float, default=0.2)
    p_exp.add_argument("--format", choices=("ndjson", "csv"), default="ndjson")
    p_exp.add_argument("--out", required=True)
    p_exp.add_argument("--universe", help="comma-separated entity list")
    p_exp.add_argument("--classes", help="multiclass predicates, low to high priority")
    p_exp.add_argument(
        "--engine", choices=("naive", "incremental"), default="incremental"
    )
    _add_stream_args(p_exp)

    p_chk = sub.add_parser("check", help="fuzz naive vs incremental equivalence")
    p_chk.add_argument("--queries", default="all")
    p_chk.add_argument("--streams", type=int, default=20)
    p_chk.add_argument("--ticks", type=int, default=50)
    p_chk.add_argument("--sectors", type=int, default=10)
    p_chk.add_argument("--sensors", type=int, default=3)
    p_chk.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "bench":
            return cmd_bench(args)
        if args.command == "export":
            return cmd_export(args)
        return cmd_check(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
