"""Command line: train a surrogate on an exported dataset file.

    surrogate-bench train --dataset q1.ndjson --query q1 --family cnn \
        --out report.json --curves curves.png

The dataset file (plus its .meta.json sidecar) comes from the stream
engine's `export` command.
"""

from __future__ import annotations

import argparse
import sys

from .arch import ARCHS, ConfigurationError
from .data import load_dataset
from .train import measure_latency, save_curves, train, train_per_sector


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="surrogate-bench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("train", help="train one architecture on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--query", required=True, choices=sorted({q for q, _ in ARCHS}))
    p.add_argument("--family", required=True, choices=("lstm", "cnn"))
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-sector", action="store_true")
    p.add_argument("--latency-repeats", type=int, default=200)
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--curves", help="write loss/metric curves PNG here")
    p.add_argument("--verbose", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        bundle = load_dataset(args.dataset)
        if args.per_sector:
            reports, aggregate = train_per_sector(
                args.query, args.family, bundle,
                epochs=args.epochs, seed=args.seed, verbose=args.verbose,
            )
            print(f"mean test {reports[0].test_metric_name} over "
                  f"{len(reports)} sectors: {aggregate:.4f}")
            if args.out:
                import json

                from dataclasses import asdict

                with open(args.out, "w") as fh:
                    json.dump(
                        {"aggregate": aggregate, "reports": [asdict(r) for r in reports]},
                        fh,
                        indent=2,
                    )
            return 0
        model, report = train(
            args.query, args.family, bundle,
            epochs=args.epochs, seed=args.seed, verbose=args.verbose,
        )
        x_test, _ = bundle.split("test")
        if len(x_test):
            lat = measure_latency(model, x_test, repeats=args.latency_repeats)
            report.latency_us_median = round(lat["median_us"], 1)
            report.latency_us_p99 = round(lat["p99_us"], 1)
        print(
            f"{args.query} {args.family}: test {report.test_metric_name}="
            f"{report.test_metric:.4f} loss={report.test_loss:.4f} "
            f"({report.wall_clock_s:.0f}s, "
            f"median latency {report.latency_us_median} us)"
        )
        if args.out:
            report.to_json(args.out)
        if args.curves:
            save_curves(report, args.curves)
        return 0
    except (ConfigurationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
