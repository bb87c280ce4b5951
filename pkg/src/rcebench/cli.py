"""``bench`` command line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""
from __future__ import annotations

import argparse
import sys

from .bench import BenchConfig, ConfigError, render_table, report_csv, run_benchmark, write_csv
from .data import DataError
from .model import ModelError, TrainConfig

EXIT_CONFIG = 2
EXIT_DATA = 3


def _int_list(s):
    return tuple(int(v) for v in s.split(",") if v.strip())


def _name_list(s):
    return tuple(v.strip() for v in s.split(",") if v.strip())


def _synthetic(spec):
    kind, _, rest = spec.partition(":")
    if kind != "blobs":
        raise argparse.ArgumentTypeError(f"unknown synthetic generator {kind!r} (only 'blobs')")
    try:
        n, dim, sep = rest.split(",")
        return int(n), int(dim), float(sep)
    except ValueError:
        raise argparse.ArgumentTypeError("expected blobs:<n>,<dim>,<sep>") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bench", description="Benchmark counterfactual generators.")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="CSV file with a header row")
    src.add_argument("--synthetic", type=_synthetic, help="blobs:<n_per_class>,<dim>,<separation>")
    p.add_argument("--label", default="target", help="label column name (default: target)")
    p.add_argument("--preprocess", choices=["minmax", "standardize", "none"], default="minmax")
    p.add_argument("--layers", type=_int_list, help="e.g. 34,8,1 (default: <features>,8,1)")
    p.add_argument("--model", help="load a model file instead of training")
    p.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    p.add_argument("--lr", type=float, default=TrainConfig.learning_rate)
    p.add_argument("--batch-size", type=int, default=TrainConfig.batch_size)
    p.add_argument("--methods", type=_name_list, required=True)
    p.add_argument("--evaluations", type=_name_list, default=("validity", "proximity", "delta-robustness"))
    p.add_argument("--neg-value", type=int, default=0)
    p.add_argument("--delta", type=float, default=0.005)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", choices=["table", "csv"], default="table")
    p.add_argument("--out-path", help="write output here instead of stdout")
    p.add_argument("--detail-path", help="per-instance CSV (with --out csv)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = BenchConfig(
            methods=args.methods, evaluations=args.evaluations, data_path=args.data,
            synthetic=args.synthetic, label=args.label, preprocess=args.preprocess,
            layers=args.layers, model_path=args.model,
            train=TrainConfig(args.lr, args.epochs, args.batch_size),
            neg_value=args.neg_value, delta=args.delta, seed=args.seed, out=args.out,
            workers=args.workers,
        )
    except (ConfigError, ModelError) as e:
        print(f"bench: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run_benchmark(cfg)
    except ConfigError as e:
        print(f"bench: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ModelError, OSError) as e:
        print(f"bench: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    if cfg.out == "csv":
        if args.out_path:
            write_csv(report, args.out_path, args.detail_path)
        else:
            sys.stdout.write(report_csv(report))
    else:
        text = render_table(report)
        if args.out_path:
            with open(args.out_path, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
            print(f"{report.metadata['instance_count']} negative instances, delta={cfg.delta}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
