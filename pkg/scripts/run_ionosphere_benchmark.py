"""Benchmark six generators on ionosphere and print the comparison table.

Usage: python scripts/run_ionosphere_benchmark.py [--data data/ionosphere.csv] [--workers 4] [--csv out.csv]
"""
import argparse
import os
import time

from rcebench.bench import BenchConfig, render_table, run_benchmark, write_csv

HERE = os.path.dirname(os.path.abspath(__file__))
METHODS = ("kdtree-nnce", "mce", "mcer", "rnce", "stce", "proplace")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--data", default=os.path.join(HERE, "..", "data", "ionosphere.csv"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta", type=float, default=0.005)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--csv", help="also write the report (and a .detail.csv) here")
    args = p.parse_args()

    cfg = BenchConfig(methods=METHODS, evaluations=("validity", "proximity", "delta-robustness"),
                      data_path=args.data, preprocess="minmax", layers=(34, 8, 1), delta=args.delta,
                      seed=args.seed, workers=args.workers)
    t0 = time.perf_counter()
    report = run_benchmark(cfg)
    print(render_table(report))
    print(f"{report.metadata['instance_count']} negative instances, delta={args.delta}, "
          f"total {time.perf_counter() - t0:.0f}s")
    if args.csv:
        write_csv(report, args.csv, os.path.splitext(args.csv)[0] + ".detail.csv")


if __name__ == "__main__":
    main()
