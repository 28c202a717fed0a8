"""Run every Monte Carlo experiment at its default size and write reports to one directory.

    python scripts/run_experiments.py --out results --workers 4
"""
import argparse
import sys

from planarlab.cli import EXPERIMENTS, main


def run(out: str, workers: int, seed: int, only: list[str]) -> int:
    worst = 0
    for name in only or EXPERIMENTS:
        code = main(["experiment", name, "--out", out, "--workers", str(workers),
                     "--seed", str(seed)])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--out", default="results")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("names", nargs="*", help=f"subset of {sorted(EXPERIMENTS)}")
    a = p.parse_args()
    sys.exit(run(a.out, a.workers, a.seed, a.names))
