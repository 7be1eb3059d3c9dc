"""Solver versus exhaustive grid search on small seeded instances.

Runs the ``oracle-check`` subcommand and prints the gap distribution.

    python3 scripts/check_oracle.py --out results/
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from polarforming.cli import main as cli_main

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", type=Path, default=HERE / "configs" / "oracle_small.cfg")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()

    argv = ["oracle-check", "--config", str(args.config), "--out", str(args.out)]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    status = cli_main(argv)
    if status in (0, 1):
        with (args.out / "oracle_check.csv").open() as fh:
            gaps = np.array([float(r["gap"]) for r in csv.DictReader(fh)])
        q = np.percentile(gaps, [0, 50, 90, 100])
        print(f"gap (oracle - solver) min {q[0]:.2e} median {q[1]:.2e} p90 {q[2]:.2e} max {q[3]:.2e}")
    sys.exit(status)


if __name__ == "__main__":
    main()
