"""Averaged outer-iteration traces of the alternating solver.

    python3 scripts/run_convergence.py --trials 200 --out results/
"""

import argparse
import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from polarforming.config import load_config
from polarforming.experiments import emit_csv, emit_plot, run_convergence_trace

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", type=Path, default=HERE / "configs" / "convergence.cfg")
    ap.add_argument("--trials", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = load_config(args.config, seed=args.seed, threads=args.threads).experiment
    if args.trials:
        cfg = replace(cfg, trials=args.trials)
    result = run_convergence_trace(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    agg = result.as_aggregate()
    emit_csv(agg, args.out / "convergence.csv")
    emit_plot(agg, args.out / "convergence.svg")

    t_max = result.traces.shape[2] - 1
    for scheme in result.schemes:
        mean = result.mean_trace(scheme)
        print(f"{scheme:8s} it0 {mean[0]:.4f}  it6 {mean[min(6, t_max)]:.4f}  "
              f"it{t_max} {mean[-1]:.4f}  ratio6 {mean[min(6, t_max)] / mean[-1]:.5f}")
        monotone = np.all(np.diff(result.traces[result.schemes.index(scheme)], axis=1) >= -1e-12)
        print(f"         every trace non-decreasing: {bool(monotone)}")


if __name__ == "__main__":
    main()
