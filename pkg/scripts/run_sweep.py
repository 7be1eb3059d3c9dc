"""Monte Carlo rate sweeps; one CSV and one SVG per config.

    python3 scripts/run_sweep.py                      # every sweep config in configs/
    python3 scripts/run_sweep.py configs/snr.cfg --trials 100
"""

import argparse
import logging
import time
from dataclasses import replace
from pathlib import Path

from polarforming.config import load_config
from polarforming.experiments import emit_csv, emit_plot, run_experiment

HERE = Path(__file__).resolve().parent
SWEEPS = ("snr", "num_paths", "region_size", "rician")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("configs", nargs="*", type=Path)
    ap.add_argument("--trials", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args.out.mkdir(parents=True, exist_ok=True)

    paths = args.configs or [HERE / "configs" / f"{name}.cfg" for name in SWEEPS]
    for path in paths:
        cfg = load_config(path, seed=args.seed, threads=args.threads).experiment
        if args.trials:
            cfg = replace(cfg, trials=args.trials)
        start = time.perf_counter()
        result = run_experiment(cfg)
        stem = f"sweep_{cfg.sweep_axis}"
        emit_csv(result, args.out / f"{stem}.csv")
        emit_plot(result, args.out / f"{stem}.svg")
        print(f"{path.name}: {cfg.trials} trials in {time.perf_counter() - start:.1f} s")
        header = "".join(f"{s:>10s}" for s in result.schemes)
        print(f"{'axis':>8s}{header}")
        for v in result.axis_values:
            print(f"{v:>8g}" + "".join(f"{result.mean(v, s):10.4f}" for s in result.schemes))


if __name__ == "__main__":
    main()
