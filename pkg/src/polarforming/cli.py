"""Command-line entry point: ``polarforming {solve,sweep,convergence,oracle-check}``.

Exit codes: 0 success, 1 oracle pass fraction not met, 2 configuration
error, 3 numerical failure, 4 oracle search above the configured cap.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .benchmarks import OracleCapExceeded, SchemeEvaluator, SchemeSpec, exhaustive_oracle
from .channel import LinkBudget, MovingRegion, load_instance, sample_instance
from .config import ConfigError, RunConfig, keys_help, load_config
from .experiments import (
    emit_csv,
    emit_plot,
    run_convergence_trace,
    run_experiment,
    trial_rng,
)

EXIT_OK = 0
EXIT_ORACLE_FRACTION = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_ORACLE_CAP = 4

log = logging.getLogger("polarforming")


def _fmt(x: float) -> str:
    return repr(float(x))


# -- subcommands -------------------------------------------------------------------

def _solve_instance(cfg: RunConfig):
    exp = cfg.experiment
    if cfg.instance_file is not None:
        try:
            return load_instance(cfg.instance_file)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"instance_file: {exc}", key="instance_file") from None
    return sample_instance(exp.channel, trial_rng(exp.master_seed, 0))


def solve_command(cfg: RunConfig, out: Path) -> int:
    scheme = SchemeSpec.parse(cfg.scheme)
    if scheme.polarization_mode == "dual_polarized":
        raise ConfigError("solve reports single-port schemes only; use sweep for DPA",
                          key="scheme")
    exp = cfg.experiment
    instance = _solve_instance(cfg)
    budget = LinkBudget.from_snr_db(exp.snr_db)
    region = MovingRegion(exp.channel.region_size)
    evaluator = SchemeEvaluator(instance, region, budget, exp.sca, exp.dpa_grid,
                                exp.warm_start, cfg.phases)
    report = evaluator(scheme).report
    if not math.isfinite(report.final_rate):
        raise FloatingPointError("non-finite rate")
    lines = [
        f"scheme {scheme.name}",
        f"num_paths {instance.num_tx_paths}",
        f"region_size {_fmt(region.size)}",
        f"snr_db {_fmt(exp.snr_db)}",
        f"tx_position {_fmt(report.tx.position[0])} {_fmt(report.tx.position[1])}",
        f"tx_phase {_fmt(report.tx.phase)}",
        f"rx_position {_fmt(report.rx.position[0])} {_fmt(report.rx.position[1])}",
        f"rx_phase {_fmt(report.rx.phase)}",
        f"rate_bps_hz {_fmt(report.final_rate)}",
        f"channel_gain {_fmt(report.gain)}",
        f"termination {report.termination}",
        f"starts {report.num_starts}",
        f"best_start {report.start_index}",
        f"outer_iterations {report.outer_iterations}",
        "trace " + " ".join(_fmt(r) for r in report.outer_trace),
    ]
    text = "\n".join(lines) + "\n"
    (out / "solve_report.txt").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def sweep_command(cfg: RunConfig, out: Path) -> int:
    exp = cfg.experiment
    if exp.sweep_axis == "convergence":
        raise ConfigError("sweep needs a sweep_axis other than convergence; "
                          "use the convergence subcommand", key="sweep_axis")
    result = run_experiment(exp)
    csv_path = emit_csv(result, out / f"sweep_{exp.sweep_axis}.csv")
    emit_plot(result, out / f"sweep_{exp.sweep_axis}.svg")
    print(csv_path.read_text(), end="")
    return EXIT_OK


def convergence_command(cfg: RunConfig, out: Path) -> int:
    exp = cfg.experiment
    if exp.sweep_axis != "convergence":
        schemes = exp.schemes if "schemes" in cfg.explicit else ("MA-PF", "MA-LPA", "MA-CPA")
        exp = replace(exp, sweep_axis="convergence", axis_values=(), schemes=schemes)
    result = run_convergence_trace(exp).as_aggregate()
    csv_path = emit_csv(result, out / "convergence.csv")
    emit_plot(result, out / "convergence.svg")
    print(csv_path.read_text(), end="")
    return EXIT_OK


def oracle_check_command(cfg: RunConfig, out: Path) -> int:
    exp, oc = cfg.experiment, cfg.oracle
    scheme = SchemeSpec.parse(cfg.scheme)
    if scheme.polarization_mode == "dual_polarized":
        raise ConfigError("the oracle covers single-port schemes only", key="scheme")
    budget = LinkBudget.from_snr_db(exp.snr_db)
    region = MovingRegion(exp.channel.region_size)
    oracle_region = region if scheme.movable else MovingRegion(0.0)
    fixed = None
    if scheme.polarization_mode in cfg.phases:
        phase = cfg.phases[scheme.polarization_mode]
        fixed = (phase, phase)

    rows = []
    for i in range(oc.instances):
        instance = sample_instance(exp.channel, trial_rng(exp.master_seed, i))
        oracle = exhaustive_oracle(instance, budget, oc.grid, oracle_region,
                                   fixed_phases=fixed, max_evaluations=oc.max_evaluations)
        evaluator = SchemeEvaluator(instance, region, budget, exp.sca, exp.dpa_grid,
                                    exp.warm_start, cfg.phases)
        rate = evaluator(scheme).rate
        gap = oracle.rate - rate
        rows.append((i, rate, oracle.rate, gap, gap <= oc.tolerance))
        log.info("instance %d: solver %.6f oracle %.6f gap %.3g", i, rate, oracle.rate, gap)

    fraction = sum(r[4] for r in rows) / len(rows)
    path = out / "oracle_check.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("instance", "solver_rate", "oracle_rate", "gap", "within_tolerance"))
        for i, rate, orate, gap, ok in rows:
            writer.writerow((i, _fmt(rate), _fmt(orate), _fmt(gap), int(ok)))
    print(f"{scheme.name}: {sum(r[4] for r in rows)}/{len(rows)} instances within "
          f"{oc.tolerance} bps/Hz (fraction {fraction:.4f}, required {oc.pass_fraction})")
    return EXIT_OK if fraction >= oc.pass_fraction else EXIT_ORACLE_FRACTION


COMMANDS = {
    "solve": (solve_command, "optimize one channel realization and write solve_report.txt"),
    "sweep": (sweep_command, "Monte Carlo sweep, writes sweep_<axis>.csv and .svg"),
    "convergence": (convergence_command, "averaged outer-iteration traces, writes convergence.csv"),
    "oracle-check": (oracle_check_command, "compare the solver against exhaustive grid search"),
}


# -- argument handling ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polarforming",
        description="Joint antenna position and polarization optimization experiments.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text, epilog=keys_help(),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=True, type=Path, help="key = value config file")
        p.add_argument("--seed", type=int, help="master seed, overrides the config")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--threads", type=int,
                       help=f"worker threads (default {os.cpu_count() or 1})")
        p.add_argument("--verbose", "-v", action="count", default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, seed=args.seed, threads=args.threads)
        args.out.mkdir(parents=True, exist_ok=True)
        command, _ = COMMANDS[args.subcommand]
        with np.errstate(invalid="raise", divide="raise", over="raise"):
            return command(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleCapExceeded as exc:
        print(f"oracle refused: {exc}", file=sys.stderr)
        return EXIT_ORACLE_CAP
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
