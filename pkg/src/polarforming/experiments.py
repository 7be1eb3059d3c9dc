"""Seeded Monte Carlo sweeps over SNR, path count, region size and Rician factor.

Trial ``i`` draws its channel from ``SeedSequence(master_seed, spawn_key=(i,))``
regardless of the axis value, so every axis value and every scheme sees the
same realizations (paired comparison).
"""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .benchmarks import GridSpec, SchemeEvaluator, SchemeSpec
from .channel import ChannelSpec, LinkBudget, MovingRegion, sample_instance
from .sca import ScaConfig

log = logging.getLogger(__name__)

SWEEP_AXES = ("snr", "num_paths", "region_size", "rician_db", "convergence")
AXIS_LABELS = {
    "snr": "SNR (dB)",
    "num_paths": "Number of paths L",
    "region_size": "Normalized region size A / wavelength",
    "rician_db": "Rician factor (dB)",
    "convergence": "Outer iteration",
}


class ConfigError(ValueError):
    """Invalid configuration; ``line`` and ``key`` locate the offending entry when known."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        super().__init__(message)
        self.line = line
        self.key = key


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep. ``channel.region_size`` is in wavelengths x ``channel.wavelength``."""

    sweep_axis: str = "snr"
    axis_values: tuple = (5.0,)
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    snr_db: float = 5.0
    schemes: tuple[str, ...] = ("MA-PF", "MA-LPA", "MA-CPA", "FPA-PF", "FPA-LPA", "FPA-CPA")
    trials: int = 500
    master_seed: int = 0
    sca: ScaConfig = field(default_factory=ScaConfig)
    dpa_grid: GridSpec = field(default_factory=GridSpec)
    warm_start: bool = True
    threads: int | None = None

    def __post_init__(self):
        if self.sweep_axis not in SWEEP_AXES:
            raise ConfigError(f"sweep_axis must be one of {SWEEP_AXES}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        try:
            specs = tuple(SchemeSpec.parse(s) if isinstance(s, str) else s for s in self.schemes)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        object.__setattr__(self, "schemes", tuple(s.name for s in specs))
        if len(set(self.schemes)) != len(self.schemes):
            raise ConfigError("duplicate scheme")
        values = tuple(self.axis_values)
        object.__setattr__(self, "axis_values", values)
        if self.sweep_axis == "convergence":
            if any(s.polarization_mode == "dual_polarized" for s in specs):
                raise ConfigError("dual-polarized schemes have no iteration trace")
            return
        if not values:
            raise ConfigError("axis_values must be non-empty")
        if list(values) != sorted(values):
            raise ConfigError("axis_values must be sorted")
        if self.sweep_axis == "num_paths" and any(int(v) != v or v < 1 for v in values):
            raise ConfigError("num_paths values must be positive integers")
        if self.sweep_axis == "region_size" and any(v < 0 for v in values):
            raise ConfigError("region sizes must be >= 0")

    def point(self, value) -> tuple[ChannelSpec, LinkBudget]:
        """Channel spec and link budget at one axis value."""
        spec, snr_db = self.channel, self.snr_db
        if self.sweep_axis == "snr":
            snr_db = float(value)
        elif self.sweep_axis == "num_paths":
            spec = replace(spec, num_paths=int(value))
        elif self.sweep_axis == "region_size":
            spec = replace(spec, region_size=float(value) * spec.wavelength)
        elif self.sweep_axis == "rician_db":
            spec = replace(spec, rician_factor_db=float(value))
        return spec, LinkBudget.from_snr_db(snr_db)


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    """Independent stream for one trial: spawn key ``(trial,)`` under the master seed."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(trial,)))


@dataclass(frozen=True)
class AggregateResult:
    """Per-trial rates with shape (axis values, schemes, trials)."""

    axis: str
    axis_values: tuple
    schemes: tuple[str, ...]
    rates: np.ndarray

    def _index(self, value, scheme) -> tuple[int, int]:
        return self.axis_values.index(value), self.schemes.index(scheme)

    @property
    def trials(self) -> int:
        return self.rates.shape[2]

    def samples(self, value, scheme) -> np.ndarray:
        i, j = self._index(value, scheme)
        return self.rates[i, j]

    def mean(self, value, scheme) -> float:
        return float(np.mean(self.samples(value, scheme)))

    def stderr(self, value, scheme) -> float:
        x = self.samples(value, scheme)
        if x.size < 2:
            return 0.0
        return float(np.std(x, ddof=1) / np.sqrt(x.size))

    def rows(self):
        for value in self.axis_values:
            for scheme in self.schemes:
                yield value, scheme, self.mean(value, scheme), self.stderr(value, scheme), self.trials


def _run_trials(fn, trials: int, threads: int | None):
    workers = threads or os.cpu_count() or 1
    if workers == 1 or trials == 1:
        return [fn(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(trials)))


def run_experiment(cfg: ExperimentConfig) -> AggregateResult:
    if cfg.sweep_axis == "convergence":
        raise ConfigError("use run_convergence_trace for the convergence axis")
    points = [cfg.point(v) for v in cfg.axis_values]

    def one_trial(trial: int) -> np.ndarray:
        out = np.empty((len(points), len(cfg.schemes)))
        for i, (spec, budget) in enumerate(points):
            instance = sample_instance(spec, trial_rng(cfg.master_seed, trial))
            evaluator = SchemeEvaluator(instance, MovingRegion(spec.region_size), budget,
                                        cfg.sca, cfg.dpa_grid, cfg.warm_start)
            for j, scheme in enumerate(cfg.schemes):
                out[i, j] = evaluator(scheme).rate
        return out

    per_trial = _run_trials(one_trial, cfg.trials, cfg.threads)
    rates = np.stack(per_trial, axis=-1)
    log.info("finished %d trials over %d axis values", cfg.trials, len(points))
    return AggregateResult(cfg.sweep_axis, tuple(cfg.axis_values), tuple(cfg.schemes), rates)


@dataclass(frozen=True)
class ConvergenceResult:
    """Outer-iteration rate traces, shape (schemes, trials, T_max + 1), padded."""

    schemes: tuple[str, ...]
    traces: np.ndarray

    @property
    def iterations(self) -> np.ndarray:
        return np.arange(self.traces.shape[2])

    def mean_trace(self, scheme) -> np.ndarray:
        return self.traces[self.schemes.index(scheme)].mean(axis=0)

    def as_aggregate(self) -> AggregateResult:
        """Iteration index as the axis, for CSV and plotting."""
        rates = self.traces.transpose(2, 0, 1)
        return AggregateResult("convergence", tuple(int(i) for i in self.iterations),
                               self.schemes, rates)


def pad_trace(trace, length: int) -> np.ndarray:
    trace = np.asarray(trace, dtype=float)
    return np.concatenate([trace, np.full(length - trace.size, trace[-1])])


def run_convergence_trace(cfg: ExperimentConfig) -> ConvergenceResult:
    """Outer-iteration rate traces per scheme (lattice starts only, no warm starts)."""
    if cfg.sweep_axis != "convergence":
        raise ConfigError("convergence traces need sweep_axis = convergence")
    spec, budget = cfg.channel, LinkBudget.from_snr_db(cfg.snr_db)
    length = cfg.sca.max_outer_iterations + 1

    def one_trial(trial: int) -> np.ndarray:
        instance = sample_instance(spec, trial_rng(cfg.master_seed, trial))
        evaluator = SchemeEvaluator(instance, MovingRegion(spec.region_size), budget,
                                    cfg.sca, cfg.dpa_grid, warm_start=False)
        return np.stack([pad_trace(evaluator(s).report.outer_trace, length) for s in cfg.schemes])

    per_trial = _run_trials(one_trial, cfg.trials, cfg.threads)
    return ConvergenceResult(tuple(cfg.schemes), np.stack(per_trial, axis=1))


# -- output ------------------------------------------------------------------

CSV_HEADER = ("axis", "scheme", "mean_rate_bps_hz", "stderr", "trials")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def emit_csv(result: AggregateResult, path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for value, scheme, mean, se, n in result.rows():
                writer.writerow([_fmt(value), scheme, _fmt(mean), _fmt(se), n])
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return [
            {"axis": float(r["axis"]), "scheme": r["scheme"],
             "mean_rate_bps_hz": float(r["mean_rate_bps_hz"]),
             "stderr": float(r["stderr"]), "trials": int(r["trials"])}
            for r in csv.DictReader(fh)
        ]


_MARKERS = {"PF": "o", "LPA": "s", "CPA": "^", "DPA": "D"}


def emit_plot(result: AggregateResult, path) -> Path:
    """SVG line plot, one line per scheme in configured order."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if not result.axis_values or not result.schemes:
        raise ValueError("nothing to plot")
    path = Path(path)
    with matplotlib.rc_context({"svg.hashsalt": "polarforming", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 4))
        x = np.asarray(result.axis_values, dtype=float)
        for scheme in result.schemes:
            y = [result.mean(v, scheme) for v in result.axis_values]
            pol = scheme.split("-", 1)[1]
            style = "-" if scheme.startswith("MA") else "--"
            ax.plot(x, y, style, marker=_MARKERS.get(pol, "o"), label=scheme)
        ax.set_xlabel(AXIS_LABELS.get(result.axis, result.axis))
        ax.set_ylabel("Achievable rate (bps/Hz)")
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise OSError(f"cannot write plot to {path}: {exc}") from exc
        finally:
            plt.close(fig)
    return path
