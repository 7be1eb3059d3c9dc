"""Flat ``key = value`` run configuration.

One setting per line, ``#`` starts a comment, lists are comma-separated.
Numbers may carry a unit suffix where the key allows one::

    sweep_axis   = snr
    axis_values  = -5, 0, 5, 10, 15 dB
    region_size  = 1.0 lambda
    rician       = 0 dB
    schemes      = MA-PF, MA-LPA, FPA-PF

Lengths accept ``lambda`` (multiples of the wavelength) or ``m``; a bare
number is in meters. Power ratios accept ``dB`` only and default to it.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .benchmarks import DEFAULT_MAX_EVALUATIONS, FIXED_PHASES, GridSpec, SchemeSpec
from .channel import ChannelSpec
from .experiments import SWEEP_AXES, ConfigError, ExperimentConfig
from .sca import CURVATURE_MODES, ORDERS, PHASE_MODES, START_PHASES, ScaConfig

__all__ = ["ConfigError", "KEYS", "OracleCheckConfig", "RunConfig", "build_config", "keys_help",
           "load_config", "parse_config"]


@dataclass(frozen=True)
class Key:
    kind: str
    help: str
    choices: tuple = ()


KEYS: dict[str, Key] = {
    # experiment
    "sweep_axis": Key("choice", "swept quantity", SWEEP_AXES),
    "axis_values": Key("axis", "sorted sweep values; dB for snr/rician_db, lambda or m for region_size"),
    "schemes": Key("schemes", "scheme names such as MA-PF, FPA-LPA, MA-DPA"),
    "trials": Key("int", "Monte Carlo trials per axis value"),
    "seed": Key("int", "master seed (overridden by --seed)"),
    "warm_start": Key("bool", "share solutions between schemes of one realization"),
    "threads": Key("int", "worker threads (overridden by --threads)"),
    # channel
    "snr": Key("db", "transmit SNR P/sigma^2 when not swept [dB]"),
    "num_paths": Key("int", "paths per link end L"),
    "wavelength": Key("length", "carrier wavelength [m]"),
    "region_size": Key("length", "side of the square moving region [lambda or m]"),
    "rician": Key("db", "Rician factor kappa [dB]"),
    "inverse_xpd": Key("float", "inverse cross-polarization discrimination chi in [0, 1]"),
    # solver
    "rate_tolerance": Key("float", "outer stop: rate increase below this [bps/Hz]"),
    "surrogate_tolerance": Key("float", "inner stop: gain increase below this"),
    "max_outer_iterations": Key("int", "outer iteration cap T_max"),
    "max_inner_iterations": Key("int", "inner iteration cap I_max"),
    "num_starts": Key("int", "lattice starts (default 4*ceil(A/lambda)^2)"),
    "order": Key("choice", "which end is updated first in each outer iteration", ORDERS),
    "curvature": Key("choice", "step curvature: adaptive backtracking or the global bound",
                     CURVATURE_MODES),
    "curvature_floor": Key("float", "smallest curvature tried, as a fraction of the bound"),
    "phase_handling": Key("choice", "phase coordinate: wrap modulo 2*pi or clamp to [0, 2*pi]",
                          PHASE_MODES),
    "start_phases": Key("choice", "lattice start phases: best grid pair at the start "
                        "positions, spread over [0, 2*pi), or all zero", START_PHASES),
    "start_phase_points": Key("int", "phase grid size for aligned starts"),
    "linear_phase": Key("float", "phase used by linearly polarized schemes [rad]"),
    "circular_phase": Key("float", "phase used by circularly polarized schemes [rad]"),
    # dual-polarized grid search
    "dpa_points_per_axis": Key("int", "grid points per axis for dual-polarized position search"),
    # solve
    "scheme": Key("scheme", "scheme used by solve and oracle-check"),
    "instance_file": Key("path", "channel CSV for solve; sampled from the seed when absent"),
    # oracle-check
    "oracle_instances": Key("int", "number of seeded instances"),
    "oracle_points_per_axis": Key("int", "oracle position lattice points per axis"),
    "oracle_phase_points": Key("int", "oracle phase lattice points"),
    "oracle_tolerance": Key("float", "allowed shortfall of the solver versus the oracle [bps/Hz]"),
    "pass_fraction": Key("float", "fraction of instances that must be within tolerance"),
    "max_evaluations": Key("float", "refuse oracle searches larger than this"),
}


def keys_help() -> str:
    width = max(map(len, KEYS))
    lines = ["config keys:"]
    for name, key in KEYS.items():
        extra = f" {{{', '.join(key.choices)}}}" if key.choices else ""
        lines.append(f"  {name:<{width}}  {key.help}{extra}")
    return "\n".join(lines)


@dataclass(frozen=True)
class OracleCheckConfig:
    instances: int = 100
    grid: GridSpec = field(default_factory=lambda: GridSpec(26, 360))
    tolerance: float = 0.01
    pass_fraction: float = 0.9
    max_evaluations: int = DEFAULT_MAX_EVALUATIONS


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI subcommand needs; ``explicit`` lists keys set in the file."""

    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    scheme: str = "MA-PF"
    phases: dict = field(default_factory=lambda: dict(FIXED_PHASES))
    instance_file: Path | None = None
    oracle: OracleCheckConfig = field(default_factory=OracleCheckConfig)
    explicit: frozenset = frozenset()


# -- value parsing -------------------------------------------------------------

_NUM_UNIT = re.compile(r"^\s*([-+0-9.eE]+|[-+]?inf|nan)\s*([A-Za-z]*)\s*$")
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _number(text: str) -> tuple[float, str]:
    m = _NUM_UNIT.match(text)
    if not m:
        raise ValueError(f"expected a number, got {text!r}")
    value = float(m.group(1))
    if not math.isfinite(value):
        raise ValueError(f"non-finite number {text!r}")
    return value, m.group(2).lower()


def _int(text: str) -> int:
    value, unit = _number(text)
    if unit or value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _db(text: str) -> float:
    value, unit = _number(text)
    if unit not in ("", "db"):
        raise ValueError(f"unit {unit!r} not allowed, use dB")
    return value


def _length(text: str) -> tuple[float, str]:
    value, unit = _number(text)
    unit = unit or "m"
    if unit not in ("m", "lambda"):
        raise ValueError(f"unit {unit!r} not allowed, use lambda or m")
    return value, unit


def _split(text: str) -> list[str]:
    """Comma list of numbers; a unit on the last item applies to all bare items."""
    items = [s.strip() for s in text.split(",")]
    if any(not s for s in items):
        raise ValueError("empty list item")
    parsed = [_number(s) for s in items]
    unit = parsed[-1][1]
    return [(v, u or unit) for v, u in parsed]


def _convert(key: Key, text: str):
    kind = key.kind
    if kind == "int":
        return _int(text)
    if kind == "float":
        value, unit = _number(text)
        if unit:
            raise ValueError(f"unexpected unit {unit!r}")
        return value
    if kind == "db":
        return _db(text)
    if kind == "length":
        return _length(text)
    if kind == "bool":
        low = text.strip().lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"expected true/false, got {text!r}")
    if kind == "choice":
        if text not in key.choices:
            raise ValueError(f"expected one of {', '.join(key.choices)}")
        return text
    if kind == "axis":
        return _split(text)
    if kind == "schemes":
        return [s.strip() for s in text.split(",") if s.strip()]
    if kind in ("scheme", "path"):
        return text
    raise AssertionError(kind)


def parse_config(text: str, source: str = "<config>") -> dict:
    """Raw ``key -> (value, line)`` map; unknown keys and bad values raise ConfigError."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'", line=lineno)
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}", line=lineno, key=key)
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}", line=lineno, key=key)
        if not value:
            raise ConfigError(f"{source}:{lineno}: empty value for {key!r}", line=lineno, key=key)
        try:
            raw[key] = (_convert(KEYS[key], value), lineno)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: {key}: {exc}", line=lineno, key=key) from None
    return raw


# -- assembling dataclasses ------------------------------------------------------

def _axis_values(axis: str, items, wavelength: float) -> tuple:
    out = []
    for value, unit in items:
        if axis == "region_size":
            if unit not in ("", "lambda", "m"):
                raise ValueError(f"unit {unit!r} not allowed for region_size")
            out.append(value / wavelength if unit == "m" else value)
        elif axis in ("snr", "rician_db"):
            if unit not in ("", "db"):
                raise ValueError(f"unit {unit!r} not allowed, use dB")
            out.append(value)
        elif axis == "num_paths":
            if unit or value != int(value):
                raise ValueError("num_paths values must be integers")
            out.append(int(value))
        else:
            if unit:
                raise ValueError(f"unexpected unit {unit!r}")
            out.append(value)
    return tuple(out)


def build_config(raw: dict, source: str = "<config>") -> RunConfig:
    get = {k: v for k, (v, _) in raw.items()}
    current = None

    def fail(key, exc):
        line = raw[key][1] if key in raw else None
        where = f"{source}:{line}: " if line else f"{source}: "
        return ConfigError(f"{where}{key}: {exc}", line=line, key=key)

    try:
        current = "wavelength"
        wl = get["wavelength"][0] if "wavelength" in get else 1.0
        if "wavelength" in get and get["wavelength"][1] != "m":
            raise ValueError("wavelength must be given in m")
        current = "region_size"
        region = 1.0 * wl
        if "region_size" in get:
            value, unit = get["region_size"]
            region = value * wl if unit == "lambda" else value
        current = ("num_paths", "inverse_xpd", "rician", "region_size", "wavelength")
        channel = ChannelSpec(
            wavelength=wl,
            num_paths=get.get("num_paths", 6),
            inverse_xpd=get.get("inverse_xpd", 1.0),
            rician_factor_db=get.get("rician", 0.0),
            region_size=region,
        )
        sca_fields = ("rate_tolerance", "surrogate_tolerance", "max_outer_iterations",
                      "max_inner_iterations", "num_starts", "order", "curvature",
                      "curvature_floor", "phase_handling", "start_phases",
                      "start_phase_points")
        current = sca_fields
        sca = ScaConfig(**{k: get[k] for k in sca_fields if k in get})
        current = "dpa_points_per_axis"
        dpa = GridSpec(points_per_axis=get.get("dpa_points_per_axis", 20))
        current = "axis_values"
        axis = get.get("sweep_axis", "snr")
        values = _axis_values(axis, get["axis_values"], wl) if "axis_values" in get else (
            () if axis == "convergence" else (get.get("snr", 5.0),) if axis == "snr" else None)
        if values is None:
            raise ValueError(f"axis_values is required for sweep_axis = {axis}")
        current = "schemes"
        exp_kwargs = dict(sweep_axis=axis, axis_values=values, channel=channel,
                          snr_db=get.get("snr", 5.0), trials=get.get("trials", 500),
                          master_seed=get.get("seed", 0), sca=sca, dpa_grid=dpa,
                          warm_start=get.get("warm_start", True), threads=get.get("threads"))
        if "schemes" in get:
            exp_kwargs["schemes"] = tuple(get["schemes"])
        elif axis == "convergence":
            exp_kwargs["schemes"] = ("MA-PF", "MA-LPA", "MA-CPA")
        experiment = ExperimentConfig(**exp_kwargs)
        current = "scheme"
        scheme = SchemeSpec.parse(get.get("scheme", "MA-PF")).name
        current = "oracle"
        oracle = OracleCheckConfig(
            instances=get.get("oracle_instances", 100),
            grid=GridSpec(get.get("oracle_points_per_axis", 26), get.get("oracle_phase_points", 360)),
            tolerance=get.get("oracle_tolerance", 0.01),
            pass_fraction=get.get("pass_fraction", 0.9),
            max_evaluations=int(get.get("max_evaluations", DEFAULT_MAX_EVALUATIONS)),
        )
        if oracle.instances < 1:
            raise ValueError("oracle_instances must be >= 1")
        if experiment.threads is not None and experiment.threads < 1:
            current = "threads"
            raise ValueError("threads must be >= 1")
    except ConfigError as exc:
        if exc.key is not None:
            raise
        raise fail(_guess_key(str(exc), current, raw), exc) from None
    except ValueError as exc:
        raise fail(_guess_key(str(exc), current, raw), exc) from None
    phases = {"linear": get.get("linear_phase", FIXED_PHASES["linear"]),
              "circular": get.get("circular_phase", FIXED_PHASES["circular"])}
    instance_file = Path(get["instance_file"]) if "instance_file" in get else None
    return RunConfig(experiment, scheme, phases, instance_file, oracle, frozenset(raw))


def _guess_key(message: str, current, raw: dict) -> str:
    """Best key to blame: one named in the message, else a set key of the group being built."""
    for key in sorted(raw, key=len, reverse=True):
        if key in message:
            return key
    if isinstance(current, str):
        return current
    return next((k for k in current if k in raw), current[0])


def load_config(path, seed: int | None = None, threads: int | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    cfg = build_config(parse_config(text, str(path)), str(path))
    exp = cfg.experiment
    if seed is not None:
        if seed < 0:
            raise ConfigError("--seed must be non-negative", key="seed")
        exp = replace(exp, master_seed=seed)
    if threads is not None:
        if threads < 1:
            raise ConfigError("--threads must be >= 1", key="threads")
        exp = replace(exp, threads=threads)
    return replace(cfg, experiment=exp)
