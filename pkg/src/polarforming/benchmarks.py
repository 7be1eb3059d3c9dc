"""Comparison schemes: fixed/movable position x linear/circular/dual-polarized/polarforming.

Scheme names follow ``<position>-<polarization>``, e.g. ``MA-PF`` (movable,
polarforming) or ``FPA-LPA`` (fixed position, linearly polarized).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .channel import (
    TWO_PI,
    AntennaState,
    ChannelInstance,
    LinkBudget,
    MovingRegion,
    achievable_rate,
    effective_channel,
    path_projection,
    rate_from_gain,
)
from .sca import ScaConfig, SolveReport, solve

POSITION_TAGS = {"fixed": "FPA", "movable": "MA"}
POLARIZATION_TAGS = {
    "linear": "LPA",
    "circular": "CPA",
    "dual_polarized": "DPA",
    "polarforming": "PF",
}
# (theta, phi) for the fixed-polarization benchmarks
FIXED_PHASES = {"linear": 0.0, "circular": math.pi / 2}
DEFAULT_MAX_EVALUATIONS = 10 ** 9


class OracleCapExceeded(RuntimeError):
    """The requested exhaustive search is larger than the configured cap."""


@dataclass(frozen=True)
class SchemeSpec:
    position_mode: str
    polarization_mode: str

    def __post_init__(self):
        if self.position_mode not in POSITION_TAGS:
            raise ValueError(f"unknown position mode {self.position_mode!r}")
        if self.polarization_mode not in POLARIZATION_TAGS:
            raise ValueError(f"unknown polarization mode {self.polarization_mode!r}")

    @property
    def name(self) -> str:
        return f"{POSITION_TAGS[self.position_mode]}-{POLARIZATION_TAGS[self.polarization_mode]}"

    @property
    def movable(self) -> bool:
        return self.position_mode == "movable"

    @classmethod
    def parse(cls, name: str) -> "SchemeSpec":
        pos_tag, _, pol_tag = name.strip().upper().partition("-")
        pos = {v: k for k, v in POSITION_TAGS.items()}.get(pos_tag)
        pol = {v: k for k, v in POLARIZATION_TAGS.items()}.get(pol_tag)
        if pos is None or pol is None:
            raise ValueError(f"unknown scheme {name!r}")
        return cls(pos, pol)

    def __str__(self):
        return self.name


ALL_SCHEMES = tuple(SchemeSpec(p, q) for p in POSITION_TAGS for q in POLARIZATION_TAGS)


@dataclass(frozen=True)
class GridSpec:
    points_per_axis: int = 20
    phase_points: int = 360

    def __post_init__(self):
        if self.points_per_axis < 1 or self.phase_points < 1:
            raise ValueError("grid sizes must be positive")


def lattice(region: MovingRegion, points_per_axis: int) -> np.ndarray:
    """Evenly spaced grid including the region edges, shape (n*n, 2), row-major in y."""
    if region.size == 0:
        return np.zeros((1, 2))
    if points_per_axis < 2:
        raise ValueError("need at least 2 points per axis on a region of positive size")
    axis = np.linspace(-region.half, region.half, points_per_axis)
    xx, yy = np.meshgrid(axis, axis)
    return np.column_stack([xx.ravel(), yy.ravel()])


def _with_origin(points: np.ndarray) -> np.ndarray:
    if np.any(np.all(points == 0.0, axis=1)):
        return points
    return np.vstack([points, np.zeros((1, 2))])


# -- fixed-phase and polarforming schemes ------------------------------------

def fixed_polarization_rate(scheme: SchemeSpec, instance: ChannelInstance, region: MovingRegion,
                            budget: LinkBudget, cfg: ScaConfig | None = None,
                            phases: dict[str, float] | None = None,
                            include_origin: bool = True) -> SolveReport:
    """Linear or circular polarization with phases frozen.

    Fixed position evaluates at the origin. Movable position runs the SCA
    solver with the phase coordinate pinned; the origin is added as an extra
    start so the result never falls below the fixed-position value.
    """
    if scheme.polarization_mode not in FIXED_PHASES:
        raise ValueError(f"{scheme.name} is not a fixed-polarization scheme")
    phase = (phases or FIXED_PHASES)[scheme.polarization_mode]
    origin = (AntennaState((0, 0), phase), AntennaState((0, 0), phase))
    if not scheme.movable or region.size == 0:
        h = effective_channel(*origin, instance.pprm, instance.geometry, instance.wavelength)
        rate = float(achievable_rate(h, budget))
        return SolveReport(tx=origin[0], rx=origin[1], final_rate=rate, outer_trace=(rate,),
                           termination="converged", start_index=0, gain=abs(h) ** 2)
    extra = [origin] if include_origin else []
    return solve(instance, budget, region, cfg=cfg, extra_starts=extra,
                 fixed_phases=(phase, phase))


def polarforming_rate(scheme: SchemeSpec, instance: ChannelInstance, region: MovingRegion,
                      budget: LinkBudget, cfg: ScaConfig | None = None,
                      warm_starts=()) -> SolveReport:
    """Joint position/phase optimization; fixed position uses a zero-size region."""
    if scheme.polarization_mode != "polarforming":
        raise ValueError(f"{scheme.name} is not a polarforming scheme")
    reg = region if scheme.movable else MovingRegion(0.0)
    return solve(instance, budget, reg, cfg=cfg, extra_starts=warm_starts)


# -- dual-polarized benchmark ------------------------------------------------

def dpa_channel(t, r, instance: ChannelInstance) -> np.ndarray:
    """2x2 polarized channel between the V/H ports at positions t and r."""
    return dpa_channels(np.atleast_2d(t), np.atleast_2d(r), instance)[0, 0]


def dpa_channels(tx_points: np.ndarray, rx_points: np.ndarray, instance: ChannelInstance) -> np.ndarray:
    """H for every (rx point, tx point) pair, shape (n_rx, n_tx, 2, 2)."""
    geo = instance.geometry
    k = TWO_PI / instance.wavelength
    u = np.exp(1j * k * path_projection(tx_points.T[:, :, None], geo.tx_elevation, geo.tx_azimuth))
    v = np.exp(1j * k * path_projection(rx_points.T[:, :, None], geo.rx_elevation, geo.rx_azimuth))
    lr, lt = geo.num_rx_paths, geo.num_tx_paths
    blocks = instance.pprm.reshape(lr, 2, lt, 2).transpose(0, 2, 1, 3).reshape(lr, lt * 4)
    partial = (v.conj() @ blocks).reshape(len(rx_points), lt, 4)
    h = np.einsum("rik,ti->rtk", partial, u)
    return h.reshape(len(rx_points), len(tx_points), 2, 2)


def waterfilling(mode_gains, total_power: float):
    """Water-filling over parallel modes with gains (SNR per unit power).

    Returns (powers, water_level); modes with zero gain get no power. Gains
    below the smallest normal double count as zero (their inverse overflows).
    """
    gains = np.asarray(mode_gains, dtype=float)
    powers = np.zeros_like(gains)
    active = np.flatnonzero(gains >= np.finfo(float).tiny)
    if active.size == 0:
        return powers, 0.0
    order = active[np.argsort(gains[active])[::-1]]
    inv = 1 / gains[order]
    for k in range(order.size, 1, -1):
        level = (total_power + inv[:k].sum()) / k
        if level > inv[k - 1]:
            powers[order[:k]] = level - inv[:k]
            return powers, float(level)
    # a single active mode takes the whole budget
    powers[order[0]] = total_power
    return powers, float(total_power + inv[0])


def _mode_gains(h: np.ndarray, budget: LinkBudget) -> np.ndarray:
    return np.linalg.svd(h, compute_uv=False) ** 2 / budget.noise_power


def waterfilling_rate(h: np.ndarray, budget: LinkBudget) -> float:
    gains = _mode_gains(np.asarray(h), budget)
    powers, _ = waterfilling(gains, budget.transmit_power)
    return float(np.sum(np.log2(1 + powers * gains)))


def waterfilling_rates_2x2(h: np.ndarray, budget: LinkBudget) -> np.ndarray:
    """Vectorized closed form of :func:`waterfilling_rate` for stacks of 2x2 matrices."""
    power = np.sum(np.abs(h) ** 2, axis=(-2, -1))
    det = np.abs(h[..., 0, 0] * h[..., 1, 1] - h[..., 0, 1] * h[..., 1, 0]) ** 2
    disc = np.sqrt(np.maximum(power ** 2 - 4 * det, 0.0))
    g1 = (power + disc) / 2 / budget.noise_power
    g2 = np.maximum(power - disc, 0.0) / 2 / budget.noise_power
    p = budget.transmit_power
    with np.errstate(divide="ignore", invalid="ignore"):
        both = (g2 > 0) & (p > 1 / np.where(g2 > 0, g2, 1) - 1 / np.where(g1 > 0, g1, 1))
        level = (p + 1 / g1 + 1 / g2) / 2
        two_mode = np.log2(level * g1) + np.log2(level * g2)
    one_mode = np.log2(1 + p * g1)
    return np.where(both, two_mode, one_mode)


def dpa_grid_search(instance: ChannelInstance, region: MovingRegion, budget: LinkBudget,
                    grid: GridSpec = GridSpec()) -> float:
    """Best water-filling rate over tx-lattice x rx-lattice position pairs.

    The origin is added to both lattices so the movable result is never
    below the fixed-position one.
    """
    pts = _with_origin(lattice(region, grid.points_per_axis))
    h = dpa_channels(pts, pts, instance)
    return float(np.max(waterfilling_rates_2x2(h, budget)))


# -- brute-force oracle ------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    rate: float
    gain: float
    tx: AntennaState
    rx: AntennaState
    evaluations: int


def exhaustive_oracle(instance: ChannelInstance, budget: LinkBudget, grid: GridSpec,
                      tx_region: MovingRegion, rx_region: MovingRegion | None = None,
                      fixed_phases: tuple[float, float] | None = None,
                      max_evaluations: int = DEFAULT_MAX_EVALUATIONS) -> OracleResult:
    """Max rate over position lattices and phase lattices 2*pi*k/phase_points.

    The evaluation count is tx points x rx points x theta points; for each
    theta the phi lattice is maximized exactly (nearest lattice point to the
    aligning phase). Pairs are pruned with |h|^2 <= (sum |H_ij|)^2 / 2,
    which never changes the result.
    """
    rx_region = tx_region if rx_region is None else rx_region
    t_pts = lattice(tx_region, grid.points_per_axis)
    r_pts = lattice(rx_region, grid.points_per_axis)
    n_theta = 1 if fixed_phases is not None else grid.phase_points
    evaluations = len(t_pts) * len(r_pts) * n_theta
    if evaluations > max_evaluations:
        raise OracleCapExceeded(f"{evaluations} evaluations exceed the cap of {max_evaluations}")
    h = dpa_channels(t_pts, r_pts, instance)

    if fixed_phases is not None:
        theta, phi = fixed_phases
        p = np.array([1, np.exp(1j * theta)]) / math.sqrt(2)
        q = np.array([1, np.exp(1j * phi)])
        gains = np.abs(np.einsum("a,rtab,b->rt", q.conj(), h, p)) ** 2
        ri, ti = np.unravel_index(np.argmax(gains), gains.shape)
        best, tx_phase, rx_phase = float(gains[ri, ti]), theta, phi
    else:
        hflat = np.ascontiguousarray(h.reshape(-1, 4))
        upper = 0.5 * np.sum(np.abs(hflat), axis=1) ** 2
        order = np.argsort(-upper, kind="stable")
        phasors = np.exp(1j * TWO_PI * np.arange(grid.phase_points) / grid.phase_points)
        best, k, it, m = _kernels.oracle_search(hflat, order, upper, phasors, grid.phase_points)
        ri, ti = divmod(int(k), len(t_pts))
        tx_phase = TWO_PI * it / grid.phase_points
        rx_phase = TWO_PI * m / grid.phase_points
    return OracleResult(
        rate=float(rate_from_gain(best, budget)),
        gain=float(best),
        tx=AntennaState(tuple(t_pts[ti]), tx_phase),
        rx=AntennaState(tuple(r_pts[ri]), rx_phase),
        evaluations=evaluations,
    )


# -- per-realization scheme evaluation ---------------------------------------

@dataclass(frozen=True)
class SchemeOutcome:
    rate: float
    report: SolveReport | None = None


class SchemeEvaluator:
    """Evaluates schemes on one realization, sharing solutions between them.

    With ``warm_start`` the movable polarforming solver is also started from
    the movable linear/circular solutions and the fixed-position polarforming
    solution, and fixed-position polarforming from the circular phases, so
    every containment ordering holds per realization.
    """

    def __init__(self, instance: ChannelInstance, region: MovingRegion, budget: LinkBudget,
                 cfg: ScaConfig | None = None, grid: GridSpec = GridSpec(),
                 warm_start: bool = True, phases: dict[str, float] | None = None):
        self.instance = instance
        self.region = region
        self.budget = budget
        self.cfg = cfg or ScaConfig()
        self.grid = grid
        self.warm_start = warm_start
        self.phases = phases or FIXED_PHASES
        self._cache: dict[str, SchemeOutcome] = {}

    def __call__(self, scheme) -> SchemeOutcome:
        if isinstance(scheme, str):
            scheme = SchemeSpec.parse(scheme)
        if scheme.name not in self._cache:
            self._cache[scheme.name] = self._evaluate(scheme)
        return self._cache[scheme.name]

    def _state_pair(self, report: SolveReport):
        return (report.tx, report.rx)

    def _evaluate(self, scheme: SchemeSpec) -> SchemeOutcome:
        mode = scheme.polarization_mode
        if mode in FIXED_PHASES:
            report = fixed_polarization_rate(scheme, self.instance, self.region, self.budget,
                                             self.cfg, self.phases, include_origin=self.warm_start)
            return SchemeOutcome(report.final_rate, report)
        if mode == "dual_polarized":
            region = self.region if scheme.movable else MovingRegion(0.0)
            return SchemeOutcome(dpa_grid_search(self.instance, region, self.budget, self.grid))
        warm = []
        if self.warm_start:
            pos = scheme.position_mode
            if scheme.movable:
                for pol in ("linear", "circular"):
                    warm.append(self._state_pair(self(SchemeSpec(pos, pol)).report))
                warm.append(self._state_pair(self(SchemeSpec("fixed", "polarforming")).report))
            else:
                # the default start is the origin with zero phases, i.e. linear
                c = self.phases["circular"]
                warm.append((AntennaState((0, 0), c), AntennaState((0, 0), c)))
        report = polarforming_rate(scheme, self.instance, self.region, self.budget, self.cfg, warm)
        return SchemeOutcome(report.final_rate, report)


def evaluate_schemes(schemes, instance: ChannelInstance, region: MovingRegion, budget: LinkBudget,
                     cfg: ScaConfig | None = None, grid: GridSpec = GridSpec(),
                     warm_start: bool = True) -> dict[str, SchemeOutcome]:
    evaluator = SchemeEvaluator(instance, region, budget, cfg, grid, warm_start)
    out = {}
    for s in schemes:
        spec = SchemeSpec.parse(s) if isinstance(s, str) else s
        out[spec.name] = evaluator(spec)
    return out
