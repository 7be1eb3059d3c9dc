"""Alternating successive convex approximation over (position, phase) per link end.

With the opposite end fixed, the channel gain of one end is a Hermitian form
in its unit-modulus element vector. Expanding that form gives a sum of
cosines in the element phases; a quadratic minorizer with curvature ``delta``
then has a box-constrained maximizer in closed form (a clamp).

Points are 3-vectors ``(x, y, phase)``. ``side="rx"`` works with
B = L f f^H L^H; ``side="tx"`` with D = L^H g g^H L, where the transmit
element amplitude 1/sqrt(2) enters as a factor 1/2 on D.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .channel import (
    TWO_PI,
    AntennaState,
    ChannelInstance,
    DimensionError,
    LinkBudget,
    MovingRegion,
    PathGeometry,
    Side,
    field_response,
)

ORDERS = ("rx_first", "tx_first")
CURVATURE_MODES = ("adaptive", "bound")
PHASE_MODES = ("wrap", "clamp")
START_PHASES = ("aligned", "spread", "zero")


@dataclass(frozen=True)
class ScaConfig:
    """Stopping rules and step control for the solver.

    ``num_starts=None`` means 4*ceil(A/wavelength)^2 lattice starts.
    ``curvature="adaptive"`` backtracks from ``curvature_floor*delta`` up to
    the global bound; ``"bound"`` always steps with the global bound.
    ``start_phases="aligned"`` gives each lattice start the best phase pair on
    a ``start_phase_points`` grid at its positions; ``"spread"`` uses
    2*pi*k/count on both ends for start k; ``"zero"`` starts every phase at 0.
    """

    rate_tolerance: float = 1e-6
    surrogate_tolerance: float = 1e-6
    max_outer_iterations: int = 20
    max_inner_iterations: int = 800
    num_starts: int | None = None
    order: str = "rx_first"
    curvature: str = "adaptive"
    curvature_floor: float = 1 / 64
    phase_handling: str = "wrap"
    start_phases: str = "aligned"
    start_phase_points: int = 32

    def __post_init__(self):
        if not (self.rate_tolerance > 0 and self.surrogate_tolerance > 0):
            raise ValueError("tolerances must be positive")
        if self.max_outer_iterations < 1 or self.max_inner_iterations < 1:
            raise ValueError("iteration limits must be >= 1")
        if self.num_starts is not None and self.num_starts < 1:
            raise ValueError("num_starts must be >= 1")
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}")
        if self.curvature not in CURVATURE_MODES:
            raise ValueError(f"curvature must be one of {CURVATURE_MODES}")
        if not 0 < self.curvature_floor <= 1:
            raise ValueError("curvature_floor must lie in (0, 1]")
        if self.phase_handling not in PHASE_MODES:
            raise ValueError(f"phase_handling must be one of {PHASE_MODES}")
        if self.start_phases not in START_PHASES:
            raise ValueError(f"start_phases must be one of {START_PHASES}")
        if self.start_phase_points < 1:
            raise ValueError("start_phase_points must be >= 1")


@dataclass(frozen=True)
class SolveReport:
    tx: AntennaState
    rx: AntennaState
    final_rate: float
    outer_trace: tuple[float, ...]
    termination: str
    start_index: int
    inner_steps: int = 0  # summed over all starts
    gain: float = 0.0
    num_starts: int = 1
    start_rates: tuple[float, ...] = field(default=(), repr=False)

    @property
    def outer_iterations(self) -> int:
        return len(self.outer_trace) - 1


# -- element and pair bookkeeping --------------------------------------------

def _amp2(side: Side) -> float:
    if side == "tx":
        return 0.5
    if side == "rx":
        return 1.0
    raise ValueError(f"unknown side {side!r}")


def _as_point(point) -> np.ndarray:
    if isinstance(point, AntennaState):
        return point.as_array()
    pt = np.asarray(point, dtype=float)
    if pt.shape != (3,):
        raise DimensionError("an augmented point is (x, y, phase)")
    return pt


def element_coefficients(side: Side, geometry: PathGeometry, wavelength: float):
    """Per-element phase slopes (kx, ky, ke); V and H of a path share kx, ky."""
    elevation, azimuth = geometry.angles(side)
    k = TWO_PI / wavelength
    kx = np.repeat(k * np.cos(elevation) * np.sin(azimuth), 2)
    ky = np.repeat(k * np.sin(elevation), 2)
    ke = np.tile([0.0, 1.0], elevation.size)
    return kx, ky, ke


def pair_indices(n: int):
    pi, qi = np.triu_indices(n, 1)
    return pi.astype(np.int64), qi.astype(np.int64)


def pair_coefficients(side: Side, geometry: PathGeometry, wavelength: float):
    """(p, q, c_pq, d_pq, upsilon_pq) over all element pairs p < q."""
    kx, ky, ke = element_coefficients(side, geometry, wavelength)
    pi, qi = pair_indices(kx.size)
    return pi, qi, kx[qi] - kx[pi], ky[qi] - ky[pi], ke[qi] - ke[pi]


def element_phases(point, geometry: PathGeometry, wavelength: float, side: Side = "rx") -> np.ndarray:
    pt = _as_point(point)
    kx, ky, ke = element_coefficients(side, geometry, wavelength)
    return kx * pt[0] + ky * pt[1] + ke * pt[2]


def element_phase(point, element_index: int, geometry: PathGeometry, wavelength: float,
                  side: Side = "rx") -> float:
    """Phase of element ``element_index`` (1-based; odd = V, even = H + phase)."""
    phases = element_phases(point, geometry, wavelength, side)
    if not 1 <= element_index <= phases.size:
        raise IndexError(f"element index {element_index} outside 1..{phases.size}")
    return float(phases[element_index - 1])


# -- the per-side objective ---------------------------------------------------

def build_quadratic_form(pprm: np.ndarray, fixed_side_steering: np.ndarray, side: Side) -> np.ndarray:
    """B = L f f^H L^H for the receive side, D = L^H g g^H L for the transmit side."""
    pprm = np.asarray(pprm)
    vec = np.asarray(fixed_side_steering)
    if side == "rx":
        if vec.shape != (pprm.shape[1],):
            raise DimensionError(f"transmit steering must have length {pprm.shape[1]}")
        b = pprm @ vec
    elif side == "tx":
        if vec.shape != (pprm.shape[0],):
            raise DimensionError(f"receive steering must have length {pprm.shape[0]}")
        b = pprm.conj().T @ vec
    else:
        raise ValueError(f"unknown side {side!r}")
    return np.outer(b, b.conj())


def _pair_view(Q, side, geometry, wavelength, point):
    Q = np.asarray(Q)
    pi, qi, c, d, ups = pair_coefficients(side, geometry, wavelength)
    if Q.shape != (2 * geometry.angles(side)[0].size,) * 2:
        raise DimensionError(f"form of shape {Q.shape} does not match {side} geometry")
    amp2 = _amp2(side)
    omega = element_phases(point, geometry, wavelength, side)
    qpq = Q[pi, qi]
    varpi = omega[qi] - omega[pi] + np.angle(qpq)
    return amp2, np.abs(qpq), varpi, c, d, ups


def gain_expansion(Q, point, geometry: PathGeometry, wavelength: float, side: Side = "rx") -> float:
    """sum_p Q_pp + 2 sum_{p<q} |Q_pq| cos(varpi_pq), scaled by the element power."""
    amp2, mag, varpi, *_ = _pair_view(Q, side, geometry, wavelength, point)
    diag = np.real(np.trace(Q))
    return float(amp2 * (diag + 2 * np.sum(mag * np.cos(varpi))))


def gradient(Q, point, geometry: PathGeometry, wavelength: float, side: Side = "rx") -> np.ndarray:
    """Partial derivatives of the gain with respect to (x, y, phase)."""
    amp2, mag, varpi, c, d, ups = _pair_view(Q, side, geometry, wavelength, point)
    s = mag * np.sin(varpi)
    return -2 * amp2 * np.array([c @ s, d @ s, ups @ s])


def _offdiag_sum(Q) -> float:
    Q = np.asarray(Q)
    return float(np.abs(Q[np.triu_indices(Q.shape[0], 1)]).sum())


def curvature_factor(wavelength: float) -> float:
    """Multiplier on sum_{p<q} |Q_pq| that bounds the Hessian spectrum.

    Each pair contributes 2|Q_pq| a a^T with a = (c_pq, d_pq, upsilon_pq).
    Direction cosines (cos(el)sin(az), sin(el)) lie in the unit disk, so
    c_pq^2 + d_pq^2 <= (4 pi / wavelength)^2, and upsilon_pq^2 <= 1.
    """
    return 2 * (1 + 16 * math.pi ** 2 / wavelength ** 2)


def curvature_bound(Q, wavelength: float, side: Side = "rx") -> float:
    """delta with delta*I above the Hessian of the gain everywhere."""
    return curvature_factor(wavelength) * _amp2(side) * _offdiag_sum(Q)


def frobenius_curvature_bound(Q, wavelength: float, side: Side = "rx") -> float:
    """sqrt(1 + 64 pi^4/wl^4 + 16 pi^2/wl^2) * sum |Q_pq|.

    Smaller than :func:`curvature_bound` by roughly 4x and not a valid
    Hessian bound in general; kept for comparison.
    """
    factor = math.sqrt(1 + 64 * math.pi ** 4 / wavelength ** 4 + 16 * math.pi ** 2 / wavelength ** 2)
    return factor * _amp2(side) * _offdiag_sum(Q)


def surrogate(Q, expansion_point, point, geometry: PathGeometry, wavelength: float,
              side: Side = "rx", delta: float | None = None) -> float:
    """Quadratic minorizer of the gain built at ``expansion_point``."""
    x0 = _as_point(expansion_point)
    x = _as_point(point)
    if delta is None:
        delta = curvature_bound(Q, wavelength, side)
    dx = x - x0
    return (gain_expansion(Q, x0, geometry, wavelength, side)
            + gradient(Q, x0, geometry, wavelength, side) @ dx
            - 0.5 * delta * dx @ dx)


def surrogate_step(point, grad, delta: float, lower, upper, wrap_phase: bool = False) -> np.ndarray:
    """Maximizer of the separable quadratic surrogate over the box.

    The Hessian is -delta*I, so the box QP decouples and its solution is the
    clamp of ``point + grad/delta``. With ``wrap_phase`` the phase is left
    unconstrained and reduced mod 2*pi (the gain is 2*pi-periodic in it).
    """
    pt = _as_point(point)
    d = max(float(delta), _kernels.DELTA_MIN)
    new = pt + np.asarray(grad, dtype=float) / d
    clamped = np.clip(new, lower, upper)
    if wrap_phase:
        clamped[2] = np.mod(new[2], TWO_PI)
    return clamped


def side_bounds(region: MovingRegion, fixed_phase: float | None = None,
                phase_handling: str = "wrap"):
    """Box (lo, hi) for (x, y, phase) and whether the phase wraps."""
    h = region.half
    if fixed_phase is None:
        lo = np.array([-h, -h, 0.0])
        hi = np.array([h, h, TWO_PI])
        return lo, hi, phase_handling == "wrap"
    return np.array([-h, -h, fixed_phase]), np.array([h, h, fixed_phase]), False


def _step_params(cfg: ScaConfig, wavelength: float):
    floor = cfg.curvature_floor if cfg.curvature == "adaptive" else 1.0
    return curvature_factor(wavelength), floor


def sca_inner_loop(side: Side, state, Q, geometry: PathGeometry, wavelength: float,
                   region: MovingRegion, cfg: ScaConfig | None = None,
                   fixed_phase: float | None = None):
    """Run the surrogate ascent for one side with the other side frozen in ``Q``.

    Returns the final point and the gain after every step (entry 0 is the
    starting gain).
    """
    cfg = cfg or ScaConfig()
    pt = _as_point(state).copy()
    Q = np.asarray(Q, dtype=complex)
    pi, qi, c, d, ups = pair_coefficients(side, geometry, wavelength)
    if Q.shape != (kx_len := 2 * geometry.angles(side)[0].size, kx_len):
        raise DimensionError(f"form of shape {Q.shape} does not match {side} geometry")
    amp2 = _amp2(side)
    kx, ky, ke = element_coefficients(side, geometry, wavelength)
    bpair = amp2 * Q[pi, qi]
    diag = amp2 * float(np.real(np.trace(Q)))
    lo, hi, wrap = side_bounds(region, fixed_phase, cfg.phase_handling)
    if fixed_phase is not None:
        pt[2] = fixed_phase
    factor, floor = _step_params(cfg, wavelength)
    delta = factor * float(np.abs(bpair).sum())
    trace = np.empty(cfg.max_inner_iterations + 1)
    iters, _ = _kernels.inner_ascent(bpair, pi, qi, c, d, ups, diag, kx, ky, ke,
                                     pt, lo, hi, wrap, delta, floor,
                                     cfg.max_inner_iterations, cfg.surrogate_tolerance, trace)
    return pt, trace[:iters + 1].copy()


# -- multi-start orchestration ------------------------------------------------

def default_num_starts(region_size: float, wavelength: float) -> int:
    cells = math.ceil(region_size / wavelength - 1e-12)
    return max(1, 4 * cells ** 2)


def starting_lattice(region: MovingRegion, count: int) -> list[tuple[float, float]]:
    """``count`` cell-centre points of an m x m lattice, m = ceil(sqrt(count)), row-major."""
    m = math.isqrt(count - 1) + 1 if count > 1 else 1
    axis = -region.half + region.size * (np.arange(m) + 0.5) / m
    pts = [(float(x), float(y)) for y in axis for x in axis]
    return pts[:count]


def _canonical(pt: np.ndarray) -> AntennaState:
    phase = float(np.mod(pt[2], TWO_PI))
    return AntennaState((pt[0], pt[1]), phase)


def aligned_phases(instance: ChannelInstance, tx_position, rx_position,
                   points: int = 32) -> tuple[float, float]:
    """Best (theta, phi) on the lattice 2*pi*k/points with both positions held."""
    geo, wl = instance.geometry, instance.wavelength
    eye = np.eye(2)
    ft = np.kron(field_response(tx_position, "tx", geo, wl)[:, None], eye)
    fr = np.kron(field_response(rx_position, "rx", geo, wl)[:, None], eye)
    M = fr.conj().T @ instance.pprm @ ft
    phases = TWO_PI * np.arange(points) / points
    vecs = np.stack([np.ones(points), np.exp(1j * phases)])
    gains = np.abs(vecs.conj().T @ M @ vecs) ** 2      # rows phi, columns theta
    i, j = np.unravel_index(np.argmax(gains), gains.shape)
    return float(phases[j]), float(phases[i])


def solve(instance: ChannelInstance, budget: LinkBudget, tx_region: MovingRegion,
          rx_region: MovingRegion | None = None, cfg: ScaConfig | None = None,
          initial: tuple[AntennaState, AntennaState] | None = None,
          extra_starts=(), fixed_phases: tuple[float, float] | None = None) -> SolveReport:
    """Maximize the rate over positions and phases of both ends.

    Without ``initial`` the starts are a lattice over each region (start k
    uses lattice point k on both ends, phases per ``cfg.start_phases``) followed by
    ``extra_starts``; the best final rate wins, ties going to the earlier
    start. ``fixed_phases=(theta, phi)`` freezes both phases.
    """
    cfg = cfg or ScaConfig()
    rx_region = tx_region if rx_region is None else rx_region
    geometry = instance.geometry
    wl = instance.wavelength

    if initial is not None:
        starts = [tuple(initial)]
    else:
        count = cfg.num_starts or default_num_starts(max(tx_region.size, rx_region.size), wl)
        t_pts = starting_lattice(tx_region, count)
        r_pts = starting_lattice(rx_region, count)
        starts = []
        for k, (t, r) in enumerate(zip(t_pts, r_pts)):
            if cfg.start_phases == "aligned":
                theta, phi = aligned_phases(instance, t, r, cfg.start_phase_points)
            else:
                theta = phi = TWO_PI * k / count if cfg.start_phases == "spread" else 0.0
            starts.append((AntennaState(t, theta), AntennaState(r, phi)))
    starts += [tuple(s) for s in extra_starts]

    tk = element_coefficients("tx", geometry, wl)
    rk = element_coefficients("rx", geometry, wl)
    tpairs = pair_coefficients("tx", geometry, wl)
    rpairs = pair_coefficients("rx", geometry, wl)
    theta_fix, phi_fix = fixed_phases if fixed_phases is not None else (None, None)
    tx_lo, tx_hi, tx_wrap = side_bounds(tx_region, theta_fix, cfg.phase_handling)
    rx_lo, rx_hi, rx_wrap = side_bounds(rx_region, phi_fix, cfg.phase_handling)
    factor, floor = _step_params(cfg, wl)
    lam = np.ascontiguousarray(instance.pprm, dtype=complex)

    best = None
    rates = []
    total_steps = 0
    for k, (tx0, rx0) in enumerate(starts):
        tx_pt = _start_point(tx0, tx_lo, tx_hi, tx_wrap)
        rx_pt = _start_point(rx0, rx_lo, rx_hi, rx_wrap)
        trace = np.empty(cfg.max_outer_iterations + 1)
        n_outer, steps, converged, gain = _kernels.solve_start(
            lam, tk, rk, tpairs, rpairs, tx_pt, rx_pt, tx_lo, tx_hi, rx_lo, rx_hi,
            tx_wrap, rx_wrap, budget.snr, factor, floor,
            cfg.rate_tolerance, cfg.surrogate_tolerance,
            cfg.max_outer_iterations, cfg.max_inner_iterations,
            cfg.order == "rx_first", trace)
        if not np.isfinite(gain):
            raise FloatingPointError(f"non-finite channel gain from start {k}")
        rate = float(trace[n_outer])
        rates.append(rate)
        report = SolveReport(
            tx=_canonical(tx_pt), rx=_canonical(rx_pt), final_rate=rate,
            outer_trace=tuple(float(v) for v in trace[:n_outer + 1]),
            termination="converged" if converged else "iteration_cap",
            start_index=k, inner_steps=int(steps), gain=float(gain),
        )
        total_steps += int(steps)
        if best is None or rate > best.final_rate:
            best = report
    return replace(best, num_starts=len(starts), start_rates=tuple(rates),
                   inner_steps=total_steps)


def _start_point(state, lo, hi, wrap) -> np.ndarray:
    pt = np.clip(_as_point(state), lo, hi)
    if wrap:
        pt[2] = np.mod(_as_point(state)[2], TWO_PI)
    return pt
