"""Polarized multipath channel model for movable, polarization-reconfigurable antennas.

Each link end carries a V-element and an H-element joined by one phase
shifter. Positions live in a square moving region; a path's phase at a
position is ``2*pi/wavelength`` times its projection onto the position.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

Side = Literal["tx", "rx"]

HALF_PI = math.pi / 2
TWO_PI = 2 * math.pi


class DimensionError(ValueError):
    """Array shapes of a channel description do not agree."""


@dataclass(frozen=True)
class PathGeometry:
    """Elevation/azimuth angles of departure (tx) and arrival (rx), in radians."""

    tx_elevation: np.ndarray
    tx_azimuth: np.ndarray
    rx_elevation: np.ndarray
    rx_azimuth: np.ndarray

    def __post_init__(self):
        for name in ("tx_elevation", "tx_azimuth", "rx_elevation", "rx_azimuth"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.tx_elevation.shape != self.tx_azimuth.shape:
            raise DimensionError("tx elevation/azimuth lengths differ")
        if self.rx_elevation.shape != self.rx_azimuth.shape:
            raise DimensionError("rx elevation/azimuth lengths differ")
        if self.num_tx_paths < 1 or self.num_rx_paths < 1:
            raise DimensionError("need at least one path on each side")
        for name in ("tx_elevation", "tx_azimuth", "rx_elevation", "rx_azimuth"):
            arr = getattr(self, name)
            if not np.all(np.abs(arr) <= HALF_PI + 1e-12):
                raise ValueError(f"{name} must lie in [-pi/2, pi/2]")

    @property
    def num_tx_paths(self) -> int:
        return self.tx_elevation.size

    @property
    def num_rx_paths(self) -> int:
        return self.rx_elevation.size

    def angles(self, side: Side) -> tuple[np.ndarray, np.ndarray]:
        """(elevation, azimuth) arrays for one link end."""
        if side == "tx":
            return self.tx_elevation, self.tx_azimuth
        if side == "rx":
            return self.rx_elevation, self.rx_azimuth
        raise ValueError(f"unknown side {side!r}")


@dataclass(frozen=True)
class MovingRegion:
    """Square region [-size/2, size/2]^2; size 0 is a fixed-position antenna."""

    size: float

    def __post_init__(self):
        if not self.size >= 0:
            raise ValueError(f"region size must be >= 0, got {self.size}")

    @property
    def half(self) -> float:
        return self.size / 2

    def contains(self, position, atol: float = 1e-12) -> bool:
        pos = np.asarray(position, dtype=float)
        return bool(np.all(np.abs(pos) <= self.half + atol))


@dataclass(frozen=True)
class AntennaState:
    """Position (x, y) inside the moving region and polarforming phase shift."""

    position: tuple[float, float] = (0.0, 0.0)
    phase: float = 0.0

    def __post_init__(self):
        x, y = (float(v) for v in self.position)
        phase = float(self.phase)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError("position must be finite")
        if not -1e-12 <= phase <= TWO_PI + 1e-12:
            raise ValueError(f"phase {phase} outside [0, 2*pi]")
        object.__setattr__(self, "position", (x, y))
        object.__setattr__(self, "phase", phase)

    def as_array(self) -> np.ndarray:
        return np.array([self.position[0], self.position[1], self.phase])

    @classmethod
    def from_array(cls, arr) -> "AntennaState":
        return cls((arr[0], arr[1]), arr[2])


# Both link ends share one state shape; the aliases keep call sites readable.
TxState = AntennaState
RxState = AntennaState


@dataclass(frozen=True)
class LinkBudget:
    transmit_power: float = 1.0
    noise_power: float = 1.0

    def __post_init__(self):
        if not (self.transmit_power > 0 and self.noise_power > 0):
            raise ValueError("transmit and noise power must be strictly positive")

    @property
    def snr(self) -> float:
        return self.transmit_power / self.noise_power

    @classmethod
    def from_snr_db(cls, snr_db: float) -> "LinkBudget":
        """Unit transmit power, noise power set so that P_t / sigma^2 hits ``snr_db``."""
        return cls(1.0, 10 ** (-snr_db / 10))


@dataclass(frozen=True)
class ChannelSpec:
    """Parameters of the geometric polarized channel generator.

    ``region_size`` is in the same length unit as ``wavelength``.
    """

    wavelength: float = 1.0
    num_paths: int = 6
    inverse_xpd: float = 1.0
    rician_factor_db: float = 0.0
    region_size: float = 1.0

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        if int(self.num_paths) != self.num_paths or self.num_paths < 1:
            raise ValueError("num_paths must be a positive integer")
        if not self.inverse_xpd >= 0:
            raise ValueError("inverse_xpd must be >= 0")
        if not self.region_size >= 0:
            raise ValueError("region_size must be >= 0")

    @property
    def rician_factor(self) -> float:
        return 10 ** (self.rician_factor_db / 10)


@dataclass(frozen=True)
class ChannelInstance:
    """One channel realization: geometry, PPRM and wavelength.

    The PPRM has shape (2*L_r, 2*L_t); block (l, i) couples receive path l
    with transmit path i.
    """

    geometry: PathGeometry
    pprm: np.ndarray
    wavelength: float = 1.0

    def __post_init__(self):
        pprm = np.asarray(self.pprm, dtype=complex)
        check_pprm(pprm, self.geometry)
        pprm.setflags(write=False)
        object.__setattr__(self, "pprm", pprm)

    @property
    def num_tx_paths(self) -> int:
        return self.geometry.num_tx_paths

    @property
    def num_rx_paths(self) -> int:
        return self.geometry.num_rx_paths


def check_pprm(pprm: np.ndarray, geometry: PathGeometry) -> None:
    expected = (2 * geometry.num_rx_paths, 2 * geometry.num_tx_paths)
    if pprm.shape != expected:
        raise DimensionError(f"PPRM shape {pprm.shape} does not match geometry {expected}")


def path_projection(position, elevation, azimuth):
    """Path-length projection x*cos(el)*sin(az) + y*sin(el).

    Broadcasts over arrays of angles.
    """
    x, y = position[0], position[1]
    return x * np.cos(elevation) * np.sin(azimuth) + y * np.sin(elevation)


def field_response(position, side: Side, geometry: PathGeometry, wavelength: float) -> np.ndarray:
    elevation, azimuth = geometry.angles(side)
    rho = path_projection(position, elevation, azimuth)
    return np.exp(1j * (TWO_PI / wavelength) * rho)


def polarforming_vector(phase: float, side: Side) -> np.ndarray:
    """V/H excitation for a phase shift.

    The transmitter splits its power over both elements (1/sqrt(2) scaling);
    the receiver combines them unscaled.
    """
    vec = np.array([1.0, np.exp(1j * phase)])
    if side == "tx":
        return vec / math.sqrt(2)
    if side == "rx":
        return vec
    raise ValueError(f"unknown side {side!r}")


def steering_vector(state: AntennaState, side: Side, geometry: PathGeometry, wavelength: float) -> np.ndarray:
    """Kronecker product of the field response and the polarforming vector."""
    return np.kron(field_response(state.position, side, geometry, wavelength),
                   polarforming_vector(state.phase, side))


def effective_channel(tx: AntennaState, rx: AntennaState, pprm: np.ndarray,
                      geometry: PathGeometry, wavelength: float) -> complex:
    pprm = np.asarray(pprm)
    check_pprm(pprm, geometry)
    f = steering_vector(tx, "tx", geometry, wavelength)
    g = steering_vector(rx, "rx", geometry, wavelength)
    return complex(np.vdot(g, pprm @ f))


def achievable_rate(h, budget: LinkBudget):
    return np.log2(1 + np.abs(h) ** 2 * budget.snr)


def rate_from_gain(gain, budget: LinkBudget):
    """Rate for a channel power gain |h|^2."""
    return np.log2(1 + gain * budget.snr)


def polarization_mixing(inverse_xpd: float) -> np.ndarray:
    """2x2 amplitude mask applied to the i.i.d. polarized gains."""
    s = math.sqrt(inverse_xpd)
    return np.array([[1.0, s], [s, 1.0]]) / math.sqrt(inverse_xpd + 1)


def sample_polarized_block(inverse_xpd: float, rng: np.random.Generator) -> np.ndarray:
    if inverse_xpd < 0:
        raise ValueError("inverse_xpd must be >= 0")
    gains = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) / math.sqrt(2)
    return polarization_mixing(inverse_xpd) * gains


def build_pprm(spec: ChannelSpec, rng: np.random.Generator) -> np.ndarray:
    """Block-diagonal Rician PPRM: one dominant block plus L-1 equal-power blocks.

    With a single path the (L-1) scaling is undefined; the lone block is
    returned at unit scale and the Rician factor is ignored.
    """
    num_paths = int(spec.num_paths)
    blocks = [sample_polarized_block(spec.inverse_xpd, rng) for _ in range(num_paths)]
    if num_paths == 1:
        warnings.warn("single-path channel: Rician factor ignored, block kept at unit scale",
                      stacklevel=2)
        return blocks[0]
    kappa = spec.rician_factor
    pprm = np.zeros((2 * num_paths, 2 * num_paths), dtype=complex)
    if math.isinf(kappa):
        scales = [1.0] + [0.0] * (num_paths - 1)
    else:
        scales = [math.sqrt(kappa / (kappa + 1))]
        scales += [1 / math.sqrt((kappa + 1) * (num_paths - 1))] * (num_paths - 1)
    for k, (scale, block) in enumerate(zip(scales, blocks)):
        pprm[2 * k:2 * k + 2, 2 * k:2 * k + 2] = scale * block
    return pprm


def sample_geometry(num_paths: int, rng: np.random.Generator,
                    num_rx_paths: int | None = None) -> PathGeometry:
    """All angles i.i.d. uniform over [-pi/2, pi/2]."""
    if num_paths < 1:
        raise ValueError("num_paths must be >= 1")
    num_rx_paths = num_paths if num_rx_paths is None else num_rx_paths
    return PathGeometry(
        tx_elevation=rng.uniform(-HALF_PI, HALF_PI, num_paths),
        tx_azimuth=rng.uniform(-HALF_PI, HALF_PI, num_paths),
        rx_elevation=rng.uniform(-HALF_PI, HALF_PI, num_rx_paths),
        rx_azimuth=rng.uniform(-HALF_PI, HALF_PI, num_rx_paths),
    )


def sample_instance(spec: ChannelSpec, rng: np.random.Generator) -> ChannelInstance:
    """Geometry first, then the PPRM, from the same stream."""
    geometry = sample_geometry(spec.num_paths, rng)
    with warnings.catch_warnings():
        if spec.num_paths == 1:
            warnings.simplefilter("ignore")
        pprm = build_pprm(spec, rng)
    return ChannelInstance(geometry, pprm, spec.wavelength)


# -- serialization -----------------------------------------------------------
#
# CSV layout, one value per row: ``field,row,col,real,imag``.
# Angle arrays use row = path index, col = 0; the PPRM is written row-major.

_ANGLE_FIELDS = ("tx_elevation", "tx_azimuth", "rx_elevation", "rx_azimuth")


def save_instance(instance: ChannelInstance, path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["field", "row", "col", "real", "imag"])
            writer.writerow(["wavelength", 0, 0, repr(float(instance.wavelength)), "0.0"])
            for name in _ANGLE_FIELDS:
                for k, value in enumerate(getattr(instance.geometry, name)):
                    writer.writerow([name, k, 0, repr(float(value)), "0.0"])
            rows, cols = instance.pprm.shape
            for r in range(rows):
                for c in range(cols):
                    z = instance.pprm[r, c]
                    writer.writerow(["pprm", r, c, repr(float(z.real)), repr(float(z.imag))])
    except OSError as exc:
        raise OSError(f"cannot write channel instance to {path}: {exc}") from exc
    return path


def load_instance(path) -> ChannelInstance:
    path = Path(path)
    angles: dict[str, dict[int, float]] = {name: {} for name in _ANGLE_FIELDS}
    entries: dict[tuple[int, int], complex] = {}
    wavelength = 1.0
    with path.open(newline="") as fh:
        for rec in csv.DictReader(fh):
            name = rec["field"]
            row, col = int(rec["row"]), int(rec["col"])
            if name == "wavelength":
                wavelength = float(rec["real"])
            elif name in angles:
                angles[name][row] = float(rec["real"])
            elif name == "pprm":
                entries[(row, col)] = complex(float(rec["real"]), float(rec["imag"]))
            else:
                raise ValueError(f"{path}: unknown field {name!r}")
    geometry = PathGeometry(**{
        name: np.array([vals[k] for k in range(len(vals))]) for name, vals in angles.items()
    })
    rows = 1 + max(r for r, _ in entries)
    cols = 1 + max(c for _, c in entries)
    pprm = np.zeros((rows, cols), dtype=complex)
    for (r, c), z in entries.items():
        pprm[r, c] = z
    return ChannelInstance(geometry, pprm, wavelength)
