import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_instance
from helpers import double_sum_channel
from polarforming.channel import (
    AntennaState,
    ChannelInstance,
    ChannelSpec,
    DimensionError,
    LinkBudget,
    MovingRegion,
    PathGeometry,
    achievable_rate,
    build_pprm,
    effective_channel,
    field_response,
    load_instance,
    path_projection,
    polarforming_vector,
    polarization_mixing,
    sample_geometry,
    sample_instance,
    sample_polarized_block,
    save_instance,
)

angles = st.floats(-math.pi / 2, math.pi / 2)
coords = st.floats(-5, 5)


def single_path_geometry(el=0.0, az=0.0):
    a = np.array([el])
    b = np.array([az])
    return PathGeometry(a, b, a, b)


# -- geometry and projections --------------------------------------------------

def test_projection_at_origin_is_zero():
    assert path_projection((0, 0), 0.7, -1.1) == 0


def test_projection_unit_case():
    assert path_projection((1, 0), 0.0, math.pi / 2) == pytest.approx(1.0, abs=1e-15)


def test_projection_scripted_value():
    x, y, el, az = 0.3, -0.2, 0.5, -0.4
    expected = x * math.cos(el) * math.sin(az) + y * math.sin(el)
    assert path_projection((x, y), el, az) == pytest.approx(expected, abs=1e-15)


@given(coords, coords, coords, coords, st.floats(-3, 3), st.floats(-3, 3), angles, angles)
def test_projection_is_linear(ux, uy, vx, vy, a, b, el, az):
    lhs = path_projection((a * ux + b * vx, a * uy + b * vy), el, az)
    rhs = a * path_projection((ux, uy), el, az) + b * path_projection((vx, vy), el, az)
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_geometry_rejects_out_of_range_angles():
    with pytest.raises(ValueError):
        PathGeometry(np.array([2.0]), np.zeros(1), np.zeros(1), np.zeros(1))


def test_geometry_rejects_empty():
    with pytest.raises(ValueError):
        PathGeometry(np.zeros(0), np.zeros(0), np.zeros(1), np.zeros(1))


def test_region_contains():
    region = MovingRegion(1.0)
    assert region.contains((0.5, -0.5))
    assert not region.contains((0.51, 0))
    with pytest.raises(ValueError):
        MovingRegion(-1.0)


def test_state_phase_range():
    with pytest.raises(ValueError):
        AntennaState((0, 0), 7.0)


# -- field response and polarforming vectors ---------------------------------------

def test_field_response_origin_is_ones():
    geo = sample_geometry(4, np.random.default_rng(0))
    np.testing.assert_array_equal(field_response((0, 0), "rx", geo, 1.0), np.ones(4))


@given(st.integers(0, 2 ** 32 - 1), coords, coords, st.sampled_from(["tx", "rx"]))
def test_field_response_unit_modulus(seed, x, y, side):
    geo = sample_geometry(3, np.random.default_rng(seed))
    np.testing.assert_allclose(np.abs(field_response((x, y), side, geo, 0.7)), 1.0, atol=1e-12)


def test_field_response_elementwise_oracle(rng):
    geo = sample_geometry(3, rng)
    pos = rng.uniform(-1, 1, 2)
    wl = 0.8
    got = field_response(pos, "tx", geo, wl)
    for k in range(3):
        rho = (pos[0] * math.cos(geo.tx_elevation[k]) * math.sin(geo.tx_azimuth[k])
               + pos[1] * math.sin(geo.tx_elevation[k]))
        assert got[k] == pytest.approx(complex(math.cos(2 * math.pi * rho / wl),
                                               math.sin(2 * math.pi * rho / wl)), abs=1e-13)


def test_pfv_examples():
    s = 1 / math.sqrt(2)
    np.testing.assert_allclose(polarforming_vector(0.0, "tx"), [s, s])
    np.testing.assert_allclose(polarforming_vector(math.pi, "rx"), [1, -1], atol=1e-15)
    np.testing.assert_allclose(polarforming_vector(math.pi / 2, "tx"), [s, 1j * s], atol=1e-15)
    with pytest.raises(ValueError):
        polarforming_vector(0.0, "up")


# -- effective channel ------------------------------------------------------------------

def test_unit_block_channel_is_sqrt2():
    inst = ChannelInstance(single_path_geometry(), np.eye(2, dtype=complex), 1.0)
    h = effective_channel(AntennaState(), AntennaState(), inst.pprm, inst.geometry, 1.0)
    assert h == pytest.approx(math.sqrt(2), abs=1e-15)


def test_null_channel():
    inst = make_instance(3, num_paths=2)
    zero = np.zeros_like(inst.pprm)
    assert effective_channel(AntennaState((0.1, 0.2), 1.0), AntennaState(), zero,
                             inst.geometry, 1.0) == 0


@pytest.mark.parametrize("num_paths", [1, 2, 3, 6])
def test_kronecker_matches_double_sum(num_paths):
    rng = np.random.default_rng(num_paths)
    for trial in range(20):
        inst = make_instance(100 * num_paths + trial, num_paths=num_paths)
        tx = AntennaState(tuple(rng.uniform(-0.5, 0.5, 2)), rng.uniform(0, 2 * math.pi))
        rx = AntennaState(tuple(rng.uniform(-0.5, 0.5, 2)), rng.uniform(0, 2 * math.pi))
        h = effective_channel(tx, rx, inst.pprm, inst.geometry, inst.wavelength)
        ref = double_sum_channel(tx, rx, inst)
        assert abs(h - ref) <= 1e-12 * max(abs(ref), 1e-300)


def test_dimension_mismatch_raises():
    inst = make_instance(0, num_paths=2)
    with pytest.raises(DimensionError):
        effective_channel(AntennaState(), AntennaState(), np.eye(6), inst.geometry, 1.0)


# -- rate -------------------------------------------------------------------------------------

def test_rate_examples():
    one = LinkBudget(1.0, 1.0)
    assert achievable_rate(0, one) == 0
    assert achievable_rate(1.0, one) == pytest.approx(1.0)
    assert achievable_rate(math.sqrt(3), one) == pytest.approx(2.0)


@given(st.floats(0, 1e3), st.floats(0, 1e3), st.floats(-20, 30))
def test_rate_strictly_increasing_in_gain(a, b, snr_db):
    if a == b:
        return
    lo, hi = sorted((a, b))
    budget = LinkBudget.from_snr_db(snr_db)
    r_lo = achievable_rate(math.sqrt(lo), budget)
    r_hi = achievable_rate(math.sqrt(hi), budget)
    assert r_lo <= r_hi
    # 1 + snr*g only separates once the difference clears double precision
    if (hi - lo) * budget.snr > 1e-12 * (1 + lo * budget.snr):
        assert r_lo < r_hi


def test_link_budget_validation():
    with pytest.raises(ValueError):
        LinkBudget(0.0, 1.0)
    assert LinkBudget.from_snr_db(10).snr == pytest.approx(10.0)


# -- polarized blocks and PPRM --------------------------------------------------------------

def test_no_depolarization_zeroes_cross_terms():
    rng = np.random.default_rng(5)
    for _ in range(50):
        block = sample_polarized_block(0.0, rng)
        assert block[0, 1] == 0 and block[1, 0] == 0


def test_full_mixing_mask():
    np.testing.assert_allclose(polarization_mixing(1.0), np.full((2, 2), 1 / math.sqrt(2)))


@pytest.mark.parametrize("chi", [0.3, 1.0, 2.5])
def test_block_second_moment(chi):
    rng = np.random.default_rng(9)
    samples = np.stack([sample_polarized_block(chi, rng) for _ in range(100_000)])
    empirical = np.mean(np.abs(samples) ** 2, axis=0)
    np.testing.assert_allclose(empirical, polarization_mixing(chi) ** 2, rtol=0.02)


def test_pprm_equal_power_split():
    rng = np.random.default_rng(2)
    spec = ChannelSpec(num_paths=2, rician_factor_db=0.0, inverse_xpd=0.0)
    ref = np.random.default_rng(2)
    b1, b2 = sample_polarized_block(0.0, ref), sample_polarized_block(0.0, ref)
    pprm = build_pprm(spec, rng)
    np.testing.assert_allclose(pprm[:2, :2], b1 / math.sqrt(2))
    np.testing.assert_allclose(pprm[2:, 2:], b2 / math.sqrt(2))
    assert not pprm[:2, 2:].any() and not pprm[2:, :2].any()


def test_pprm_infinite_rician_keeps_first_block_only():
    spec = ChannelSpec(num_paths=4, rician_factor_db=math.inf)
    pprm = build_pprm(spec, np.random.default_rng(1))
    assert np.abs(pprm[:2, :2]).sum() > 0
    assert not pprm[2:, 2:].any()


def test_pprm_large_rician_suppresses_scattered_blocks():
    spec = ChannelSpec(num_paths=4, rician_factor_db=80.0)
    pprm = build_pprm(spec, np.random.default_rng(1))
    assert np.abs(pprm[2:, 2:]).max() < 1e-3


def test_single_path_pprm_warns():
    with pytest.warns(UserWarning):
        pprm = build_pprm(ChannelSpec(num_paths=1, rician_factor_db=10.0), np.random.default_rng(0))
    np.testing.assert_allclose(pprm, sample_polarized_block(1.0, np.random.default_rng(0)))


def test_expected_total_power_is_two():
    # each block carries E|Psi*H|^2 summed over four entries = 2, and the block scales sum to 1
    rng = np.random.default_rng(77)
    spec = ChannelSpec(num_paths=6, rician_factor_db=0.0)
    power = np.mean([np.sum(np.abs(build_pprm(spec, rng)) ** 2) for _ in range(20_000)])
    assert power == pytest.approx(2.0, rel=0.02)


def test_geometry_sampling_moments():
    geo = sample_geometry(100_000, np.random.default_rng(4))
    for name in ("tx_elevation", "tx_azimuth", "rx_elevation", "rx_azimuth"):
        values = getattr(geo, name)
        assert abs(values.mean()) < 0.01
        assert values.min() >= -math.pi / 2 and values.max() <= math.pi / 2


def test_single_path_geometry_shapes():
    geo = sample_geometry(1, np.random.default_rng(0))
    assert geo.num_tx_paths == geo.num_rx_paths == 1


def test_sampling_is_seed_deterministic():
    spec = ChannelSpec(num_paths=3)
    a = sample_instance(spec, np.random.default_rng(42))
    b = sample_instance(spec, np.random.default_rng(42))
    np.testing.assert_array_equal(a.pprm, b.pprm)
    np.testing.assert_array_equal(a.geometry.rx_azimuth, b.geometry.rx_azimuth)


def test_instance_csv_round_trip(tmp_path):
    inst = make_instance(8, num_paths=3, wavelength=0.05)
    back = load_instance(save_instance(inst, tmp_path / "inst.csv"))
    np.testing.assert_array_equal(back.pprm, inst.pprm)
    np.testing.assert_array_equal(back.geometry.tx_elevation, inst.geometry.tx_elevation)
    assert back.wavelength == inst.wavelength


def test_unequal_path_counts_supported():
    geo = sample_geometry(2, np.random.default_rng(0), num_rx_paths=3)
    pprm = np.ones((6, 4), dtype=complex)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        h = effective_channel(AntennaState(), AntennaState(), pprm, geo, 1.0)
    assert np.isfinite(h)
