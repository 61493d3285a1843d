import math

import numpy as np
import pytest

from flexbeam.link_budget import (
    AntennaModel,
    LinkParams,
    beam_gain,
    calibrate_carrier_power,
    calibrated_link,
    carrier_snr,
    carrier_snr_matrix,
    shannon_rate,
)

# Frozen values from a 50-digit mpmath evaluation of the taper
#   (J1(u)/(2u) + 36 J3(u)/u^3)^2
# at u = 2.07123 (d = R) and u = 4.14246 (d = 2R).
TAPER_AT_R = 0.50000040833278671721
TAPER_AT_2R = 0.042231121127524186589


@pytest.fixture
def antenna():
    return AntennaModel()


@pytest.fixture
def link():
    return LinkParams(carrier_tx_power_w=3.5)


def test_gain_at_zero_is_exactly_peak(antenna):
    assert beam_gain(0.0, antenna) == antenna.g_max


def test_gain_is_continuous_at_zero(antenna):
    g0 = beam_gain(0.0, antenna)
    g_eps = beam_gain(1e-9, antenna)
    assert abs(g_eps - g0) <= 1e-9 * g0


def test_gain_at_edge_matches_high_precision_series(antenna):
    got = beam_gain(antenna.beam_radius_km, antenna)
    assert got == pytest.approx(antenna.g_max * TAPER_AT_R, rel=1e-12)


def test_gain_at_twice_radius_matches_high_precision_series(antenna):
    got = beam_gain(2 * antenna.beam_radius_km, antenna)
    assert got == pytest.approx(antenna.g_max * TAPER_AT_2R, rel=1e-12)


def test_gain_never_exceeds_peak(antenna):
    d = np.linspace(0.0, 3 * antenna.beam_radius_km, 10_000)
    g = beam_gain(d, antenna)
    assert np.all(g <= antenna.g_max)
    assert np.all(g >= 0.0)


def test_gain_rejects_negative_distance(antenna):
    with pytest.raises(ValueError):
        beam_gain(-1.0, antenna)


def test_snr_at_center_hits_calibrated_reference(antenna):
    base = LinkParams()
    power, snr_ref = calibrate_carrier_power(6800.0, 6, 4, antenna, base)
    link = calibrated_link(6800.0, 6, 4, antenna, base)
    assert link.carrier_tx_power_w == pytest.approx(power)
    got = carrier_snr((0.0, 0.0), (0.0, 0.0), antenna, link)
    assert got == pytest.approx(snr_ref, rel=1e-12)
    # frozen from the closed-form inversion: 2^(1133.33../250) - 1
    assert snr_ref == pytest.approx(22.156307799046, rel=1e-12)
    assert power == pytest.approx(3.519335658, rel=1e-9)


def test_snr_at_edge_scales_by_gain_ratio(antenna, link):
    s0 = carrier_snr((0.0, 0.0), (0.0, 0.0), antenna, link)
    s_edge = carrier_snr((antenna.beam_radius_km, 0.0), (0.0, 0.0), antenna, link)
    ratio = beam_gain(antenna.beam_radius_km, antenna) / antenna.g_max
    assert s_edge == pytest.approx(s0 * ratio, rel=1e-12)


def test_snr_zero_power():
    link = LinkParams(carrier_tx_power_w=0.0)
    assert carrier_snr((10.0, 3.0), (0.0, 0.0), AntennaModel(), link) == 0.0


def test_snr_translation_invariance(antenna, link):
    rng = np.random.default_rng(3)
    for _ in range(20):
        u = rng.uniform(-100, 100, 2)
        c = rng.uniform(-100, 100, 2)
        t = rng.uniform(-500, 500, 2)
        assert carrier_snr(u, c, antenna, link) == pytest.approx(
            carrier_snr(u + t, c + t, antenna, link), rel=1e-12
        )


def test_snr_matrix_matches_scalar_path(antenna, link):
    rng = np.random.default_rng(8)
    users = rng.uniform(-80, 80, (7, 2))
    centers = rng.uniform(-80, 80, (3, 2))
    mat = carrier_snr_matrix(users, centers, antenna, link, 70.962)
    for k in range(3):
        for n in range(7):
            assert mat.snr[k, n] == pytest.approx(
                carrier_snr(users[n], centers[k], antenna, link), rel=1e-12
            )
            d = math.hypot(users[n, 0] - centers[k, 0], users[n, 1] - centers[k, 1])
            assert mat.feasible[k, n] == (d <= 70.962)


def test_shannon_rate_trivial_points():
    assert shannon_rate(62.5, 0.0) == 0.0
    assert shannon_rate(62.5, 1.0) == 62.5
    assert shannon_rate(62.5, 3.0) == 125.0


def test_shannon_rate_monotone():
    bw = np.linspace(0, 500, 50)
    snr = np.linspace(0, 30, 50)
    r_bw = shannon_rate(bw, 5.0)
    r_snr = shannon_rate(100.0, snr)
    assert np.all(np.diff(r_bw) >= 0)
    assert np.all(np.diff(r_snr) >= 0)


def test_shannon_rate_rejects_negative():
    with pytest.raises(ValueError):
        shannon_rate(-1.0, 2.0)
    with pytest.raises(ValueError):
        shannon_rate(10.0, -0.5)


def test_calibration_capacity_identity(antenna):
    # carriers_per_beam on-axis carriers at the calibrated power offer exactly
    # the per-beam design rate
    link = calibrated_link(6800.0, 6, 4, antenna)
    snr0 = carrier_snr((0.0, 0.0), (0.0, 0.0), antenna, link)
    offered = 4 * shannon_rate(link.carrier_bandwidth_mhz, snr0)
    assert offered == pytest.approx(6800.0 / 6, rel=1e-12)


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        AntennaModel(g_max=0.0)
    with pytest.raises(ValueError):
        LinkParams(carrier_bandwidth_mhz=0.0)
    with pytest.raises(ValueError):
        LinkParams(atmospheric_loss_db=-0.1)
    with pytest.raises(ValueError):
        calibrate_carrier_power(0.0, 6, 4, AntennaModel(), LinkParams())
