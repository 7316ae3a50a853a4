import logging

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from ratehalf.adversary import (calibrate_delta, dave_observe_fcb, energy_detect, knn_kld,
                                pd_bound, pfa_bound)
from ratehalf.analysis import mc_false_alarm_rate
from ratehalf.config import ProtocolConfig
from ratehalf.decoders import crossover_matrix
from ratehalf.protocol import assemble_frames
from ratehalf.signal_core import InvalidParameterError, NoSolutionError, RngStream

N35 = 10 ** -3.5


def mp_ring(r2, delta, noise):
    """Reference evaluation of the three-term ring bound in extended precision."""
    r, up, lo = mp.sqrt(r2), mp.sqrt(1 + mp.mpf(delta)), mp.sqrt(1 - mp.mpf(delta))
    t = lambda j: 1 / (1 + j / mp.mpf(noise))
    return t((up - r) ** 2) + t((r - lo) ** 2) - t((lo + r) ** 2)


def mp_pd(alpha, delta, noise, rho, s2):
    a = mp.mpf(alpha)
    s0 = a * rho + noise
    s1 = (1 - a) * s2 + s0
    tau = s0 * s1 / (s1 - s0) * mp.log(s1 / s0)
    p01 = mp.e ** (-tau / s0)
    p10 = 1 - mp.e ** (-tau / s1)
    p00, p11 = 1 - p01, 1 - p10
    return (mp_ring(a, delta, noise) + mp_ring(a, delta, noise + 1 - a)
            + (p00 + p10) * mp_ring(2 - a, delta, noise)
            + (p11 + p01) * mp_ring(1, delta, noise)) / 2


def test_pfa_bound_operating_point():
    assert pfa_bound(0.495, N35) == pytest.approx(1e-2, rel=0.05)
    assert pfa_bound(0.495, N35) == pytest.approx(float(mp_ring(1, 0.495, N35)), rel=1e-12)


def test_pfa_bound_near_one():
    v = pfa_bound(0.999, N35)
    assert v == pytest.approx(float(mp_ring(1, 0.999, N35)), rel=1e-10)
    # only the outer-ring term survives as delta -> 1
    outer = 1 / (1 + (np.sqrt(1.999) - 1) ** 2 / N35)
    assert v == pytest.approx(outer, rel=0.05)


@pytest.mark.parametrize("noise", [1e-4, N35, 1e-2, 1.0])
def test_pfa_bound_monotone(noise):
    vals = [pfa_bound(d, noise) for d in np.linspace(0.001, 0.999, 100)]
    assert np.all(np.diff(vals) <= 0)


@pytest.mark.parametrize("delta", [0.2, 0.495, 0.8])
def test_false_alarm_rate_below_bound(delta):
    cfg = ProtocolConfig(delta=delta)
    rate = mc_false_alarm_rate(cfg, 10**6, RngStream(17))
    assert rate.rate - 3 * rate.sigma <= pfa_bound(delta, N35)


def test_calibrate_delta_operating_point():
    d = calibrate_delta(N35, 1e-2)
    assert d == pytest.approx(0.495, abs=0.005)
    assert pfa_bound(d, N35) <= 1e-2 < pfa_bound(d - 1e-3, N35)


def test_calibrate_delta_loose_target():
    d = calibrate_delta(N35, 1.0)
    assert d < 0.1
    assert pfa_bound(d, N35) <= 1.0


def test_calibrate_delta_unreachable():
    # at N = 1 the bound never drops below ~0.85
    assert pfa_bound(0.999999, 1.0) > 0.85
    with pytest.raises(NoSolutionError):
        calibrate_delta(1.0, 1e-9)


def test_energy_detect_cases():
    assert not energy_detect(1.0, 0.495).alarm
    assert energy_detect(0.0, 0.3).alarm
    assert energy_detect(np.sqrt(1.5), 0.495).alarm


@given(st.floats(0, 3), st.floats(0.01, 0.99))
def test_energy_detect_band(e, delta):
    v = energy_detect(np.sqrt(e), delta)
    assert bool(v.alarm) == (not (1 - delta) <= v.normalized_energy <= (1 + delta))


def _unit_frames(cfg, x, x_hat):
    one = np.ones(1, complex)
    zero = np.zeros(1, complex)
    return assemble_frames(cfg, x=np.array([x]), x_hat=np.array([x_hat]), z_idx=np.array([1]),
                           zd_idx=np.array([2]), x_d=np.array([0]), key=np.array([0]),
                           h_ab=one, h_cb=one, h_ac=one, h_cc_unit=zero, h_ad=one * 1j,
                           h_cd=one * np.exp(0.3j), n_b1=zero, n_b2=zero, n_c1=zero,
                           n_d1=zero, n_d2=zero, n_ab1=zero, n_ab2=zero)


def test_dave_observations_noiseless():
    cfg = ProtocolConfig(alpha=0.8)
    y1, y2, ok = dave_observe_fcb(_unit_frames(cfg, 0, 0), cfg)
    assert ok[0]
    assert abs(y1[0]) ** 2 == pytest.approx(0.8)
    assert abs(y2[0]) ** 2 == pytest.approx(2 - 0.8)
    _, y2, _ = dave_observe_fcb(_unit_frames(cfg, 1, 1), cfg)
    assert abs(y2[0]) ** 2 == pytest.approx(1.0)


def test_dave_skips_dead_channel():
    cfg = ProtocolConfig(alpha=0.8)
    fr = _unit_frames(cfg, 1, 1)
    fr.h_cd[:] = 0
    y1, _, ok = dave_observe_fcb(fr, cfg)
    assert not ok[0] and np.isnan(y1[0])


def test_pd_bound_matches_reference_near_one():
    cfg = ProtocolConfig(alpha=0.9999)
    assert pd_bound(cfg) == pytest.approx(float(mp_pd(0.9999, 0.495, N35, 0.1, 1.0)), rel=1e-9)


@pytest.mark.parametrize("alpha", [0.6, 0.8, 0.99885])
def test_pd_bound_reference(alpha):
    cfg = ProtocolConfig(alpha=alpha)
    assert pd_bound(cfg, crossover_matrix(cfg)) == pytest.approx(
        float(mp_pd(alpha, 0.495, N35, 0.1, 1.0)), rel=1e-9)


def test_pd_bound_operating_point_order():
    v = pd_bound(ProtocolConfig(alpha=0.99885))
    assert 1e-3 < v < 1e-1


def test_pd_bound_precondition():
    with pytest.raises(InvalidParameterError):
        pd_bound(ProtocolConfig(alpha=0.5, delta=0.495))


def _cn(rng, n, mean=0.0, var=1.0):
    return mean + np.sqrt(var / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def test_knn_kld_same_distribution():
    rng = np.random.default_rng(0)
    est = knn_kld(_cn(rng, 10**5), _cn(rng, 10**5), k=1)
    assert abs(est.value) < 0.01
    assert (est.k, est.n_before, est.n_after) == (1, 10**5, 10**5)


def test_knn_kld_mean_shift():
    # KL(CN(0,1) || CN(1,1)) = |mu|^2 / sigma^2 = 1 nat
    rng = np.random.default_rng(1)
    est = knn_kld(_cn(rng, 10**5), _cn(rng, 10**5, mean=1.0))
    assert est.value == pytest.approx(1.0, abs=0.05)


def test_knn_kld_k_greater_than_one():
    rng = np.random.default_rng(2)
    # KL(CN(0,1) || CN(0,2)) = 1/2 - 1 - ln(1/2)
    expected = 0.5 - 1 + np.log(2)
    est = knn_kld(_cn(rng, 50_000), _cn(rng, 50_000, var=2.0), k=5)
    assert est.value == pytest.approx(expected, abs=0.03)


def test_knn_kld_needs_samples():
    with pytest.raises(InvalidParameterError):
        knn_kld([0j], [1j, 2j], k=1)


def test_knn_kld_duplicates_warn(caplog):
    pts = np.array([0, 0, 1, 2 + 1j, 3j], complex)
    with caplog.at_level(logging.WARNING):
        est = knn_kld(pts, pts + 0.1)
    assert np.isfinite(est.value)
    assert "duplicate" in caplog.text


def test_knn_kld_partition_independent():
    rng = np.random.default_rng(3)
    a, b = _cn(rng, 20_000), _cn(rng, 20_000, var=1.5)
    assert knn_kld(a, b, workers=1).value == knn_kld(a, b, workers=4).value


def test_knn_kld_converges():
    rng = np.random.default_rng(4)
    small = np.mean([abs(knn_kld(_cn(rng, 10**3), _cn(rng, 10**3)).value) for _ in range(20)])
    large = np.mean([abs(knn_kld(_cn(rng, 10**5), _cn(rng, 10**5)).value) for _ in range(20)])
    assert large < small + 0.02
