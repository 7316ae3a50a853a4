import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from ratehalf.config import ProtocolConfig
from ratehalf.decoders import (CrossoverMatrix, DegenerateDetectionError, _argmax_joint,
                               charlie_detect, charlie_threshold, charlie_variances,
                               crossover_matrix, jmap, ml_energy_threshold, remove_dummy, rhjdd)
from ratehalf.protocol import assemble_frames, generate_frames
from ratehalf.signal_core import RngStream, psk_point

# alpha*rho + N = 1 and (1-alpha)*sigma_ac2 = 1: sigma0^2 = 1, sigma1^2 = 2
UNIT_CFG = ProtocolConfig(alpha=0.5, rho=0.5, noise_power=0.75, sigma_ac2=2.0)


def test_unit_cfg_variances():
    assert charlie_variances(UNIT_CFG) == pytest.approx((1.0, 2.0))


def test_threshold_matches_numeric_likelihood_crossing():
    # independent oracle: root of the log-likelihood difference of Exp(1) vs Exp(2) on |y|^2
    llr = lambda e: (-np.log(2.0) - e / 2.0) - (-e)
    crossing = brentq(llr, 1e-9, 100.0)
    assert charlie_threshold(UNIT_CFG) == pytest.approx(crossing, rel=1e-10)
    assert charlie_threshold(UNIT_CFG) == pytest.approx(2 * np.log(2), rel=1e-12)


def test_charlie_detect_extremes():
    assert charlie_detect(0.0, UNIT_CFG) == 0
    assert charlie_detect(1e6, UNIT_CFG) == 1


def test_degenerate_threshold():
    with pytest.raises(DegenerateDetectionError):
        ml_energy_threshold(1.0, 1.0)


def test_crossover_closed_form_values():
    p = crossover_matrix(UNIT_CFG)
    assert p.p01 == pytest.approx(0.25, rel=1e-12)
    assert p.p10 == pytest.approx(0.5, rel=1e-12)
    np.testing.assert_allclose(p.p.sum(axis=1), 1.0)


def test_crossover_monte_carlo_on_energies():
    # independent route: exponential energies straight from their definitions
    rng = np.random.default_rng(123)
    n = 10**6
    tau = 2 * np.log(2)
    p01 = np.mean(rng.exponential(1.0, n) > tau)
    p10 = np.mean(rng.exponential(2.0, n) <= tau)
    assert p01 == pytest.approx(0.25, abs=0.003)
    assert p10 == pytest.approx(0.5, abs=0.003)


def test_crossover_small_threshold_limit():
    # near-degenerate energy gap pushes the threshold towards sigma0^2 ~ 0
    cfg = ProtocolConfig(alpha=0.01, rho=1e-9, noise_power=1e-12, sigma_ac2=1.0)
    p = crossover_matrix(cfg)
    assert p.p10 < 1e-6


@settings(max_examples=200)
@given(alpha=st.floats(0.01, 0.99), rho=st.floats(1e-4, 0.99), snr=st.floats(0, 50),
       s2=st.floats(0.01, 100))
def test_crossover_rows_are_distributions(alpha, rho, snr, s2):
    p = crossover_matrix(ProtocolConfig.from_snr_db(snr, alpha=alpha, rho=rho, sigma_ac2=s2)).p
    assert np.all((p >= 0) & (p <= 1))
    np.testing.assert_allclose(p.sum(axis=1), 1.0)


def test_remove_dummy():
    cfg = ProtocolConfig(alpha=0.64)
    h_cb, z_d, h_ab = 0.3 + 0.4j, psk_point(4, 1), -0.2 + 1j
    y0 = np.sqrt(0.64) * h_cb * z_d
    assert remove_dummy(y0, h_cb, z_d, cfg) == pytest.approx(0)
    y1 = np.sqrt(0.36) * h_ab + y0
    assert remove_dummy(y1, h_cb, z_d, cfg) == pytest.approx(np.sqrt(0.36) * h_ab)


@given(re=st.floats(-5, 5), im=st.floats(-5, 5), dre=st.floats(-5, 5), dim=st.floats(-5, 5))
def test_remove_dummy_linear(re, im, dre, dim):
    cfg = ProtocolConfig(alpha=0.3)
    y, d = complex(re, im), complex(dre, dim)
    lhs = remove_dummy(y + d, 0.5j, psk_point(4, 3), cfg)
    rhs = remove_dummy(y, 0.5j, psk_point(4, 3), cfg) + d
    assert lhs == pytest.approx(rhs, abs=1e-12)


def _noiseless(cfg, n, seed):
    rng = np.random.default_rng(seed)
    c = lambda: (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    zero = np.zeros(n, complex)
    x = rng.integers(0, 2, n)
    return assemble_frames(cfg, x=x, x_hat=x, z_idx=rng.integers(0, cfg.m, n),
                           zd_idx=rng.integers(0, cfg.m, n), x_d=x, key=x, h_ab=c(), h_cb=c(),
                           h_ac=c(), h_cc_unit=zero, h_ad=c(), h_cd=c(), n_b1=zero, n_b2=zero,
                           n_c1=zero, n_d1=zero, n_d2=zero, n_ab1=zero, n_ab2=zero)


@pytest.mark.parametrize("m", [2, 4, 8])
def test_noiseless_decoding_exact(m):
    cfg = ProtocolConfig(alpha=0.7, m=m, noise_power=1e-9)
    fr = _noiseless(cfg, 2000, m)
    y = remove_dummy(fr.y_b1, fr.h_cb, fr.z_d, cfg)
    for dec in (rhjdd(y, fr.y_b2, fr.h_cb, cfg),
                jmap(y, fr.y_b2, fr.h_cb, cfg, crossover_matrix(cfg))):
        np.testing.assert_array_equal(dec.a_hat, fr.x)
        np.testing.assert_array_equal(dec.b_hat, fr.z_idx)


def test_scalar_inputs():
    cfg = ProtocolConfig(alpha=0.5, noise_power=1e-6)
    z = psk_point(4, 2)
    dec = rhjdd(0.0, 0.8 * z, 0.8, cfg)
    assert (int(dec.a_hat), int(dec.b_hat)) == (1, 2)


def test_jmap_identity_equals_rhjdd():
    cfg = ProtocolConfig(alpha=0.9)
    fr = generate_frames(cfg, 20_000, RngStream(8))
    y = remove_dummy(fr.y_b1, fr.h_cb, fr.z_d, cfg)
    a = rhjdd(y, fr.y_b2, fr.h_cb, cfg)
    b = jmap(y, fr.y_b2, fr.h_cb, cfg, CrossoverMatrix.identity())
    np.testing.assert_array_equal(a.a_hat, b.a_hat)
    np.testing.assert_array_equal(a.b_hat, b.b_hat)


def test_tie_break_smallest_pair():
    score = np.zeros((2, 4))
    d = _argmax_joint(score, 4)
    assert (int(d.a_hat), int(d.b_hat)) == (0, 0)
    score[1, 2] = score[1, 3] = 1.0
    d = _argmax_joint(score, 4)
    assert (int(d.a_hat), int(d.b_hat)) == (1, 2)


@given(st.lists(st.floats(-50, 50), min_size=8, max_size=8), st.floats(-100, 100))
def test_argmax_invariant_to_common_scaling(vals, log_scale):
    score = np.array(vals).reshape(2, 4)
    a = _argmax_joint(score, 4)
    b = _argmax_joint(score + log_scale, 4)
    assert (int(a.a_hat), int(a.b_hat)) == (int(b.a_hat), int(b.b_hat)) or \
        np.isclose(score.ravel()[int(a.a_hat) * 4 + int(a.b_hat)],
                   score.ravel()[int(b.a_hat) * 4 + int(b.b_hat)])


def test_low_alpha_high_snr_error_small():
    from ratehalf.analysis import mc_error_rate
    cfg = ProtocolConfig(alpha=0.1)
    rate = mc_error_rate(cfg, 10**6, RngStream(2))
    assert rate.rate < 1e-3
