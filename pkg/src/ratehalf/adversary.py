"""Dave's countermeasure detectors.

Two detectors watch the network bands:

* an instantaneous energy detector on f_CB, which normalises each sample
  by the channel magnitude ``|h_CD|`` and alarms when the energy leaves
  ``[1 - delta, 1 + delta]``;
* a k-nearest-neighbour estimate of the KL divergence between samples
  collected before and after the jamming attack.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .config import ProtocolConfig
from .decoders import CrossoverMatrix, crossover_matrix
from .signal_core import InvalidParameterError, NoSolutionError

log = logging.getLogger(__name__)

MIN_CHANNEL_MAGNITUDE = 1e-12
KNN_JITTER = 1e-12


@dataclass(frozen=True)
class DetectorVerdict:
    alarm: np.ndarray
    slot: int
    normalized_energy: np.ndarray


@dataclass(frozen=True)
class KldEstimate:
    value: float
    k: int
    n_before: int
    n_after: int


def normalize_by_channel(y, h):
    """Divide by ``|h|``; frames with an unusable channel come back as NaN."""
    mag = np.abs(h)
    ok = mag >= MIN_CHANNEL_MAGNITUDE
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(ok, y / np.where(ok, mag, 1.0), np.nan)
    return out, ok


def dave_observe_fcb(frames, cfg: ProtocolConfig | None = None):
    """Dave's normalised f_CB samples for both slots.

    Returns ``(y_d1', y_d2', usable)``; ``usable`` is False where ``|h_CD|``
    is too small to normalise by, and such frames are to be skipped.
    """
    y1, ok = normalize_by_channel(frames.y_d1, frames.h_cd)
    y2, _ = normalize_by_channel(frames.y_d2, frames.h_cd)
    return y1, y2, ok


def energy_detect(y_prime, delta: float, slot: int = 1) -> DetectorVerdict:
    e = np.abs(y_prime) ** 2
    alarm = (e > 1.0 + delta) | (e < 1.0 - delta)
    return DetectorVerdict(alarm=alarm, slot=slot, normalized_energy=e)


def _ring_term(j, noise):
    # Pr(|n'|^2 >= j) for n' = n/|h|, n ~ CN(0, noise), h ~ CN(0, 1)
    return 1.0 / (1.0 + j / noise)


def _ring_bound(radius2, delta, noise):
    """Triangle-inequality bound on Pr(alarm) for a ring of squared radius ``radius2``."""
    r = np.sqrt(radius2)
    up, lo = np.sqrt(1.0 + delta), np.sqrt(1.0 - delta)
    return (_ring_term((up - r) ** 2, noise)
            + _ring_term((r - lo) ** 2, noise)
            - _ring_term((lo + r) ** 2, noise))


def _check_delta(delta):
    if not 0.0 < delta < 1.0:
        raise InvalidParameterError(f"delta must lie in (0, 1), got {delta}")


def pfa_bound(delta: float, noise_power: float) -> float:
    """Upper bound on the average false-alarm probability of the energy detector."""
    _check_delta(delta)
    if not noise_power > 0:
        raise InvalidParameterError(f"noise_power must be > 0, got {noise_power}")
    return float(_ring_bound(1.0, delta, noise_power))


def calibrate_delta(noise_power: float, target_pfa: float, tol: float = 1e-6) -> float:
    """Smallest ``delta`` whose false-alarm bound does not exceed ``target_pfa``."""
    if not 0.0 < target_pfa < 1.0 and target_pfa != 1.0:
        raise InvalidParameterError(f"target_pfa must lie in (0, 1], got {target_pfa}")
    grid = np.linspace(1e-6, 1 - 1e-6, 100)
    vals = np.array([pfa_bound(d, noise_power) for d in grid])
    assert np.all(np.diff(vals) <= 1e-15), "false-alarm bound is not monotone in delta"

    lo, hi = 0.0, 1.0
    hi_val = float(_ring_bound(1.0, 1.0, noise_power))
    if hi_val > target_pfa:
        raise NoSolutionError(
            f"false-alarm target {target_pfa:g} unreachable for delta < 1 "
            f"(bound tends to {hi_val:.6g} as delta -> 1)"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pfa_bound(mid, noise_power) <= target_pfa:
            hi = mid
        else:
            lo = mid
    return hi


def pd_bound(cfg: ProtocolConfig, crossover: CrossoverMatrix | None = None) -> float:
    """Upper bound on the average probability of detecting the countermeasure.

    Valid only when ``1 - delta < alpha``.  The bound is the sum of a slot-1
    term, averaged over Alice's bit, and a slot-2 term, averaged over
    Charlie's decision; it may exceed 1.
    """
    if not cfg.bound_applicable:
        raise InvalidParameterError(
            f"detection bound requires 1 - delta < alpha (delta={cfg.delta}, alpha={cfg.alpha})"
        )
    p = crossover if crossover is not None else crossover_matrix(cfg)
    a, d, n = cfg.alpha, cfg.delta, cfg.noise_power
    # Alice's slot-1 leakage, seen through h_AD/|h_CD|, adds variance 1 - alpha
    slot1_x0 = _ring_bound(a, d, n)
    slot1_x1 = _ring_bound(a, d, n + 1.0 - a)
    slot2_x0 = _ring_bound(2.0 - a, d, n)
    slot2_x1 = pfa_bound(d, n)
    return float(0.5 * (slot1_x0 + slot1_x1
                        + (p.p00 + p.p10) * slot2_x0
                        + (p.p11 + p.p01) * slot2_x1))


def _as_points(samples):
    s = np.asarray(samples)
    if np.iscomplexobj(s) or s.ndim == 1:
        s = np.column_stack([s.real, s.imag]) if np.iscomplexobj(s) else s[:, None]
    return np.ascontiguousarray(s, dtype=float)


def knn_kld(before, after, k: int = 1, workers: int = 1) -> KldEstimate:
    """k-NN estimate of KL(before || after) in nats.

    Complex samples are treated as points in the plane.  The estimate is
    not clamped and can be slightly negative.
    """
    p = _as_points(before)
    q = _as_points(after)
    n, m = len(p), len(q)
    if k < 1:
        raise InvalidParameterError(f"k must be >= 1, got {k}")
    if n < k + 1 or m < k + 1:
        raise InvalidParameterError(f"need at least k+1={k + 1} samples on each side")
    d = p.shape[1]

    rho = cKDTree(p).query(p, k=k + 1, workers=workers)[0][:, k]
    nu = cKDTree(q).query(p, k=k, workers=workers)[0]
    nu = nu if k == 1 else nu[:, k - 1]
    if np.any(rho == 0) or np.any(nu == 0):
        log.warning("zero nearest-neighbour distance (duplicate samples); adding %g jitter",
                    KNN_JITTER)
        rho = np.maximum(rho, KNN_JITTER)
        nu = np.maximum(nu, KNN_JITTER)
    value = d * np.mean(np.log(nu / rho)) + np.log(m / (n - 1))
    return KldEstimate(value=float(value), k=k, n_before=n, n_after=m)
