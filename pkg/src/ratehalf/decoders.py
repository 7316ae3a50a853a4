"""Charlie's relay decision and Bob's joint decoders.

All decoders are vectorised: inputs may be scalars or equally shaped
arrays, decisions come back with the same shape.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ProtocolConfig
from .signal_core import InvalidParameterError, psk_point


class DegenerateDetectionError(InvalidParameterError):
    """Both hypotheses at Charlie have the same energy distribution."""


@dataclass(frozen=True)
class CrossoverMatrix:
    """``p[m][n]`` = Pr(Charlie decodes Alice's bit m as n)."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.shape != (2, 2):
            raise InvalidParameterError("crossover matrix must be 2x2")
        if np.any(p < 0) or np.any(p > 1) or not np.allclose(p.sum(axis=1), 1.0):
            raise InvalidParameterError("crossover rows must be probability vectors")
        object.__setattr__(self, "p", p)

    @classmethod
    def identity(cls) -> "CrossoverMatrix":
        return cls(np.eye(2))

    @property
    def p00(self) -> float:
        return float(self.p[0, 0])

    @property
    def p01(self) -> float:
        return float(self.p[0, 1])

    @property
    def p10(self) -> float:
        return float(self.p[1, 0])

    @property
    def p11(self) -> float:
        return float(self.p[1, 1])


@dataclass(frozen=True)
class JointDecision:
    a_hat: np.ndarray
    b_hat: np.ndarray


def charlie_variances(cfg: ProtocolConfig) -> tuple[float, float]:
    """Energy means of ``|y_C1|^2`` given Alice's bit 0 and 1."""
    s0 = cfg.alpha * cfg.rho + cfg.noise_power
    s1 = (1.0 - cfg.alpha) * cfg.sigma_ac2 + s0
    return s0, s1


def ml_energy_threshold(s0: float, s1: float) -> float:
    """Likelihood crossing of two zero-mean complex Gaussians, on ``|y|^2``."""
    if not s1 > s0:
        raise DegenerateDetectionError(
            f"detection is degenerate: sigma1^2={s1} must exceed sigma0^2={s0}"
        )
    return s0 * s1 / (s1 - s0) * np.log(s1 / s0)


def charlie_threshold(cfg: ProtocolConfig) -> float:
    return ml_energy_threshold(*charlie_variances(cfg))


def charlie_detect(y_c1, cfg: ProtocolConfig):
    """Non-coherent ML decision on Alice's OOK bit from ``y_C1``."""
    tau = charlie_threshold(cfg)
    return (np.abs(y_c1) ** 2 > tau).astype(np.int8)


def crossover_matrix(cfg: ProtocolConfig) -> CrossoverMatrix:
    # |y_C1|^2 is exponential with mean s0 (bit 0) or s1 (bit 1) under Rayleigh fading.
    s0, s1 = charlie_variances(cfg)
    tau = ml_energy_threshold(s0, s1)
    p01 = np.exp(-tau / s0)
    p10 = -np.expm1(-tau / s1)
    return CrossoverMatrix(np.array([[1.0 - p01, p01], [p10, 1.0 - p10]]))


def remove_dummy(y_b1, h_cb, z_d, cfg: ProtocolConfig):
    return y_b1 - np.sqrt(cfg.alpha) * h_cb * z_d


def _log_cn(y, mean, var):
    return -np.log(np.pi * var) - np.abs(y - mean) ** 2 / var


def _slot1_loglik(y_tilde, cfg):
    """Log-likelihood of the dummy-free slot-1 sample, h_AB integrated out.

    Returns shape ``(..., 2)`` indexed by Alice's hypothesised bit.
    """
    y = np.asarray(y_tilde)[..., None]
    var = np.array([0.0, 1.0 - cfg.alpha]) + cfg.noise_power
    return _log_cn(y, 0.0, var)


def _slot2_loglik(y_b2, h_cb, cfg):
    """Log-likelihood of ``y_B2`` for each (Charlie decision, PSK index).

    Returns shape ``(..., 2, M)``.
    """
    m = cfg.m
    z = psk_point(m, np.arange(m))
    rot = np.sqrt(2.0 - cfg.alpha) * np.exp(1j * np.pi / m)
    h = np.asarray(h_cb)[..., None, None]
    means = h * np.stack([rot * z, z])
    y = np.asarray(y_b2)[..., None, None]
    return _log_cn(y, means, cfg.noise_power)


def _argmax_joint(score, m):
    # flat index = a*M + b, so np.argmax's first-hit rule breaks ties by smallest (a, b)
    flat = score.reshape(score.shape[:-2] + (2 * m,))
    idx = np.argmax(flat, axis=-1)
    return JointDecision(a_hat=(idx // m).astype(np.int8), b_hat=(idx % m).astype(np.int64))


def rhjdd(y_tilde_b1, y_b2, h_cb, cfg: ProtocolConfig) -> JointDecision:
    """Dominant-term joint decoder: assumes Charlie relayed Alice's bit correctly."""
    l1 = _slot1_loglik(y_tilde_b1, cfg)
    l2 = _slot2_loglik(y_b2, h_cb, cfg)
    return _argmax_joint(l1[..., None] + l2, cfg.m)


def jmap(y_tilde_b1, y_b2, h_cb, cfg: ProtocolConfig, crossover: CrossoverMatrix) -> JointDecision:
    """Exact joint MAP decoder, mixing slot 2 over Charlie's possible decisions."""
    l1 = _slot1_loglik(y_tilde_b1, cfg)
    l2 = _slot2_loglik(y_b2, h_cb, cfg)
    with np.errstate(divide="ignore"):
        logp = np.log(crossover.p)
    # mixed[..., a, b] = log sum_xhat P[a, xhat] * f(y_B2 | xhat, b)
    mixed = np.logaddexp(
        logp[:, 0][:, None] + l2[..., 0:1, :],
        logp[:, 1][:, None] + l2[..., 1:2, :],
    )
    return _argmax_joint(l1[..., None] + mixed, cfg.m)
