"""Monte Carlo rates, the alpha sweep and the intersection search.

Trials are split into fixed-size blocks, each drawn from its own stream
``(master_seed, block)``.  Block results are integer counts (plus exactly
summed energies), so the outcome does not depend on how many worker
processes evaluate the blocks.  Reusing one stream for every ``alpha``
gives common random numbers across the sweep.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .adversary import (KldEstimate, dave_observe_fcb, energy_detect, knn_kld,
                        normalize_by_channel, pd_bound, pfa_bound)
from .config import ProtocolConfig
from .decoders import crossover_matrix, jmap, remove_dummy, rhjdd
from .protocol import (EnergyAudit, generate_frames, generate_pre_attack,
                       transmit_energies)
from .signal_core import InvalidParameterError, NoSolutionError, RngStream

BLOCK_SIZE = 1 << 16
Z95 = 1.959963984540054
EDGE = 1e-4


def block_stream(stream: RngStream, block: int) -> RngStream:
    return stream.child((int(stream.stream_id) << 32) + block)


def _block_sizes(trials: int):
    full, rest = divmod(int(trials), BLOCK_SIZE)
    return [BLOCK_SIZE] * full + ([rest] if rest else [])


def _map(fn, jobs, workers):
    if workers is None or workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def binomial_halfwidth(successes: int, trials: int, z: float = Z95) -> float:
    if trials == 0:
        return float("nan")
    p = successes / trials
    return float(z * math.sqrt(p * (1.0 - p) / trials))


@dataclass(frozen=True)
class RateEstimate:
    """Empirical probability with its normal-approximation confidence half-width."""

    count: int
    trials: int

    @property
    def rate(self) -> float:
        return self.count / self.trials if self.trials else float("nan")

    @property
    def halfwidth(self) -> float:
        return binomial_halfwidth(self.count, self.trials)

    @property
    def sigma(self) -> float:
        return self.halfwidth / Z95

    def __float__(self):
        return self.rate


@dataclass
class FrameStats:
    """Integer counts (and energy sums) accumulated over simulated frames."""

    frames: int = 0
    joint_errors: int = 0
    alice_errors: int = 0
    charlie_errors: int = 0
    relay_errors: int = 0
    usable: int = 0
    alarms: int = 0
    alarms_slot1: int = 0
    alarms_slot2: int = 0
    energy: dict = field(default_factory=dict)

    def __add__(self, other: "FrameStats") -> "FrameStats":
        out = FrameStats()
        for f in fields(self):
            if f.name == "energy":
                continue
            setattr(out, f.name, getattr(self, f.name) + getattr(other, f.name))
        keys = sorted(set(self.energy) | set(other.energy))
        out.energy = {k: math.fsum([self.energy.get(k, 0.0), other.energy.get(k, 0.0)])
                      for k in keys}
        return out

    def error_rate(self) -> RateEstimate:
        return RateEstimate(self.joint_errors, self.frames)

    def detection_rate(self) -> RateEstimate:
        return RateEstimate(self.alarms, self.usable)

    def energy_audit(self) -> EnergyAudit:
        e = {k: v / self.frames for k, v in self.energy.items()}
        return EnergyAudit(
            f_ab=(e["alice_ab"] + e["charlie_ab"]) / 2,
            f_cb=(e["alice_cb"] + e["charlie_cb"]) / 2,
            alice=(e["alice_ab"] + e["alice_cb"]) / 2,
            charlie=(e["charlie_ab"] + e["charlie_cb"]) / 2,
            frames=self.frames,
        )


def _frame_block(cfg: ProtocolConfig, stream: RngStream, n: int, decoder: str) -> FrameStats:
    fr = generate_frames(cfg, n, stream)
    y_tilde = remove_dummy(fr.y_b1, fr.h_cb, fr.z_d, cfg)
    if decoder == "jmap":
        dec = jmap(y_tilde, fr.y_b2, fr.h_cb, cfg, crossover_matrix(cfg))
    else:
        dec = rhjdd(y_tilde, fr.y_b2, fr.h_cb, cfg)
    a_err = dec.a_hat != fr.x
    c_err = dec.b_hat != fr.z_idx

    y1, y2, ok = dave_observe_fcb(fr, cfg)
    al1 = energy_detect(y1, cfg.delta, 1).alarm & ok
    al2 = energy_detect(y2, cfg.delta, 2).alarm & ok

    return FrameStats(
        frames=n,
        joint_errors=int(np.count_nonzero(a_err | c_err)),
        alice_errors=int(np.count_nonzero(a_err)),
        charlie_errors=int(np.count_nonzero(c_err)),
        relay_errors=int(np.count_nonzero(fr.x_hat != fr.x)),
        usable=int(np.count_nonzero(ok)),
        alarms=int(np.count_nonzero(al1 | al2)),
        alarms_slot1=int(np.count_nonzero(al1)),
        alarms_slot2=int(np.count_nonzero(al2)),
        energy={k: math.fsum(v.tolist()) for k, v in transmit_energies(fr).items()},
    )


def simulate_frames(cfg: ProtocolConfig, trials: int, stream: RngStream,
                    workers: int = 1, decoder: str = "rhjdd") -> FrameStats:
    """Run ``trials`` Rate-Half frames and accumulate decoding/detection statistics."""
    if trials < 1:
        raise InvalidParameterError(f"trials must be >= 1, got {trials}")
    if decoder not in ("rhjdd", "jmap"):
        raise InvalidParameterError(f"unknown decoder {decoder!r}")
    jobs = [(cfg, block_stream(stream, b), n, decoder)
            for b, n in enumerate(_block_sizes(trials))]
    parts = _map(_frame_block, jobs, workers)
    total = FrameStats()
    for p in parts:
        total = total + p
    return total


def mc_error_rate(cfg: ProtocolConfig, trials: int, stream: RngStream,
                  workers: int = 1, decoder: str = "rhjdd") -> RateEstimate:
    """Fraction of frames where Bob's joint decision differs from (x, z)."""
    return simulate_frames(cfg, trials, stream, workers, decoder).error_rate()


def mc_detection_rate(cfg: ProtocolConfig, trials: int, stream: RngStream,
                      workers: int = 1) -> RateEstimate:
    """Fraction of usable frames where either f_CB slot trips the energy detector."""
    return simulate_frames(cfg, trials, stream, workers).detection_rate()


def _false_alarm_block(cfg, stream, n):
    pre = generate_pre_attack(cfg, n, stream)
    y, ok = normalize_by_channel(pre.cb1, pre.h_cd1)
    alarm = energy_detect(y, cfg.delta).alarm & ok
    return int(np.count_nonzero(alarm)), int(np.count_nonzero(ok))


def mc_false_alarm_rate(cfg: ProtocolConfig, trials: int, stream: RngStream,
                        workers: int = 1) -> RateEstimate:
    """Per-sample alarm rate of the energy detector on plain PSK traffic."""
    jobs = [(cfg, block_stream(stream, b), n) for b, n in enumerate(_block_sizes(trials))]
    parts = _map(_false_alarm_block, jobs, workers)
    return RateEstimate(sum(p[0] for p in parts), sum(p[1] for p in parts))


def mc_crossover(cfg: ProtocolConfig, trials: int, stream: RngStream) -> tuple[RateEstimate, RateEstimate]:
    """Empirical (P_01, P_10) of Charlie's relay decision."""
    c01 = n0 = c10 = n1 = 0
    for b, n in enumerate(_block_sizes(trials)):
        fr = generate_frames(cfg, n, block_stream(stream, b))
        zero = fr.x == 0
        n0 += int(np.count_nonzero(zero))
        n1 += int(np.count_nonzero(~zero))
        c01 += int(np.count_nonzero(zero & (fr.x_hat == 1)))
        c10 += int(np.count_nonzero(~zero & (fr.x_hat == 0)))
    return RateEstimate(c01, n0), RateEstimate(c10, n1)


def detection_bound(cfg: ProtocolConfig) -> float:
    """Detection bound capped at 1; NaN where ``1 - delta < alpha`` fails."""
    if not cfg.bound_applicable:
        return float("nan")
    return min(1.0, pd_bound(cfg))


def find_root_bracketed(func, lo: float, hi: float, tol: float = 1e-4,
                        max_iter: int = 200) -> float:
    """Root of ``func`` on ``[lo, hi]`` by secant steps safeguarded with bisection.

    ``func(lo)`` and ``func(hi)`` must differ in sign.  Terminates once the
    bracket is narrower than ``tol`` and returns its midpoint, or returns
    immediately on an exact zero.
    """
    f_lo, f_hi = func(lo), func(hi)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if not np.isfinite(f_lo) or not np.isfinite(f_hi) or np.sign(f_lo) == np.sign(f_hi):
        raise NoSolutionError(f"no sign change on [{lo}, {hi}]: g={f_lo:.6g}, {f_hi:.6g}")
    width_before = hi - lo
    use_secant = True
    for _ in range(max_iter):
        if hi - lo < tol:
            break
        mid = 0.5 * (lo + hi)
        x = mid
        if use_secant and f_hi != f_lo:
            s = hi - f_hi * (hi - lo) / (f_hi - f_lo)
            if lo < s < hi:
                x = s
        fx = func(x)
        if fx == 0:
            return x
        if np.sign(fx) == np.sign(f_lo):
            lo, f_lo = x, fx
        else:
            hi, f_hi = x, fx
        # fall back to bisection whenever a step fails to halve the bracket
        use_secant = (hi - lo) <= 0.5 * width_before
        width_before = hi - lo
    return 0.5 * (lo + hi)


def find_intersection(curve_a, curve_b, lo: float, hi: float, tol: float = 1e-4) -> float:
    return find_root_bracketed(lambda t: curve_a(t) - curve_b(t), lo, hi, tol)


def find_alpha_star(cfg_template: ProtocolConfig, trials: int, tol: float = 1e-4,
                    stream: RngStream | None = None, detection: str = "bound",
                    bracket: tuple[float, float] | None = None, workers: int = 1) -> float:
    """Energy division factor where Bob's error rate meets Dave's detection rate.

    The error side is always Monte Carlo with a fixed stream, so every
    evaluation reuses the same frames.  The detection side is the closed
    form bound (``detection="bound"``) or Monte Carlo (``"mc"``).
    """
    stream = stream if stream is not None else RngStream(0)
    if bracket is None:
        bracket = (1.0 - cfg_template.delta + EDGE, 1.0 - EDGE)

    def g(alpha):
        cfg = cfg_template.with_alpha(alpha)
        stats = simulate_frames(cfg, trials, stream, workers)
        if detection == "mc":
            p_ud = stats.detection_rate().rate
        else:
            p_ud = detection_bound(cfg)
        return stats.error_rate().rate - p_ud

    return find_root_bracketed(g, bracket[0], bracket[1], tol)


@dataclass
class SweepResult:
    alphas: list
    p_ue: list
    p_ue_ci: list
    p_ud_bound: list
    p_ud_mc: list
    p_ud_mc_ci: list
    p_sum: list
    alpha_star: float | None
    alpha_min_sum: float | None
    trials_per_point: int
    detection: str = "bound"

    @property
    def confidence_halfwidth(self):
        return self.p_ue_ci

    @property
    def p_ud(self):
        return self.p_ud_bound if self.detection == "bound" else self.p_ud_mc


def sweep_alpha(cfg_template: ProtocolConfig, alpha_grid, trials: int,
                stream: RngStream | None = None, detection: str = "bound",
                workers: int = 1, tol: float = 1e-4) -> SweepResult:
    """Evaluate error and detection curves on a grid and locate alpha*.

    ``alpha_star`` refines the first grid cell where ``P_UE - P_UD`` changes
    sign; it is None for single-point grids or when no sign change exists.
    """
    alphas = [float(a) for a in alpha_grid]
    if not alphas:
        raise InvalidParameterError("alpha grid is empty")
    if any(not 0.0 < a < 1.0 for a in alphas):
        raise InvalidParameterError("alpha grid values must lie in (0, 1)")
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise InvalidParameterError("alpha grid must be strictly ascending")
    if detection not in ("bound", "mc"):
        raise InvalidParameterError(f"unknown detection mode {detection!r}")
    stream = stream if stream is not None else RngStream(0)

    rows = []
    for a in alphas:
        cfg = cfg_template.with_alpha(a)
        stats = simulate_frames(cfg, trials, stream, workers)
        ue, ud = stats.error_rate(), stats.detection_rate()
        rows.append((ue.rate, ue.halfwidth, detection_bound(cfg), ud.rate, ud.halfwidth))
    p_ue, p_ue_ci, p_bound, p_mc, p_mc_ci = (list(c) for c in zip(*rows))
    p_ud = p_bound if detection == "bound" else p_mc
    p_sum = [u + d for u, d in zip(p_ue, p_ud)]

    finite = [i for i, s in enumerate(p_sum) if np.isfinite(s)]
    alpha_min_sum = alphas[min(finite, key=lambda i: p_sum[i])] if finite else None

    alpha_star = None
    if len(alphas) > 1:
        g = [u - d for u, d in zip(p_ue, p_ud)]
        for i in range(len(alphas) - 1):
            if np.isfinite(g[i]) and np.isfinite(g[i + 1]) and g[i] * g[i + 1] <= 0:
                alpha_star = find_alpha_star(cfg_template, trials, tol, stream, detection,
                                             (alphas[i], alphas[i + 1]), workers)
                break

    return SweepResult(alphas=alphas, p_ue=p_ue, p_ue_ci=p_ue_ci, p_ud_bound=p_bound,
                       p_ud_mc=p_mc, p_ud_mc_ci=p_mc_ci, p_sum=p_sum, alpha_star=alpha_star,
                       alpha_min_sum=alpha_min_sum, trials_per_point=int(trials),
                       detection=detection)


KLD_CHANNELS = (("f_AB", 1), ("f_AB", 2), ("f_CB", 1), ("f_CB", 2))


def _kld_repetition(cfg, stream, n, k):
    post = generate_frames(cfg, n, stream)
    pre = generate_pre_attack(cfg, n, stream)
    pairs = [(pre.ab1, post.y_ab1), (pre.ab2, post.y_ab2),
             (pre.cb1, post.y_d1), (pre.cb2, post.y_d2)]
    return [knn_kld(before, after, k).value for before, after in pairs]


def kld_report(cfg: ProtocolConfig, n_samples: int, stream: RngStream | None = None,
               repetitions: int = 10, k: int = 1, workers: int = 1) -> dict:
    """Before/after KL divergence seen by Dave on each band and slot.

    Returns ``{(band, slot): KldEstimate}`` with values averaged over
    ``repetitions`` independent sample sets.  Dave's raw (un-normalised)
    samples are compared.
    """
    if n_samples < k + 1:
        raise InvalidParameterError(f"n_samples must be >= {k + 1}")
    stream = stream if stream is not None else RngStream(0)
    jobs = [(cfg, block_stream(stream, r), n_samples, k) for r in range(repetitions)]
    values = np.array(_map(_kld_repetition, jobs, workers))
    return {
        ch: KldEstimate(value=float(math.fsum(values[:, i]) / repetitions), k=k,
                        n_before=n_samples, n_after=n_samples)
        for i, ch in enumerate(KLD_CHANNELS)
    }


def false_alarm_bound(cfg: ProtocolConfig) -> float:
    return pfa_bound(cfg.delta, cfg.noise_power)
