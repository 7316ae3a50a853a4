"""Rate-Half frame assembly on both bands.

One frame spans two time slots.  On Charlie's band (f_CB) Alice sends her
OOK bit with energy ``1 - alpha`` next to a dummy PSK symbol from Charlie,
then Charlie relays his own PSK symbol, scaled and rotated whenever he
decoded Alice's bit as 0.  On Alice's jammed band (f_AB) the pair keeps
the pre-attack OOK statistics: a key-driven joint burst in slot 1 and a
dummy OOK symbol from Alice in slot 2.

Frames are generated in batches.  All random inputs are drawn with unit
scale first and scaled afterwards, so two batches from the same stream
at different ``alpha`` share their random numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .config import ProtocolConfig
from .decoders import charlie_detect
from .signal_core import InvalidParameterError, RngStream, psk_point, standard_complex_normal

# substream ids
POST_ATTACK = 0
PRE_ATTACK = 1


def fcb_slot1(cfg: ProtocolConfig, x, z_d, h_ab, h_cb, h_ac, h_cc, n_b1=0.0, n_c1=0.0):
    """Slot-1 samples on f_CB at Bob and at Charlie's full-duplex receiver."""
    a = np.sqrt(1.0 - cfg.alpha) * x
    y_b1 = a * h_ab + np.sqrt(cfg.alpha) * h_cb * z_d + n_b1
    y_c1 = a * h_ac + h_cc + n_c1
    return y_b1, y_c1


def charlie_slot2_symbol(cfg: ProtocolConfig, x_hat, z):
    """Charlie's slot-2 transmission: plain PSK if he decoded 1, else scaled and rotated."""
    alt = np.sqrt(2.0 - cfg.alpha) * np.exp(1j * np.pi / cfg.m) * z
    return np.where(np.asarray(x_hat) == 1, z, alt)


def fcb_slot2(cfg: ProtocolConfig, x_hat, z, h_cb, noise=0.0):
    return h_cb * charlie_slot2_symbol(cfg, x_hat, z) + noise


def fab_slot1(cfg: ProtocolConfig, key_bit, h_ad, h_cd, noise=0.0):
    """Key-driven joint burst observed by Dave on f_AB."""
    burst = np.sqrt(cfg.alpha) * h_ad + np.sqrt(1.0 - cfg.alpha) * h_cd
    return np.where(np.asarray(key_bit) == 1, burst, 0.0) + noise


def fab_slot2(cfg: ProtocolConfig, x_d, h_ad, noise=0.0):
    return h_ad * x_d + noise


@dataclass
class FrameBatch:
    """A batch of Rate-Half frames, one array entry per frame.

    Received samples: ``y_b1``, ``y_b2`` at Bob, ``y_c1`` at Charlie,
    ``y_d1``, ``y_d2`` at Dave on f_CB and ``y_ab1``, ``y_ab2`` at Dave on f_AB.
    """

    cfg: ProtocolConfig
    x: np.ndarray
    z_idx: np.ndarray
    zd_idx: np.ndarray
    x_d: np.ndarray
    key: np.ndarray
    x_hat: np.ndarray
    h_ab: np.ndarray
    h_cb: np.ndarray
    h_ac: np.ndarray
    h_cc: np.ndarray
    h_ad: np.ndarray
    h_cd: np.ndarray
    n_b1: np.ndarray
    n_b2: np.ndarray
    n_c1: np.ndarray
    n_d1: np.ndarray
    n_d2: np.ndarray
    n_ab1: np.ndarray
    n_ab2: np.ndarray
    y_b1: np.ndarray
    y_b2: np.ndarray
    y_c1: np.ndarray
    y_d1: np.ndarray
    y_d2: np.ndarray
    y_ab1: np.ndarray
    y_ab2: np.ndarray

    def __len__(self):
        return len(self.x)

    @property
    def z(self):
        return psk_point(self.cfg.m, self.z_idx)

    @property
    def z_d(self):
        return psk_point(self.cfg.m, self.zd_idx)

    def frame(self, i: int) -> dict:
        """Scalar view of frame ``i``."""
        return {f.name: getattr(self, f.name)[i] for f in fields(self) if f.name != "cfg"}


def assemble_frames(cfg: ProtocolConfig, *, x, z_idx, zd_idx, x_d, key, h_ab, h_cb, h_ac,
                    h_cc_unit, h_ad, h_cd, n_b1, n_b2, n_c1, n_d1, n_d2, n_ab1, n_ab2,
                    x_hat=None) -> FrameBatch:
    """Build every received sample from given inputs.

    ``h_cc_unit`` is the loop-interference draw at unit variance; it is
    scaled by ``sqrt(alpha * rho)`` here.  ``x_hat`` defaults to Charlie's
    ML decision on his own slot-1 sample.
    """
    z = psk_point(cfg.m, z_idx)
    z_d = psk_point(cfg.m, zd_idx)
    h_cc = np.sqrt(cfg.alpha * cfg.rho) * h_cc_unit
    y_b1, y_c1 = fcb_slot1(cfg, x, z_d, h_ab, h_cb, h_ac, h_cc, n_b1, n_c1)
    if x_hat is None:
        x_hat = charlie_detect(y_c1, cfg)
    x_hat = np.asarray(x_hat, dtype=np.int8)
    y_b2 = fcb_slot2(cfg, x_hat, z, h_cb, n_b2)
    # Dave on f_CB: same constructions seen through his own channels
    y_d1 = np.sqrt(1.0 - cfg.alpha) * h_ad * x + np.sqrt(cfg.alpha) * h_cd * z_d + n_d1
    y_d2 = fcb_slot2(cfg, x_hat, z, h_cd, n_d2)
    y_ab1 = fab_slot1(cfg, key, h_ad, h_cd, n_ab1)
    y_ab2 = fab_slot2(cfg, x_d, h_ad, n_ab2)
    return FrameBatch(
        cfg=cfg, x=np.asarray(x, dtype=np.int8), z_idx=np.asarray(z_idx),
        zd_idx=np.asarray(zd_idx), x_d=np.asarray(x_d, dtype=np.int8),
        key=np.asarray(key, dtype=np.int8), x_hat=x_hat,
        h_ab=h_ab, h_cb=h_cb, h_ac=h_ac, h_cc=h_cc, h_ad=h_ad, h_cd=h_cd,
        n_b1=n_b1, n_b2=n_b2, n_c1=n_c1, n_d1=n_d1, n_d2=n_d2, n_ab1=n_ab1, n_ab2=n_ab2,
        y_b1=y_b1, y_b2=y_b2, y_c1=y_c1, y_d1=y_d1, y_d2=y_d2, y_ab1=y_ab1, y_ab2=y_ab2,
    )


def generate_frames(cfg: ProtocolConfig, n: int, stream: RngStream) -> FrameBatch:
    """Draw ``n`` independent frames from ``stream``.

    Bits, key bits and PSK indices are i.i.d. uniform; the dummy index is
    shared with Bob through the key.
    """
    if n < 1:
        raise InvalidParameterError(f"need at least one frame, got {n}")
    rng = stream.with_substream(POST_ATTACK).generator()
    x = rng.integers(0, 2, n)
    z_idx = rng.integers(0, cfg.m, n)
    zd_idx = rng.integers(0, cfg.m, n)
    x_d = rng.integers(0, 2, n)
    key = rng.integers(0, 2, n)
    g = standard_complex_normal(rng, (13, n))
    noise = np.sqrt(cfg.noise_power) * g[6:]
    return assemble_frames(
        cfg, x=x, z_idx=z_idx, zd_idx=zd_idx, x_d=x_d, key=key,
        h_ab=g[0], h_cb=g[1], h_ac=np.sqrt(cfg.sigma_ac2) * g[2], h_cc_unit=g[3],
        h_ad=g[4], h_cd=g[5],
        n_b1=noise[0], n_b2=noise[1], n_c1=noise[2], n_d1=noise[3], n_d2=noise[4],
        n_ab1=noise[5], n_ab2=noise[6],
    )


@dataclass
class PreAttackBatch:
    """Dave's observations while no countermeasure runs.

    f_AB carries Alice's unit-energy OOK, f_CB carries Charlie's unit-energy
    PSK; two independent slots per band.
    """

    cfg: ProtocolConfig
    ab1: np.ndarray
    ab2: np.ndarray
    cb1: np.ndarray
    cb2: np.ndarray
    h_cd1: np.ndarray
    h_cd2: np.ndarray


def generate_pre_attack(cfg: ProtocolConfig, n: int, stream: RngStream) -> PreAttackBatch:
    if n < 1:
        raise InvalidParameterError(f"need at least one frame, got {n}")
    rng = stream.with_substream(PRE_ATTACK).generator()
    bits = rng.integers(0, 2, (2, n))
    idx = rng.integers(0, cfg.m, (2, n))
    g = standard_complex_normal(rng, (8, n))
    noise = np.sqrt(cfg.noise_power) * g[4:]
    y = psk_point(cfg.m, idx)
    return PreAttackBatch(
        cfg=cfg,
        ab1=g[0] * bits[0] + noise[0],
        ab2=g[1] * bits[1] + noise[1],
        cb1=g[2] * y[0] + noise[2],
        cb2=g[3] * y[1] + noise[3],
        h_cd1=g[2],
        h_cd2=g[3],
    )


@dataclass(frozen=True)
class EnergyAudit:
    """Average transmit energy per time slot over a two-slot frame."""

    f_ab: float
    f_cb: float
    alice: float
    charlie: float
    frames: int

    def to_dict(self) -> dict:
        return {"f_ab": self.f_ab, "f_cb": self.f_cb, "alice": self.alice,
                "charlie": self.charlie, "frames": self.frames}


def transmit_energies(frames: FrameBatch) -> dict[str, np.ndarray]:
    """Per-frame transmit energy by (user, band), summed over both slots."""
    a = frames.cfg.alpha
    key = frames.key.astype(float)
    charlie_cb2 = np.abs(charlie_slot2_symbol(frames.cfg, frames.x_hat, frames.z)) ** 2
    return {
        "alice_cb": (1.0 - a) * frames.x,
        "alice_ab": a * key + frames.x_d,
        "charlie_cb": a * np.abs(frames.z_d) ** 2 + charlie_cb2,
        "charlie_ab": (1.0 - a) * key,
    }


def energy_audit(frames) -> EnergyAudit:
    """Average transmit energies over one batch or a sequence of batches."""
    batches = [frames] if isinstance(frames, FrameBatch) else list(frames or [])
    total = sum(len(b) for b in batches)
    if total == 0:
        raise InvalidParameterError("energy audit needs at least one frame")
    parts = [transmit_energies(b) for b in batches]
    e = {k: math.fsum(float(np.sum(p[k])) for p in parts) / total for k in parts[0]}
    return EnergyAudit(
        f_ab=(e["alice_ab"] + e["charlie_ab"]) / 2,
        f_cb=(e["alice_cb"] + e["charlie_cb"]) / 2,
        alice=(e["alice_ab"] + e["alice_cb"]) / 2,
        charlie=(e["charlie_ab"] + e["charlie_cb"]) / 2,
        frames=total,
    )
