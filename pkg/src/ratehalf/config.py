from __future__ import annotations

from dataclasses import asdict, dataclass, replace

from .signal_core import InvalidParameterError, snr_db_to_noise_power

# Values the experiments never pin down; overridable everywhere.
DEFAULT_M = 4
DEFAULT_RHO = 0.1
DEFAULT_SIGMA_AC2 = 1.0


def _open_unit(name, value):
    if not 0.0 < value < 1.0:
        raise InvalidParameterError(f"{name} must lie in (0, 1), got {value}")


@dataclass(frozen=True)
class ProtocolConfig:
    """Scenario parameters of one Rate-Half operating point.

    alpha      energy division factor
    m          PSK order used by Charlie
    noise_power  AWGN variance N at every receiver
    rho        loop-interference cancellation parameter at Charlie
    sigma_ac2  variance of the Alice-Charlie channel
    delta      allowed energy deviation of Dave's energy detector
    """

    alpha: float = 0.99885
    m: int = DEFAULT_M
    noise_power: float = snr_db_to_noise_power(35.0)
    rho: float = DEFAULT_RHO
    sigma_ac2: float = DEFAULT_SIGMA_AC2
    delta: float = 0.495

    def __post_init__(self):
        _open_unit("alpha", self.alpha)
        _open_unit("rho", self.rho)
        _open_unit("delta", self.delta)
        if int(self.m) != self.m or self.m < 2:
            raise InvalidParameterError(f"m must be an integer >= 2, got {self.m}")
        if not self.noise_power > 0:
            raise InvalidParameterError(f"noise_power must be > 0, got {self.noise_power}")
        if not self.sigma_ac2 > 0:
            raise InvalidParameterError(f"sigma_ac2 must be > 0, got {self.sigma_ac2}")

    @classmethod
    def from_snr_db(cls, snr_db: float, **kwargs) -> "ProtocolConfig":
        return cls(noise_power=snr_db_to_noise_power(snr_db), **kwargs)

    @property
    def bound_applicable(self) -> bool:
        """Whether the detection bound's ``1 - delta < alpha`` condition holds."""
        return 1.0 - self.delta < self.alpha

    def with_alpha(self, alpha: float) -> "ProtocolConfig":
        return replace(self, alpha=float(alpha))

    def to_dict(self) -> dict:
        return asdict(self)
