"""Drive configuration and unit conventions.

Fields are in mT, linear frequencies in MHz and angular frequencies in rad/us.
The gyromagnetic ratio is stored in the linear convention (MHz/mT) so that
``freq / gamma`` is directly the one-photon resonance field in mT.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

# One-photon field of the three-photon line at 100 MHz: 10.705 mT / 3.
_ANCHOR_FREQ_MHZ = 100.0
_ANCHOR_THREE_PHOTON_FIELD_MT = 10.705


def default_gamma() -> float:
    """Gyromagnetic ratio in MHz/mT implied by 3*omega/gamma = 10.705 mT at 100 MHz."""
    return _ANCHOR_FREQ_MHZ / (_ANCHOR_THREE_PHOTON_FIELD_MT / 3.0)


@dataclass(frozen=True)
class DriveParams:
    """Linearly polarized cw drive.

    Attributes:
        b1: Drive amplitude in mT (peak value of the linear field).
        freq: Drive frequency in MHz.
        theta: Angle between drive and static field in degrees.
        gamma: Gyromagnetic ratio in MHz/mT.
    """

    b1: float
    freq: float = 100.0
    theta: float = 90.0
    gamma: float = field(default_factory=default_gamma)

    def __post_init__(self):
        for name in ("b1", "freq", "theta", "gamma"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.b1 < 0:
            raise ValueError(f"b1 must be >= 0, got {self.b1}")
        if self.freq <= 0:
            raise ValueError(f"freq must be > 0, got {self.freq}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not 0.0 <= self.theta <= 90.0:
            raise ValueError(f"theta must lie in [0, 90] degrees, got {self.theta}")

    @property
    def omega(self) -> float:
        """Angular drive frequency in rad/us."""
        return 2.0 * math.pi * self.freq

    @property
    def gamma_angular(self) -> float:
        """Gyromagnetic ratio in rad/us/mT."""
        return 2.0 * math.pi * self.gamma

    @property
    def reference_field(self) -> float:
        """One-photon resonance field omega/gamma in mT."""
        return self.freq / self.gamma

    @property
    def theta_rad(self) -> float:
        return math.radians(self.theta)

    def replace(self, **changes) -> DriveParams:
        values = asdict(self)
        values.update(changes)
        return DriveParams(**values)

    def to_dict(self) -> dict:
        return asdict(self)
