"""Circuit and compensator constants of the third-order class-D amplifier.

The power stage is a second-order LC low-pass (L, C) loaded by R; the
compensator is a chain of three integrators with gains c1, c2, c3 and a
local resonator loop at omega1.  T is the sawtooth carrier period.  All
values are SI.  k switches ripple compensation: with k = 1 the loop filter
sees the pulse train plus the carrier (a linear ramp), with k = 0 the pulse
train alone.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AmplifierParams:
    """Amplifier constants. Frozen and hashable so derived decompositions
    can be cached per parameter set."""

    R: float        # load resistance, ohm
    L: float        # filter inductance, H
    C: float        # filter capacitance, F
    T: float        # carrier period, s
    c1: float       # compensator gain, 1/s
    c2: float       # compensator gain, 1/s^2
    c3: float       # compensator gain, 1/s^3
    omega1: float   # resonator frequency, rad/s
    k: int = 0      # ripple compensation flag, 0 or 1

    def __post_init__(self):
        for name in ("R", "L", "C", "T", "omega1"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")
        for name in ("c1", "c2", "c3"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.k not in (0, 1):
            raise ValueError(f"k must be 0 or 1, got {self.k!r}")
        # underdamped output filter: ring frequency must be real
        if 1.0 / (self.L * self.C) <= 1.0 / (4.0 * self.R**2 * self.C**2):
            raise ValueError(
                "L, C, R violate the underdamping condition 1/(LC) > 1/(4 R^2 C^2)"
            )

    @property
    def LC(self) -> float:
        return self.L * self.C

    @property
    def RC(self) -> float:
        return self.R * self.C

    @property
    def mu(self) -> float:
        """Filter damping rate 1/(2RC), 1/s."""
        return 1.0 / (2.0 * self.RC)

    @property
    def capital_omega(self) -> float:
        """Filter ring frequency sqrt(1/LC - 1/(4R^2C^2)), rad/s."""
        return float(np.sqrt(1.0 / self.LC - self.mu**2))

    @property
    def gamma(self) -> np.ndarray:
        """Compensator output weights (c1, c2, c3, 0, 0) as a row vector."""
        return np.array([self.c1, self.c2, self.c3, 0.0, 0.0])

    def replace(self, **changes) -> "AmplifierParams":
        return dataclasses.replace(self, **changes)


#: Reference design point used by the shipped configs and the test suite:
#: 384 kHz carrier, 8 ohm load, second-order LC recovery filter.
REFERENCE_DESIGN = AmplifierParams(
    R=8.0,
    L=10e-6,
    C=0.5169e-6,
    T=1.0 / 384000.0,
    c1=1.3318e5,
    c2=1.3763e10,
    c3=-1.0747e14,
    omega1=1.3195e5,
    k=0,
)
