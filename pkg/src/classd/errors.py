"""Exception hierarchy for the classd toolkit."""


class ClassDError(Exception):
    """Base class for all toolkit errors."""


class DegenerateSpectrumError(ClassDError):
    """Eigenvalue collision: the analytic modal decomposition does not exist."""


class ResidueError(ClassDError):
    """A quantity that must be real carries too large an imaginary residue."""


class SingularSystemError(ClassDError):
    """The reduced periodic-operation system is numerically singular."""


class TransversalityError(ClassDError):
    """Compensator output grazes the carrier: switching is not transversal."""


class PoleError(ClassDError):
    """Scalar eigenvalue form evaluated at (or too close to) one of its poles."""


class ResonanceError(ClassDError):
    """Carrier period resonant with a system mode, or drive frequency hits
    an eigenvalue of the period map."""


class NoCrossingError(ClassDError):
    """No comparator crossing in the examined interval (pulse skip)."""


class NoRootError(ClassDError):
    """Discrete-map duty-cycle equation has no root in (0, 1) (saturation)."""


class NoSignChangeError(ClassDError):
    """Bisection bracket endpoints lie on the same side of the threshold."""


class ToleranceError(ClassDError):
    """A root bracket or iterative refinement could not reach its tolerance."""


class SaturationError(ClassDError):
    """Input amplitude reaches the duty-cycle saturation boundary |u| = 1."""


class WindowError(ClassDError):
    """Analysis window misaligned or not commensurate with the signal periods."""


class ConfigError(ClassDError):
    """Invalid experiment configuration; message names the offending key."""
