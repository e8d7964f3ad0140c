"""State-space model core: the 5x5 system matrix and its exact eigenstructure.

State vector x = (m1, m2, m3, f, f') where m1..m3 are the integrator chain
of the compensator and (f, f') the output-filter state.  The closed loop
obeys

    x' = N x + u(t) e1 + (g(t) + k v(t)) / (LC) e5,

with g the +-1 pulse train and v the sawtooth carrier.  N has the exactly
known spectrum {0, +i*omega1, -i*omega1, -mu+i*Omega, -mu-i*Omega}, so all
propagation in this package is done in the modal basis rather than through
a general-purpose matrix exponential.

Two families of iterated forcing integrals recur everywhere:

    P0(t) = e^{Nt} e1,   P_{n+1}(t) = int_0^t P_n   (input channel),
    Q0(t) = e^{Nt} e5,   Q_{n+1}(t) = int_0^t Q_n   (switching channel).

P_n is closed-form in the iterated cosine integrals phi_n; Q_n is evaluated
mode by mode through the iterated exponential integrals eta_n.  No numerical
quadrature is used outside the test oracles.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np

from .errors import DegenerateSpectrumError, ResidueError
from .params import AmplifierParams

#: imaginary residue allowed in quantities that must come out real,
#: relative to the magnitude of the result
IMAG_RESIDUE_RTOL = 1e-9


def build_system_matrix(params: AmplifierParams) -> np.ndarray:
    """Assemble the closed-loop system matrix N (real, 5x5).

    Rows 1-3 are the integrator chain with the resonator cross-coupling
    -omega1^2 and the -1 coupling from the filter output f into the error
    integrator; rows 4-5 are the damped LC filter.
    """
    N = np.zeros((5, 5))
    N[0, 3] = -1.0
    N[1, 0] = 1.0
    N[1, 2] = -params.omega1**2
    N[2, 1] = 1.0
    N[3, 4] = 1.0
    N[4, 3] = -1.0 / params.LC
    N[4, 4] = -1.0 / params.RC
    return N


@dataclass(frozen=True)
class ModalDecomposition:
    """Exact eigenstructure of N.

    ``left_eigvecs`` is the matrix inverse of ``right_eigvecs``: the pairs
    are biorthogonal with v_j . w_j = 1.  Row 1 of the left matrix is the
    zero left eigenvector v1 = (-1/LC, 0, 0, 1/RC, 1) exactly, and column 1
    of the right matrix is w1 = (-LC, 0, -LC/omega1^2, 0, 0)^T exactly;
    this pair already satisfies v1 . w1 = 1 without rescaling.
    """

    eigenvalues: np.ndarray     # (5,) complex: 0, +i w1, -i w1, -mu+i W, -mu-i W
    right_eigvecs: np.ndarray   # (5,5) complex, columns w1..w5
    left_eigvecs: np.ndarray    # (5,5) complex, rows v1..v5 = inverse of right
    mu: float
    capital_omega: float

    @property
    def v1(self) -> np.ndarray:
        return self.left_eigvecs[0].real.copy()

    @property
    def w1(self) -> np.ndarray:
        return self.right_eigvecs[:, 0].real.copy()


@lru_cache(maxsize=64)
def modal_decomposition(params: AmplifierParams) -> ModalDecomposition:
    """Diagonalise N analytically.

    The eigenvectors follow from the sparsity of N.  For the resonator pair
    (lambda = +-i omega1) the filter states vanish; for the filter pair
    (lambda = -mu +- i Omega) the compensator states of the right vector
    vanish instead and the left vector lives purely on the filter block.
    Remaining pairs are rescaled so that v_j . w_j = 1 (making the left
    matrix the exact inverse of the right one) with the free split chosen
    to balance the two norms.
    """
    w1, LC, RC = params.omega1, params.LC, params.RC
    mu = params.mu
    Om = params.capital_omega

    # eigenvalue collisions break the construction
    scale = max(w1, Om)
    if abs(w1 - Om) < 1e-9 * scale or w1 < 1e-12 * scale or Om < 1e-12 * scale:
        raise DegenerateSpectrumError(
            f"resonator at {w1} rad/s collides with filter mode at {Om} rad/s"
        )

    lam = np.array(
        [0.0, 1j * w1, -1j * w1, -mu + 1j * Om, -mu - 1j * Om], dtype=complex
    )

    right = np.zeros((5, 5), dtype=complex)
    left = np.zeros((5, 5), dtype=complex)

    right[:, 0] = [-LC, 0.0, -LC / w1**2, 0.0, 0.0]
    left[0, :] = [-1.0 / LC, 0.0, 0.0, 1.0 / RC, 1.0]

    for j in (1, 2):                       # resonator pair
        l = lam[j]
        right[:, j] = [0.0, l, 1.0, 0.0, 0.0]
        v5 = -(1.0 / l) / (l * l + l / RC + 1.0 / LC)
        left[j, :] = [1.0 / l, 1.0, l, (l + 1.0 / RC) * v5, v5]

    for j in (3, 4):                       # filter pair
        l = lam[j]
        right[:, j] = [-1.0 / l, -1.0 / (l * l + w1**2),
                       -1.0 / (l * (l * l + w1**2)), 1.0, l]
        left[j, :] = [0.0, 0.0, 0.0, -1.0 / (l * LC), 1.0]

    for j in range(1, 5):
        pairing = left[j] @ right[:, j]
        left[j] /= pairing
        split = np.sqrt(np.abs(left[j]).max() / np.abs(right[:, j]).max())
        right[:, j] *= split
        left[j] /= split

    return ModalDecomposition(
        eigenvalues=lam, right_eigvecs=right, left_eigvecs=left,
        mu=mu, capital_omega=Om,
    )


@lru_cache(maxsize=512)
def _phi_closed_form(n: int, omega1: float):
    """Coefficients of phi_n(t) = poly(t) + a cos(omega1 t) + b sin(omega1 t).

    phi_{-1} = cos(omega1 t); each integration maps (poly, a, b) to
    (int poly + b/omega1, -b/omega1, a/omega1), keeping the family exact
    for every order.
    """
    poly: tuple = ()
    a, b = 1.0, 0.0
    for _ in range(n + 1):
        integrated = [0.0] * (len(poly) + 1)
        for m, cm in enumerate(poly):
            integrated[m + 1] = cm / (m + 1)
        integrated[0] += b / omega1
        a, b = -b / omega1, a / omega1
        poly = tuple(integrated)
    return poly, a, b


def phi(n: int, t, omega1: float):
    """n-fold iterated integral (from 0) of cos(omega1 t); n >= -1.

    Accepts scalar or array t and is exact (closed form) for every order.
    """
    if n < -1:
        raise ValueError(f"phi order must be >= -1, got {n}")
    poly, a, b = _phi_closed_form(n, omega1)
    t = np.asarray(t, dtype=float)
    val = np.zeros_like(t)
    for cm in reversed(poly):
        val = val * t + cm
    out = val + a * np.cos(omega1 * t) + b * np.sin(omega1 * t)
    return float(out) if out.ndim == 0 else out


def p_vec(n: int, t: float, params: AmplifierParams) -> np.ndarray:
    """Input-channel integral P_n(t) = (t^n/n!) e1 + phi_n(t) e2 + phi_{n+1}(t) e3."""
    if n < 0:
        raise ValueError(f"p_vec order must be >= 0, got {n}")
    out = np.zeros(5)
    out[0] = t**n / factorial(n)
    out[1] = phi(n, t, params.omega1)
    out[2] = phi(n + 1, t, params.omega1)
    return out


def eta(n: int, lam: complex, t: float) -> complex:
    """n-fold iterated integral (from 0) of e^{lam t}.

    Closed form (e^{lam t} - truncated exponential)/lam^n suffers
    cancellation for small |lam t|, so a power series is used there;
    both branches are exact to round-off in their regions.
    """
    if lam == 0:
        return t**n / factorial(n)
    z = lam * t
    if abs(z) < 1.0:
        total = 0.0 + 0.0j
        term = complex(t**n / factorial(n))
        m = 0
        while m < 300:
            total += term
            m += 1
            term *= z / (m + n)
            if abs(term) <= 1e-18 * max(abs(total), 1e-300):
                break
        return total
    total = np.exp(z)
    for m in range(n):
        total -= z**m / factorial(m)
    return total / lam**n


def q_vec(n: int, t: float, params: AmplifierParams) -> np.ndarray:
    """Switching-channel integral Q_n(t), evaluated in the modal basis.

    Q_n(t) = R diag(eta_n(lambda_j, t)) R^{-1} e5; the result is real, and
    the imaginary residue left by the conjugate pairing is checked.
    """
    if n < 0:
        raise ValueError(f"q_vec order must be >= 0, got {n}")
    dec = modal_decomposition(params)
    diag = np.array([eta(n, l, t) for l in dec.eigenvalues])
    out = dec.right_eigvecs @ (diag * dec.left_eigvecs[:, 4])
    return _take_real(out, f"q_vec({n}, {t})")


def matrix_exp(params: AmplifierParams, t: float) -> np.ndarray:
    """Propagator e^{Nt} = R diag(e^{lambda t}) R^{-1}, real part.

    Raises ResidueError when the discarded imaginary part is not round-off
    noise, which would indicate a broken decomposition.
    """
    dec = modal_decomposition(params)
    out = (dec.right_eigvecs * np.exp(dec.eigenvalues * t)) @ dec.left_eigvecs
    return _take_real(out, f"matrix_exp(t={t})")


def _take_real(values: np.ndarray, label: str) -> np.ndarray:
    scale = np.abs(values).max()
    resid = np.abs(values.imag).max()
    if scale > 0 and resid > IMAG_RESIDUE_RTOL * scale:
        raise ResidueError(
            f"{label}: imaginary residue {resid:.3e} exceeds "
            f"{IMAG_RESIDUE_RTOL:.0e} of scale {scale:.3e}"
        )
    values = values.real
    return float(values) if values.ndim == 0 else values
