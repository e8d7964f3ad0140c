"""Small-signal model: closed-form audio-band transfer function.

Linearising the edge-to-edge map about the steady state gives

    N_map = e^{NT} (I + (T kappa / LC) e5 gamma^T),

and a band-limited input disturbance at angular frequency |omega| < pi/T
reaches the output with gain

    H(omega) = kappa gamma^T (e^{i omega T} I - N_map)^{-1} sigma(T; i omega),

where sigma collects the input-channel integrals P_{m+1}(T) weighted by
(i omega)^m.  With ripple compensation kappa, and therefore H, is
independent of the operating point: the loop is linear in the small-signal
sense.  Without it H inherits the u0 dependence of kappa.

The resolvent is evaluated in the modal basis through the rank-one update
formula, which avoids forming the poorly scaled dense matrices; the scalar
denominator that appears is exactly the Sylvester eigenvalue residual of
the stability module, so resonances are detected as a by-product.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial, pi

import numpy as np

from .errors import ResonanceError
from .modal import matrix_exp, modal_decomposition, phi
from .params import AmplifierParams
from .stability import compute_kappa
from .steady import solve_steady_state

#: relative half-width (w.r.t. omega1) of the windows around the removable
#: singularities of the closed forms where the series branch takes over
SERIES_WINDOW = 1e-4


@dataclass(frozen=True)
class TransferPoint:
    omega: float        # rad/s, |omega| < pi/T
    value: complex      # dimensionless input-to-output gain


def script_N(params: AmplifierParams, u0: float) -> np.ndarray:
    """Edge-to-edge disturbance map e^{NT}(I + (T kappa/LC) e5 gamma^T)."""
    kap = compute_kappa(params, solve_steady_state(params, u0))
    update = np.eye(5)
    update[4] += (params.T * kap / params.LC) * params.gamma
    return matrix_exp(params, params.T) @ update


def _sigma_series(params: AmplifierParams, omega: float) -> np.ndarray:
    """sigma_j as the convergent power series in (i omega); exact fallback
    near the removable singularities of the closed forms."""
    T, w1 = params.T, params.omega1
    total = np.zeros(3, dtype=complex)
    iw = 1j * omega
    factor = 1.0 + 0.0j
    for m in range(80):
        term = factor * np.array(
            [T ** (m + 1) / factorial(m + 1), phi(m + 1, T, w1), phi(m + 2, T, w1)]
        )
        total += term
        if np.abs(term).max() <= 1e-18 * max(np.abs(total).max(), 1e-300):
            break
        factor *= iw
    return total


def sigma(params: AmplifierParams, omega: float) -> tuple[complex, complex, complex]:
    """Input-integral weights (sigma1, sigma2, sigma3) at angular frequency omega.

    Closed forms away from omega = 0 and omega = +-omega1; within a relative
    window of 1e-4 of those points the closed forms lose ~8 digits to
    cancellation and the series branch is used instead (the singularities
    are removable, the function is entire in omega).
    """
    T, w1 = params.T, params.omega1
    if abs(omega) >= pi / T:
        raise ValueError(f"sigma is defined for |omega| < pi/T = {pi / T:.6g}")
    if abs(omega) < SERIES_WINDOW * w1 or abs(abs(omega) - w1) < SERIES_WINDOW * w1:
        s1, s2, s3 = _sigma_series(params, omega)
        return complex(s1), complex(s2), complex(s3)
    s1 = (np.exp(1j * omega * T) - 1.0) / (1j * omega)
    s2 = (
        1j * omega * np.sin(w1 * T)
        - 1j * w1 * np.sin(omega * T)
        + w1 * (np.cos(w1 * T) - np.cos(omega * T))
    ) / (w1 * (omega**2 - w1**2))
    s3 = (omega * np.sin(w1 * T) - w1 * np.sin(omega * T)) / (
        omega * w1 * (omega**2 - w1**2)
    ) + 1j * (
        w1**2 * np.cos(omega * T) - omega**2 * np.cos(w1 * T) + omega**2 - w1**2
    ) / (omega * w1**2 * (omega**2 - w1**2))
    return complex(s1), complex(s2), complex(s3)


def transfer_function(params: AmplifierParams, u0: float, omega: float) -> complex:
    """Input-to-output gain H(omega) about the steady state at u0.

    Parameters
    ----------
    omega : float
        Angular frequency, |omega| < pi/T (band-limited model).

    Raises
    ------
    ResonanceError
        If e^{i omega T} coincides (to 1e-14 of scale) with an eigenvalue
        of the disturbance map, where the resolvent blows up.
    """
    T, LC = params.T, params.LC
    if abs(omega) >= pi / T:
        raise ValueError(
            f"transfer function is defined for |omega| < pi/T = {pi / T:.6g}"
        )
    ss = solve_steady_state(params, u0)
    kap = compute_kappa(params, ss)
    dec = modal_decomposition(params)
    gamma = params.gamma

    z = np.exp(1j * omega * T)
    exps = np.exp(dec.eigenvalues * T)
    gaps = z - exps

    gR = gamma @ dec.right_eigvecs          # gamma^T R
    le5 = dec.left_eigvecs[:, 4]            # R^{-1} e5
    sig = np.zeros(5, dtype=complex)
    sig[:3] = sigma(params, omega)
    ls = dec.left_eigvecs @ sig             # R^{-1} sigma

    # resolvent of the rank-one update (zI - e^{NT} - u gamma^T)^{-1} with
    # u = (T kappa/LC) e^{NT} e5 collapses to gamma.B^{-1}sigma / (1 -
    # gamma.B^{-1}u).  z can legitimately touch an eigenvalue of e^{NT}
    # (z = 1 at DC, z = e^{i omega1 T} at the resonator frequency): those
    # poles of B^{-1} cancel between numerator and denominator, so the
    # smallest gap is factored out to make the cancellation exact.
    j = int(np.argmin(np.abs(gaps)))
    ratios = np.empty(5, dtype=complex)
    if gaps[j] == 0.0:
        ratios[:] = 0.0
        ratios[j] = 1.0
    else:
        ratios = gaps[j] / gaps
    c = T * kap / LC
    num = complex(gR @ (ls * ratios))
    hit = c * complex(gR @ (exps * le5 * ratios))
    denom = gaps[j] - hit
    scale = abs(gaps[j]) + abs(hit)
    if abs(denom) < 1e-14 * scale:
        raise ResonanceError(
            f"drive at omega={omega} resonant with a period-map eigenvalue"
        )
    return kap * num / denom


def transfer_points(
    params: AmplifierParams, u0: float, omegas
) -> list[TransferPoint]:
    return [TransferPoint(float(w), transfer_function(params, u0, w)) for w in omegas]


def first_order_gain_expansion(
    params: AmplifierParams, u0: float, probe_omega: float | None = None
) -> tuple[float, float]:
    """Expansion H(omega) = g0 + i (omega T) g1' + O((omega T)^2).

    Returns (g0, g1').  g0 is the DC gain (identically 1: the duty-cycle
    law).  Conjugate symmetry H(-omega) = conj(H(omega)) makes the
    expansion a series in (i omega T) with real coefficients, so
    Im H/(omega T) carries only even-order corrections; one Richardson
    step over probe frequencies omega and omega/2 removes the leading one.
    This is the truncation under which the small-signal model and the
    slow-time expansion must agree.
    """
    g0 = transfer_function(params, u0, 0.0).real
    if probe_omega is None:
        probe_omega = 1e-3 * pi / params.T
    s1 = transfer_function(params, u0, probe_omega).imag / (probe_omega * params.T)
    s2 = transfer_function(params, u0, 0.5 * probe_omega).imag / (
        0.5 * probe_omega * params.T
    )
    return g0, float((4.0 * s2 - s1) / 3.0)
