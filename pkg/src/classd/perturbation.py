"""Slow-time expansion of the switched loop: nonlinear audio prediction.

For an input that varies on a time scale 1/omega much slower than the
carrier (epsilon = omega T << 1), the duty-cycle sequence tracks a smooth
function a(tau) of the slow time tau = omega t, and the audio content of
the pulse train expands as

    g_audio(t) = U(tau) + epsilon g1(tau) + O(epsilon^2),

with the leading term the plain duty-cycle law.  The first correction

    g1 = (1-k)/2 * U U' - omega1^2 (1 - psi) U' / ((c1 omega1^2 + c3) T)

carries all of the O(epsilon) distortion.  psi contracts the forcing
integrals against the order-zero inverse Upsilon0 of the slow difference
operator; without ripple compensation psi depends on U through the duty
cycle, making g1 nonlinear and the output distorted, while with it g1 is
linear in U' and the predicted harmonics vanish identically at this order.

Truncation is fixed at O(epsilon): the next order couples the full
Bernoulli-Apostol expansion of the difference operator and is out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import ResidueError, ResonanceError, SaturationError
from .modal import IMAG_RESIDUE_RTOL, eta, modal_decomposition, p_vec
from .params import AmplifierParams


def a0(U_val: float) -> float:
    """Leading-order duty cycle (1 + U)/2; saturates at |U| = 1."""
    if np.any(np.abs(U_val) >= 1.0):
        raise SaturationError("duty cycle saturates at |U| >= 1")
    return 0.5 * (1.0 + U_val)


def upsilon0(params: AmplifierParams) -> np.ndarray:
    """Order-zero inverse of the slow difference operator, diagonal in the
    modal basis: diag(-1/2, (1 - e^{lam_j T})^{-1} for j >= 2)."""
    dec = modal_decomposition(params)
    gaps = 1.0 - np.exp(dec.eigenvalues[1:] * params.T)
    if np.abs(gaps).min() < 1e-12:
        raise ResonanceError("carrier period resonant with a system mode")
    return np.diag(np.concatenate(([-0.5 + 0j], 1.0 / gaps)))


@lru_cache(maxsize=64)
def _mode_weights(params: AmplifierParams) -> tuple:
    """Per-mode weights of the contraction gamma^T R Upsilon0 R^{-1} applied
    to P_n (dense row) and to Q_n (mode sum against R^{-1} e5)."""
    dec = modal_decomposition(params)
    ups = np.diag(upsilon0(params))
    gR = params.gamma @ dec.right_eigvecs
    row = (gR * ups) @ dec.left_eigvecs          # for P_n(t): row . P
    q_weights = gR * ups * dec.left_eigvecs[:, 4]  # for Q_n(t): sum_j w_j eta_n
    return row, q_weights, dec.eigenvalues


def _real_with_check(value: complex, label: str) -> float:
    if abs(value) > 0 and abs(value.imag) > IMAG_RESIDUE_RTOL * abs(value):
        raise ResidueError(f"{label}: imaginary residue {value.imag:.3e}")
    return float(value.real)


def pq_scalars(params: AmplifierParams, n: int, t: float) -> tuple[float, float]:
    """The scalars p_n(t), q_n(t): forcing integrals contracted through
    gamma^T R Upsilon0 R^{-1}.  Real by conjugate pairing of the modes."""
    row, q_weights, lam = _mode_weights(params)
    p_val = complex(row @ p_vec(n, t, params))
    q_val = complex(sum(w * eta(n, l, t) for w, l in zip(q_weights, lam)))
    return (_real_with_check(p_val, f"p_{n}({t})"),
            _real_with_check(q_val, f"q_{n}({t})"))


def _q0_scalar(params: AmplifierParams, t):
    """q_0 over an array of times (vectorised mode sum, eta_0 = exp)."""
    _, q_weights, lam = _mode_weights(params)
    t = np.asarray(t, dtype=float)
    return np.real(np.exp(np.multiply.outer(t, lam)) @ q_weights)


def psi(params: AmplifierParams, U_val):
    """Gain-defect scalar psi = p1(T) + ((1-k)T/LC) q0(a0 T) + (k/LC) q1(T).

    Scalar in, scalar out; arrays are accepted and mapped elementwise.
    With ripple compensation the U-dependent term drops out and psi is a
    design constant.
    """
    T, LC, k = params.T, params.LC, params.k
    p1_T, q1_T = pq_scalars(params, 1, T)
    const = p1_T + (k / LC) * q1_T
    if k == 1:
        return const + np.zeros_like(np.asarray(U_val, dtype=float)) \
            if np.ndim(U_val) else const
    val = const + (T / LC) * _q0_scalar(params, a0(U_val) * T)
    return float(val) if np.ndim(val) == 0 else val


def g1(params: AmplifierParams, U_val, U_prime_val):
    """First-order audio correction g1(U, U')."""
    k = params.k
    w1sq = params.omega1**2
    denom = (params.c1 * w1sq + params.c3) * params.T
    if denom == 0.0:
        raise ZeroDivisionError("c1*omega1^2 + c3 vanishes; g1 undefined")
    val = (1 - k) * U_val * U_prime_val / 2.0 \
        - w1sq * (1.0 - psi(params, U_val)) * U_prime_val / denom
    return float(val) if np.ndim(val) == 0 else val


def a1(params: AmplifierParams, U_val: float, U_prime_val: float) -> float:
    """First duty-cycle correction, recovered from g1 = 2 a1 - 2 a0 a0'."""
    return 0.5 * g1(params, U_val, U_prime_val) + a0(U_val) * (U_prime_val / 2.0)


@dataclass(frozen=True)
class SlowInput:
    """Audio input in slow time tau = omega_audio * t.

    U and U_prime must accept numpy arrays.  The derivative is supplied
    analytically by the caller: g1 is derivative-sensitive and numerical
    differentiation is reserved for test oracles.
    """

    U: Callable
    U_prime: Callable
    epsilon: float          # omega_audio * T, dimensionless
    omega_audio: float      # rad/s

    @classmethod
    def sine(cls, amplitude: float, frequency: float, params: AmplifierParams):
        omega = 2.0 * np.pi * frequency
        return cls(
            U=lambda tau: amplitude * np.sin(tau),
            U_prime=lambda tau: amplitude * np.cos(tau),
            epsilon=omega * params.T,
            omega_audio=omega,
        )


@dataclass(frozen=True)
class AudioPrediction:
    t: np.ndarray               # sample times, s
    samples: np.ndarray         # predicted audio output g_audio(t)
    order: int                  # 0 or 1 (1 includes the epsilon g1 term)
    fourier: dict | None        # harmonic index -> complex coefficient


def predict_audio(
    params: AmplifierParams,
    slow_input: SlowInput,
    duration: float,
    sample_rate: float,
    order: int = 1,
    harmonics=None,
) -> AudioPrediction:
    """Sample the truncated audio prediction and optionally its spectrum.

    Parameters
    ----------
    duration : float
        Length of the sampled window, s.  Must span an integer number of
        input periods when ``harmonics`` are requested (leakage-free
        rectangle-rule Fourier sums).
    sample_rate : float
        Samples per second of the output grid.
    order : int
        0 keeps the duty-cycle law only; 1 adds the epsilon g1 correction.
    harmonics : sequence of int, optional
        Harmonic indices n (of omega_audio) at which Fourier coefficients
        of the prediction are returned, convention
        coefficient_n = mean(g_audio(t) e^{-i n omega t}).
    """
    if order not in (0, 1):
        raise ValueError(f"order must be 0 or 1, got {order}")
    omega = slow_input.omega_audio
    if abs(slow_input.epsilon - omega * params.T) > 1e-12 * slow_input.epsilon:
        raise ValueError("slow_input.epsilon inconsistent with omega_audio * T")

    n_samples = max(2, int(round(duration * sample_rate)))
    if harmonics is not None:
        periods = duration * omega / (2.0 * np.pi)
        if abs(periods - round(periods)) > 1e-9 * max(1.0, periods) or round(periods) < 1:
            raise ValueError(
                "duration must be an integer number of input periods "
                "for Fourier output"
            )
        n_samples = max(n_samples, 4096 * int(round(periods)))
    # periodic rectangle rule: endpoint excluded
    t = np.arange(n_samples) * (duration / n_samples)
    tau = omega * t
    U = np.asarray(slow_input.U(tau), dtype=float)
    if np.abs(U).max() >= 1.0:
        raise SaturationError("|U| reaches 1 inside the prediction window")
    ga = U.copy()
    if order == 1:
        Up = np.asarray(slow_input.U_prime(tau), dtype=float)
        ga += slow_input.epsilon * g1(params, U, Up)

    fourier = None
    if harmonics is not None:
        fourier = {
            int(n): complex(np.mean(ga * np.exp(-1j * n * omega * t)))
            for n in harmonics
        }
    return AudioPrediction(t=t, samples=ga, order=order, fourier=fourier)
