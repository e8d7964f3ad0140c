"""Closed-form Fourier analysis of rectangular pulse trains.

A +-1 pulse train is piecewise constant between switching edges, so its
windowed Fourier coefficient

    f(omega) = (1/W) int_W g(t) e^{-i omega t} dt

is a finite sum of segment terms +-(e^{-i omega t2} - e^{-i omega t1}) /
(-i omega): no sampling, no FFT, and no amplitude error at any frequency.
Coefficients follow the series convention g(t) = sum_n f_n e^{i n omega t},
measured over a window that is simultaneously an integer number of carrier
periods and of fundamental periods, so a settled periodic response leaks
nothing.  THD = sqrt(sum_{n>=2} |f_n|^2) / |f_1| over the computed
harmonics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import WindowError
from .simulate import PulseTrain

#: harmonics included in a THD report unless the caller asks otherwise
DEFAULT_N_MAX = 20


@dataclass(frozen=True)
class SpectralReport:
    fundamental_freq: float             # Hz
    coefficients: tuple                 # ((n, complex coefficient), ...)
    thd: float
    window: tuple                       # (t_start, t_end), s
    dc: float                           # exact time average of g over the window
    n_max: int
    contaminated: bool                  # True when skipped pulses fell in the
                                        # window: an incommensurate duty-cycle
                                        # oscillation leaks into every bin

    def magnitude(self, n: int) -> float:
        for idx, value in self.coefficients:
            if idx == n:
                return abs(value)
        raise KeyError(f"harmonic {n} not in report")

    def coefficient(self, n: int) -> complex:
        for idx, value in self.coefficients:
            if idx == n:
                return value
        raise KeyError(f"harmonic {n} not in report")


def _window_slice(train: PulseTrain, window) -> tuple[int, int]:
    """Map an absolute-time window onto whole carrier periods of the train."""
    t0, t1 = window
    T = train.T
    n0 = int(round(t0 / T))
    n1 = int(round(t1 / T))
    if abs(t0 - n0 * T) > 1e-9 * T or abs(t1 - n1 * T) > 1e-9 * T:
        raise WindowError("window endpoints must lie on carrier-period edges")
    if n1 <= n0:
        raise WindowError("window must span at least one carrier period")
    if n0 < train.index[0] or n1 > train.index[-1] + 1:
        raise WindowError("window exceeds the simulated span")
    return n0, n1


def pulse_fourier(train: PulseTrain, omega: float, window) -> complex:
    """Windowed Fourier coefficient of the pulse train at omega (rad/s) != 0.

    Exact segment sum over the rectangular pieces: each period [nT, (n+1)T]
    with falling edge A = (n + a)T contributes
    (2 e^{-i omega A} - e^{-i omega nT} - e^{-i omega (n+1)T}) / (-i omega).
    """
    if omega == 0.0:
        raise ValueError("omega must be nonzero; the DC term is a time average")
    n0, n1 = _window_slice(train, window)
    sel = slice(n0 - int(train.index[0]), n1 - int(train.index[0]))
    idx = train.index[sel].astype(float)
    duty = train.duty[sel]
    T = train.T
    rising = np.exp(-1j * omega * (idx * T))
    next_rising = np.exp(-1j * omega * ((idx + 1.0) * T))
    falling = np.exp(-1j * omega * ((idx + duty) * T))
    total = np.sum(2.0 * falling - rising - next_rising) / (-1j * omega)
    return complex(total / ((n1 - n0) * T))


def mean_level(train: PulseTrain, window) -> float:
    """Exact time average of g over the window: (2 <duty> - 1)."""
    n0, n1 = _window_slice(train, window)
    sel = slice(n0 - int(train.index[0]), n1 - int(train.index[0]))
    return float(2.0 * train.duty[sel].mean() - 1.0)


def harmonic_table(
    train: PulseTrain,
    f: float,
    n_max: int = DEFAULT_N_MAX,
    window=None,
) -> SpectralReport:
    """Harmonic coefficients at n*f for n = 1..n_max, plus THD.

    Parameters
    ----------
    f : float
        Fundamental frequency, Hz.  The window must hold an integer number
        of fundamental periods (and of carrier periods, which it does by
        construction); otherwise WindowError.
    window : (t0, t1), optional
        Defaults to the full train span.

    Notes
    -----
    A skipped pulse inside the window marks the report as contaminated: the
    duty-cycle oscillation beyond the stability threshold carries its own
    incommensurate frequency and the fixed window then leaks.  Coefficients
    are still reported; no windowing correction is attempted.
    """
    if window is None:
        window = (train.t_start, train.t_end)
    n0, n1 = _window_slice(train, window)
    width = (n1 - n0) * train.T
    cycles = width * f
    if abs(cycles - round(cycles)) > 1e-9 * max(1.0, cycles) or round(cycles) < 1:
        raise WindowError(
            f"window of {width:.6g} s is not an integer number of periods of {f} Hz"
        )
    omega = 2.0 * np.pi * f
    coeffs = tuple(
        (n, pulse_fourier(train, n * omega, window)) for n in range(1, n_max + 1)
    )
    sel = slice(n0 - int(train.index[0]), n1 - int(train.index[0]))
    contaminated = bool(train.skipped[sel].any())
    report = SpectralReport(
        fundamental_freq=f,
        coefficients=coeffs,
        thd=_thd_from_coeffs(coeffs),
        window=(n0 * train.T, n1 * train.T),
        dc=mean_level(train, window),
        n_max=n_max,
        contaminated=contaminated,
    )
    return report


def _thd_from_coeffs(coeffs) -> float:
    fundamental = None
    power = 0.0
    for n, value in coeffs:
        if n == 1:
            fundamental = abs(value)
        elif n >= 2:
            power += abs(value) ** 2
    if not fundamental:
        raise ZeroDivisionError("THD undefined: zero or missing fundamental")
    return float(np.sqrt(power) / fundamental)


def thd(report: SpectralReport) -> float:
    """Total harmonic distortion of a report (recomputed from coefficients)."""
    return _thd_from_coeffs(report.coefficients)
