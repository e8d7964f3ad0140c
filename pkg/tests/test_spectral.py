import numpy as np
import pytest

from classd import PulseTrain, WindowError, harmonic_table, mean_level, pulse_fourier
from classd.spectral import SpectralReport, thd


def _constant_train(duty, n_periods, T=1.0 / 384000.0, start=0):
    idx = np.arange(start, start + n_periods, dtype=np.int64)
    duties = np.full(n_periods, duty)
    return PulseTrain(T=T, index=idx, duty=duties,
                      skipped=np.zeros(n_periods, dtype=bool))


def test_square_wave_fundamental():
    train = _constant_train(0.5, 64)
    T = train.T
    coeff = pulse_fourier(train, 2 * np.pi / T, (0.0, 64 * T))
    assert abs(coeff) == pytest.approx(2.0 / np.pi, rel=1e-12)


def test_mean_level_is_duty_law():
    train = _constant_train(0.8, 16)
    assert mean_level(train, (0.0, 16 * train.T)) == pytest.approx(0.6, abs=1e-15)


def test_shift_by_one_period_phase_factor():
    T = 1.0 / 384000.0
    rng = np.random.default_rng(5)
    duties = rng.uniform(0.2, 0.8, 32)
    base = PulseTrain(T=T, index=np.arange(32, dtype=np.int64), duty=duties,
                      skipped=np.zeros(32, dtype=bool))
    moved = PulseTrain(T=T, index=np.arange(1, 33, dtype=np.int64), duty=duties,
                       skipped=np.zeros(32, dtype=bool))
    omega = 2 * np.pi / (32 * T) * 5
    c0 = pulse_fourier(base, omega, (0.0, 32 * T))
    c1 = pulse_fourier(moved, omega, (T, 33 * T))
    assert c1 == pytest.approx(c0 * np.exp(-1j * omega * T), rel=1e-12)


def test_segment_sum_shift_identity():
    """The exact segment sum obeys the continuous shift rule even for
    shifts off the carrier grid; verified against a direct edge-domain
    evaluation with Delta t = 0.3 T."""
    T = 1.0 / 384000.0
    duties = np.array([0.3, 0.6, 0.45, 0.51])
    train = PulseTrain(T=T, index=np.arange(4, dtype=np.int64), duty=duties,
                       skipped=np.zeros(4, dtype=bool))
    omega = 2 * np.pi / (4 * T) * 3

    def direct(shift):
        total = 0.0j
        for n, a in enumerate(duties):
            t_r, t_f, t_e = (n * T + shift, (n + a) * T + shift,
                             (n + 1) * T + shift)
            total += (np.exp(-1j * omega * t_f) - np.exp(-1j * omega * t_r))
            total -= (np.exp(-1j * omega * t_e) - np.exp(-1j * omega * t_f))
        return total / (-1j * omega) / (4 * T)

    assert pulse_fourier(train, omega, (0.0, 4 * T)) == pytest.approx(
        direct(0.0), rel=1e-12)
    shift = 0.3 * T
    assert direct(shift) == pytest.approx(
        direct(0.0) * np.exp(-1j * omega * shift), rel=1e-12)


def test_against_dense_trapezoid_oracle(sim_cache):
    """Exact segment sum vs a 2^20-point sampled trapezoidal estimate on a
    10-carrier-period window (sampling grid refined with the edge points so
    the discontinuities do not limit the estimate)."""
    train, report, p, signal = sim_cache(k=0, measure=4)
    T = p.T
    n0 = int(train.index[0])
    window = (n0 * T, (n0 + 10) * T)
    omega = 2 * np.pi * 3 / (10 * T)
    exact = pulse_fourier(train, omega, window)

    duty = train.duty[:10]
    edges = (np.arange(10) + duty) * T
    grid = np.linspace(window[0], window[1], 2**20 + 1)
    pts = np.unique(np.concatenate([grid, edges, np.arange(11) * T]))

    mid = 0.5 * (pts[1:] + pts[:-1])
    frac = mid / T - np.floor(mid / T)
    nn = np.floor(mid / T).astype(int)
    g_mid = np.where(frac < duty[np.clip(nn, 0, 9)], 1.0, -1.0)
    integrand = np.exp(-1j * omega * pts)
    approx = np.sum(g_mid * 0.5 * (integrand[1:] + integrand[:-1])
                    * np.diff(pts)) / (10 * T)
    assert abs(exact - approx) <= 1e-6 * abs(exact)


def test_window_doubling_leaves_settled_coefficients(sim_cache):
    train, _, p, signal = sim_cache(k=0, measure=4)
    T = p.T
    per = int(round(1.0 / (1000.0 * T)))
    start = 20 * per
    rep2 = harmonic_table(train, 1000.0, n_max=6,
                          window=(start * T, (start + 2 * per) * T))
    rep4 = harmonic_table(train, 1000.0, n_max=6,
                          window=(start * T, (start + 4 * per) * T))
    for n in range(1, 7):
        assert abs(rep2.coefficient(n) - rep4.coefficient(n)) < 1e-8


def test_harmonic_table_rc_suppression(sim_cache):
    _, report, p, _ = sim_cache(k=1)
    assert max(report.magnitude(n) for n in range(2, 21)) < 1e-5
    assert not report.contaminated


def test_thd_arithmetic():
    def report_from(mags):
        coeffs = tuple((n + 1, complex(m)) for n, m in enumerate(mags))
        return SpectralReport(fundamental_freq=1e3, coefficients=coeffs,
                              thd=0.0, window=(0.0, 1e-3), dc=0.0,
                              n_max=len(mags), contaminated=False)

    assert thd(report_from([1.0, 0.1])) == pytest.approx(0.1, rel=1e-15)
    assert thd(report_from([1.0, 0.1, 0.1])) == pytest.approx(
        0.1 * np.sqrt(2.0), rel=1e-15)
    published = report_from([0.3991, 5.258e-5, 1.52e-6, 1.38e-5])
    expected = np.sqrt(5.258e-5**2 + 1.52e-6**2 + 1.38e-5**2) / 0.3991
    assert thd(published) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(1.36e-4, rel=5e-3)
    with pytest.raises(ZeroDivisionError):
        thd(report_from([0.0, 0.1]))


def test_single_harmonic_report_has_zero_thd():
    train = _constant_train(0.5, 384)
    f = 1.0 / (384 * train.T)
    report = harmonic_table(train, f, n_max=1)
    assert report.thd == 0.0


def test_window_validation():
    train = _constant_train(0.5, 64)
    T = train.T
    with pytest.raises(WindowError):
        pulse_fourier(train, 1e4, (0.0, 10.5 * T))
    with pytest.raises(WindowError):
        pulse_fourier(train, 1e4, (0.0, 80 * T))
    with pytest.raises(WindowError):
        harmonic_table(train, 1000.0, window=(0.0, 10 * T))  # 1 kHz not integral
    with pytest.raises(ValueError):
        pulse_fourier(train, 0.0, (0.0, 64 * T))


def test_dc_exact_mean(sim_cache):
    train, report, p, _ = sim_cache(k=0, measure=4)
    assert report.dc == pytest.approx(0.0, abs=1e-12)
