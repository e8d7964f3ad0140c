"""Independent numerical oracles for the test suite.

Everything here deliberately avoids the production code paths: quadrature
instead of closed forms, fixed-step RK4 instead of modal propagation, dense
matrix arithmetic with a numerically inverted eigenvector matrix instead of
the analytic left eigenvectors.
"""

import numpy as np
from scipy.integrate import quad

from classd import build_system_matrix
from classd.modal import modal_decomposition
from classd.perturbation import upsilon0


def quad_vector(func, lo, hi, dim=5):
    """Componentwise adaptive quadrature of a vector-valued function."""
    out = np.empty(dim)
    for i in range(dim):
        out[i], _ = quad(lambda s: func(s)[i], lo, hi,
                         epsabs=1e-16, epsrel=1e-13, limit=200)
    return out


def rk4_closed_loop(params, u_of_t, x0, t_lo, t_hi, g, total_steps):
    """Fixed-step RK4 of x' = Nx + u(t) e1 + (g + k v(t))/LC e5 on one leg
    with constant pulse level g; v is the sawtooth ramp of the period the
    leg starts in (legs never cross a carrier edge, and anchoring the ramp
    keeps the final RK4 stage from sampling past the sawtooth reset)."""
    N = build_system_matrix(params)
    T, LC, k = params.T, params.LC, params.k
    e1 = np.zeros(5); e1[0] = 1.0
    e5 = np.zeros(5); e5[4] = 1.0
    period_start = np.floor(t_lo / T + 1e-9) * T

    def v_of(t):
        return -1.0 + 2.0 * (t - period_start) / T

    def rhs(t, x):
        return N @ x + u_of_t(t) * e1 + (g + k * v_of(t)) / LC * e5

    steps = max(int(total_steps), 1)
    h = (t_hi - t_lo) / steps
    x = np.asarray(x0, dtype=float).copy()
    t = t_lo
    for _ in range(steps):
        k1 = rhs(t, x)
        k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = rhs(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
    return x


def rk4_period(params, u_of_t, x_edge, n, a_n, steps_per_period=100_000):
    """One full carrier period [nT, (n+1)T] from the rising-edge state,
    with the falling edge at (n + a_n)T; integration split at the edge so
    the forcing stays smooth within each RK4 leg."""
    T = params.T
    t_r, t_f, t_e = n * T, (n + a_n) * T, (n + 1) * T
    steps_hi = max(int(round(steps_per_period * a_n)), 1)
    steps_lo = max(steps_per_period - steps_hi, 1)
    x = rk4_closed_loop(params, u_of_t, x_edge, t_r, t_f, +1.0, steps_hi)
    if a_n < 1.0:
        x = rk4_closed_loop(params, u_of_t, x, t_f, t_e, -1.0, steps_lo)
    return x


def dense_upsilon_row(params):
    """gamma^T R Upsilon0 R^{-1} via numpy's dense inverse (no analytic
    left eigenvectors)."""
    dec = modal_decomposition(params)
    r_inv = np.linalg.inv(dec.right_eigvecs)
    return params.gamma @ dec.right_eigvecs @ upsilon0(params) @ r_inv


def exact_leg_state(params, x0, d, g, v0, uderivs):
    """Test-side exact propagation over one leg via the public modal API;
    mirrors the closed-form scheme but built from p_vec/q_vec directly."""
    from classd import matrix_exp, p_vec, q_vec

    x = matrix_exp(params, d) @ np.asarray(x0, dtype=float)
    for m, um in enumerate(uderivs):
        if um != 0.0:
            x = x + um * p_vec(m + 1, d, params)
    k, T, LC = params.k, params.T, params.LC
    x = x + ((g + k * v0) * q_vec(1, d, params)
             + k * (2.0 / T) * q_vec(2, d, params)) / LC
    return x
