"""T-periodic operating point for a constant input.

With u(t) = u0 every carrier period looks the same: the falling edge sits
at t = aT with duty cycle a, and the state at the edge satisfies

    (I - e^{NT}) x(aT) = Phi(a, T).

The left-hand matrix is singular (N has a zero eigenvalue), and the
solvability condition v1 . Phi = 0 fixes the duty cycle at a = (1+u0)/2:
the pulse train averages to the input.  The state itself follows from the
rank-4 system with one row replaced by the comparator switching condition
gamma . x(aT) = -1 + 2a.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularSystemError
from .modal import matrix_exp, modal_decomposition, p_vec, q_vec, build_system_matrix
from .params import AmplifierParams

#: condition-number gate for the reduced 5x5 solve (after equilibration)
CONDITION_LIMIT = 1e12


def duty_cycle(u0: float) -> float:
    """Steady-state duty cycle (1 + u0)/2 for constant input u0, |u0| <= 1."""
    if not (-1.0 <= u0 <= 1.0):
        raise ValueError(f"constant input must satisfy |u0| <= 1, got {u0}")
    return 0.5 * (1.0 + u0)


@dataclass(frozen=True)
class SteadyState:
    u0: float
    a: float                    # duty cycle, (1+u0)/2
    x_at_switch: np.ndarray     # state at the falling edge t = aT
    slope: float                # gamma . x'(aT), 1/s


def period_forcing(params: AmplifierParams, a: float, u0: float) -> np.ndarray:
    """Accumulated forcing Phi(a, T) over one period between falling edges.

    Collects the constant input through P1 and the pulse train plus
    (optionally) the carrier ramp through Q1, Q2.
    """
    T, LC, k = params.T, params.LC, params.k
    out = u0 * p_vec(1, T, params)
    out = out + (
        2.0 * (1 - k) * q_vec(1, a * T, params)
        + (-1.0 - k + 2.0 * k * a) * q_vec(1, T, params)
        + (2.0 * k / T) * q_vec(2, T, params)
    ) / LC
    return out


# dimensionally motivated column scaling: states m1..m3 pick up one factor
# of time per integrator stage, f' loses one
def _column_scales(T: float) -> np.ndarray:
    return np.array([1.0, T, T * T, 1.0, 1.0 / T])


def solve_steady_state(params: AmplifierParams, u0: float) -> SteadyState:
    """Solve for the periodic operating point at constant input u0.

    Parameters
    ----------
    params : AmplifierParams
    u0 : float
        Constant input, |u0| < 1 strictly (the switching condition
        degenerates at saturation).

    Returns
    -------
    SteadyState
        Duty cycle, state at the falling edge, and the compensator-output
        slope gamma . x'(aT) there (the quantity every later stability and
        small-signal gain is built from).

    Notes
    -----
    The replaced row defaults to the first; if the reduced matrix is
    ill-conditioned the second and third rows are tried in turn before
    giving up with SingularSystemError.
    """
    if not (-1.0 < u0 < 1.0):
        raise ValueError(f"steady state requires |u0| < 1, got {u0}")
    a = duty_cycle(u0)
    T = params.T
    M = np.eye(5) - matrix_exp(params, T)
    phi_vec = period_forcing(params, a, u0)
    gamma = params.gamma

    col = _column_scales(T)
    last_cond = np.inf
    for row in (0, 1, 2):
        M_red = M.copy()
        M_red[row] = gamma
        rhs = phi_vec.copy()
        rhs[row] = -1.0 + 2.0 * a

        scaled = M_red * col[None, :]
        row_norm = np.abs(scaled).max(axis=1)
        scaled /= row_norm[:, None]
        last_cond = np.linalg.cond(scaled)
        if last_cond > CONDITION_LIMIT:
            continue
        y = np.linalg.solve(scaled, rhs / row_norm)
        x = col * y
        slope = float(gamma @ (build_system_matrix(params) @ x) + params.c1 * u0)
        return SteadyState(u0=u0, a=a, x_at_switch=x, slope=slope)

    raise SingularSystemError(
        f"reduced periodic system is numerically singular "
        f"(condition number {last_cond:.2e} for every row replacement)"
    )


def rc_shift_delta(params: AmplifierParams, a: float, b: float) -> np.ndarray:
    """Constant offset between two ripple-compensated operating points.

    With k = 1, the steady states at duty cycles a and b differ only by a
    time shift of (b-a)T and the constant vector returned here; the ripple
    shape itself is input-independent.
    """
    w1sq = params.omega1**2
    denom = params.c1 * w1sq + params.c3
    if denom == 0.0:
        raise ZeroDivisionError("c1*omega1^2 + c3 vanishes; shift vector undefined")
    return (2.0 * (b - a) / denom) * np.array([w1sq, 0.0, 1.0, denom, 0.0])


def reconstruct_period(
    params: AmplifierParams, ss: SteadyState, n_samples: int
):
    """Sample the full periodic solution x(t), m(t) = gamma . x(t) on [aT, aT+T].

    Exact propagation from x(aT): the pulse is low (-1) until the next
    rising edge at t = T, high (+1) afterwards, and the carrier ramp enters
    when ripple compensation is on.  Returns (t, X, m) with X of shape
    (n_samples, 5).
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    T, LC, k = params.T, params.LC, params.k
    a, u0 = ss.a, ss.u0
    dec = modal_decomposition(params)

    def propagate(x0, d, g, v0):
        hom = (dec.right_eigvecs * np.exp(dec.eigenvalues * d)) @ (
            dec.left_eigvecs @ x0
        )
        force = (g + k * v0) * q_vec(1, d, params) + k * (2.0 / T) * q_vec(2, d, params)
        return hom.real + u0 * p_vec(1, d, params) + force / LC

    x_edge = ss.x_at_switch
    x_carrier = propagate(x_edge, (1.0 - a) * T, -1.0, -1.0 + 2.0 * a)

    t = np.linspace(a * T, a * T + T, n_samples)
    X = np.empty((n_samples, 5))
    for i, ti in enumerate(t):
        if ti <= T:
            X[i] = propagate(x_edge, ti - a * T, -1.0, -1.0 + 2.0 * a)
        else:
            X[i] = propagate(x_carrier, ti - T, +1.0, -1.0)
    m = X @ params.gamma
    return t, X, m
