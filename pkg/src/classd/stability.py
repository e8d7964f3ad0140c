"""Stability of the periodic operating point via the period-return map.

A disturbance at a carrier edge propagates to the next edge through

    M = e^{N(1-a)T} (I + (T kappa / LC) e5 gamma^T) e^{NaT},

a rank-one correction of the plain propagator that accounts for the shift
of the switching instant.  kappa = 1/(1 - T/2 * gamma . x'(aT)) measures
how transversally the compensator output crosses the carrier.  The
operating point is stable iff all eigenvalues of M lie inside the unit
circle.  An equivalent scalar eigenvalue condition (via the determinant of
a rank-one update) is provided as an independent verification route.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import NoSignChangeError, PoleError, TransversalityError
from .modal import matrix_exp, modal_decomposition
from .params import AmplifierParams
from .steady import SteadyState, solve_steady_state

#: |1 - T/2 * slope| below this means the crossing grazes the carrier
TRANSVERSALITY_LIMIT = 1e-10


def compute_kappa(params: AmplifierParams, ss: SteadyState) -> float:
    """Transversality factor kappa = (1 - T/2 * gamma . x'(aT))^{-1}.

    With ripple compensation the edge slope, hence kappa, is independent of
    the operating point; without it kappa inherits the u0 dependence that
    makes the loop nonlinear.
    """
    denom = 1.0 - 0.5 * params.T * ss.slope
    if abs(denom) < TRANSVERSALITY_LIMIT:
        raise TransversalityError(
            f"grazing switching: 1 - T/2*slope = {denom:.3e}"
        )
    return 1.0 / denom


@dataclass(frozen=True)
class StabilityReport:
    kappa: float
    monodromy: np.ndarray       # (5,5) real period-map linearization
    eigenvalues: np.ndarray     # (5,) complex, sorted by descending magnitude
    spectral_radius: float
    stable: bool


def monodromy(params: AmplifierParams, u0: float) -> StabilityReport:
    """Assemble the period map M about the steady state at u0 and classify it."""
    ss = solve_steady_state(params, u0)
    kap = compute_kappa(params, ss)
    update = np.eye(5)
    update[4] += (params.T * kap / params.LC) * params.gamma
    M = matrix_exp(params, (1.0 - ss.a) * params.T) @ update @ matrix_exp(
        params, ss.a * params.T
    )
    eig = np.linalg.eigvals(M)
    eig = eig[np.argsort(-np.abs(eig))]
    radius = float(np.abs(eig[0]))
    return StabilityReport(
        kappa=kap, monodromy=M, eigenvalues=eig,
        spectral_radius=radius, stable=radius < 1.0,
    )


def sylvester_residual(
    params: AmplifierParams, u0: float, mu_candidate: complex
) -> complex:
    """Scalar eigenvalue test: zero iff mu_candidate is an eigenvalue of M.

    Evaluates 1 + (T kappa / LC) gamma^T R diag(e^{lam T}/(e^{lam T} - mu))
    R^{-1} e5.  Undefined on the poles e^{lam T} themselves.
    """
    ss = solve_steady_state(params, u0)
    kap = compute_kappa(params, ss)
    dec = modal_decomposition(params)
    exps = np.exp(dec.eigenvalues * params.T)
    gaps = exps - mu_candidate
    if np.abs(gaps).min() < 1e-12:
        raise PoleError(
            f"candidate {mu_candidate} within 1e-12 of a propagator eigenvalue"
        )
    gR = params.gamma @ dec.right_eigvecs
    le5 = dec.left_eigvecs[:, 4]
    return 1.0 + (params.T * kap / params.LC) * complex(gR @ (exps / gaps * le5))


def stability_threshold(
    params: AmplifierParams,
    u0: float,
    sweep_param: str,
    lo: float,
    hi: float,
    tol: float = 10.0,
) -> float:
    """Locate the instability onset along one parameter by bisection.

    Parameters
    ----------
    sweep_param : str
        Field name of AmplifierParams to vary (e.g. ``"c1"``).
    lo, hi : float
        Bracketing values; the operating point must be stable at ``lo`` and
        unstable at ``hi``.
    tol : float
        Absolute tolerance on the parameter at the crossing (default 10,
        appropriate for gains of order 1e5).

    Notes
    -----
    Bisection is deliberate: the spectral radius is continuous but loses
    smoothness where the dominant eigenvalue pair changes, which defeats
    Newton-type iterations.
    """
    if not lo < hi:
        raise NoSignChangeError(f"degenerate bracket [{lo}, {hi}]")

    def radius(value: float) -> float:
        return monodromy(params.replace(**{sweep_param: value}), u0).spectral_radius

    r_lo, r_hi = radius(lo), radius(hi)
    if (r_lo - 1.0) * (r_hi - 1.0) > 0:
        raise NoSignChangeError(
            f"spectral radius - 1 has the same sign at both ends: "
            f"{r_lo - 1.0:.3e} at {lo}, {r_hi - 1.0:.3e} at {hi}"
        )
    if r_lo > 1.0:  # orient so lo is the stable side
        lo, hi = hi, lo
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if radius(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def pair_eigenvalue_paths(eigenvalue_sets: np.ndarray) -> np.ndarray:
    """Order eigenvalues consistently along a parameter sweep.

    Takes an (n_points, 5) complex array (one unordered eigenvalue set per
    sweep point) and permutes each row after the first so that each branch
    follows its nearest continuation in the complex plane, for path plots
    that must not jump between branches.
    """
    paths = np.asarray(eigenvalue_sets, dtype=complex).copy()
    for i in range(1, paths.shape[0]):
        cost = np.abs(paths[i - 1][:, None] - paths[i][None, :])
        _, perm = linear_sum_assignment(cost)
        paths[i] = paths[i][perm]
    return paths
