import numpy as np
import pytest

from classd import (
    NoSignChangeError,
    PoleError,
    TransversalityError,
    compute_kappa,
    matrix_exp,
    modal_decomposition,
    monodromy,
    pair_eigenvalue_paths,
    solve_steady_state,
    stability_threshold,
    sylvester_residual,
)
from classd.steady import SteadyState


def test_kappa_trivial_and_graze(params):
    flat = SteadyState(u0=0.0, a=0.5, x_at_switch=np.zeros(5), slope=0.0)
    assert compute_kappa(params, flat) == 1.0
    grazing = SteadyState(u0=0.0, a=0.5, x_at_switch=np.zeros(5),
                          slope=2.0 / params.T)
    with pytest.raises(TransversalityError):
        compute_kappa(params, grazing)


def test_kappa_rc_input_independent(params_rc):
    k1 = compute_kappa(params_rc, solve_steady_state(params_rc, 0.2))
    k2 = compute_kappa(params_rc, solve_steady_state(params_rc, -0.5))
    assert k1 == pytest.approx(k2, rel=1e-9)


def test_kappa_golden(params):
    # golden cross-checked against a finite-difference slope oracle on the
    # reconstructed waveform (agreement 2e-10 relative)
    kap = compute_kappa(params, solve_steady_state(params, 0.0))
    assert kap == pytest.approx(0.9995379589560583, rel=1e-12)


def test_monodromy_stable_at_reference(params):
    report = monodromy(params, 0.0)
    assert report.stable
    assert report.spectral_radius == pytest.approx(0.92267, rel=1e-3)
    mags = np.abs(report.eigenvalues)
    assert np.all(np.diff(mags) <= 1e-12)


def test_monodromy_rank_one_structure(params):
    """With the switching correction removed the period map is the plain
    propagator; assembled inline as the oracle."""
    ss = solve_steady_state(params, 0.0)
    a, T = ss.a, params.T
    plain = matrix_exp(params, (1 - a) * T) @ matrix_exp(params, a * T)
    expected = np.exp(modal_decomposition(params).eigenvalues * T)
    got = np.sort_complex(np.linalg.eigvals(plain))
    assert np.abs(np.sort_complex(expected) - got).max() < 1e-10 * np.abs(got).max()


def test_monodromy_unstable_at_high_gain(params):
    assert not monodromy(params.replace(c1=4.0e5), 0.0).stable


def test_sylvester_vanishes_on_eigenvalues(params):
    report = monodromy(params, 0.0)
    for mu in report.eigenvalues:
        assert abs(sylvester_residual(params, 0.0, complex(mu))) < 1e-6


def test_sylvester_limits_and_pole(params):
    assert sylvester_residual(params, 0.0, 1e9 + 0j) == pytest.approx(1.0, abs=1e-3)
    assert sylvester_residual(params, 0.0, 1e13 + 0j) == pytest.approx(1.0, abs=1e-7)
    with pytest.raises(PoleError):
        sylvester_residual(params, 0.0, 1.0 + 0j)  # e^{lambda T} for lambda = 0


def test_sylvester_roots_match_determinant_route(params):
    """Polish each determinant-route eigenvalue with a secant iteration on
    the scalar form; the root must stay within 1e-6 relative."""
    report = monodromy(params, 0.0)
    for mu in report.eigenvalues:
        z0 = complex(mu) * (1 + 3e-4)
        z1 = complex(mu) * (1 - 3e-4)
        f0 = sylvester_residual(params, 0.0, z0)
        f1 = sylvester_residual(params, 0.0, z1)
        for _ in range(60):
            if f1 == f0:
                break
            z2 = z1 - f1 * (z1 - z0) / (f1 - f0)
            z0, f0, z1 = z1, f1, z2
            f1 = sylvester_residual(params, 0.0, z1)
            if abs(z1 - z0) < 1e-12 * abs(z1):
                break
        assert abs(z1 - mu) <= 1e-6 * abs(mu)


def test_monodromy_matches_edge_map_eigenvalues(params):
    from classd import script_N
    rng = np.random.default_rng(7)
    for _ in range(5):
        p = params.replace(c1=rng.uniform(1.0e5, 2.0e5), k=int(rng.integers(0, 2)))
        u0 = rng.uniform(-0.85, 0.85)
        ev_m = monodromy(p, u0).eigenvalues
        ev_n = np.linalg.eigvals(script_N(p, u0))
        ev_n = ev_n[np.argsort(-np.abs(ev_n))]
        assert np.abs(ev_m - ev_n).max() <= 1e-8 * np.abs(ev_m).max()


def test_threshold_location(params):
    c1c = stability_threshold(params, 0.0, "c1", 1.0e5, 4.5e5, tol=10.0)
    assert 2.206e5 <= c1c <= 2.208e5
    assert monodromy(params.replace(c1=c1c - 200.0), 0.0).stable
    assert not monodromy(params.replace(c1=c1c + 200.0), 0.0).stable


def test_threshold_crossing_is_conjugate_pair(params):
    c1c = stability_threshold(params, 0.0, "c1", 1.0e5, 4.5e5, tol=1.0)
    eig = monodromy(params.replace(c1=c1c), 0.0).eigenvalues
    top2 = eig[:2]
    assert top2[0] == pytest.approx(np.conj(top2[1]), rel=1e-9)
    assert abs(top2[0].imag) > 1e-3
    for mu in top2:
        assert 1 - 1e-4 <= abs(mu) <= 1 + 1e-4


def test_threshold_errors(params):
    with pytest.raises(NoSignChangeError):
        stability_threshold(params, 0.0, "c1", 2.0e5, 2.0e5)
    with pytest.raises(NoSignChangeError):
        stability_threshold(params, 0.0, "c1", 1.0e5, 1.5e5)


def test_eigenvalue_path_pairing():
    # branches that swap order between steps must be re-matched, not jumped
    step0 = np.array([1.0 + 0j, 0.5j, -0.5j, -0.2 + 0j, 0.1 + 0j])
    step1 = np.array([0.52j, 0.98 + 0j, 0.11 + 0j, -0.52j, -0.21 + 0j])
    paths = pair_eigenvalue_paths(np.vstack([step0, step1]))
    assert np.abs(paths[1] - np.array([0.98, 0.52j, -0.52j, -0.21, 0.11])).max() < 1e-12
