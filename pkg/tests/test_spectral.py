import math

import numpy as np
import pytest

from fanodyn.regime import discriminant_coeffs
from fanodyn.core import DegenerateEigenvector, NoCrossing, OutsideValidity, RegimeTag, VParams, WrongRegime
from fanodyn.regime import boundary_delta, classify
from fanodyn.spectral import (
    Spectrum,
    SpectrumMethod,
    coherence_lifetime,
    critical_epsilon,
    critical_p,
    eigenvalues_cardano,
    eigenvalues_numeric,
    eigenvector_expansion,
    eigenvectors_exact,
    expansion_coefficients,
    generator_matrix_units,
    match_setwise,
    slow_eigenvalue,
    z20_stable,
    z_expansion,
)
from oracles import eigenvalues_mp, z_coefficients_mp


def _draws(n, seed):
    rng = np.random.default_rng(seed)
    return zip(rng.uniform(0, 1, n), 10 ** rng.uniform(-2, 2, n), 10 ** rng.uniform(-2, 3, n))


# ---------------------------------------------------------------------------
# Eigenvalues
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("p, y, n", list(_draws(40, 1)) + [(1.0, 0.1, 1e3), (0.0, 3.0, 5.0), (1.0, 10.0, 1e3)])
def test_cardano_against_mp_oracle(p, y, n):
    ref = eigenvalues_mp(p, y, n)
    got = eigenvalues_cardano(VParams(y, p, n), with_vectors=False).lambdas
    _, err = match_setwise(ref, got)
    assert err < 1e-9


def test_cardano_vs_numeric_random():
    worst = 0.0
    for p, y, n in _draws(300, 2):
        params = VParams(y, p, n)
        a = eigenvalues_cardano(params, with_vectors=False).lambdas
        b = eigenvalues_numeric(params, with_vectors=False).lambdas
        worst = max(worst, match_setwise(a, b)[1])
    assert worst < 1e-9


def test_p0_block_structure():
    n, y = 7.0, 2.5
    lam = eigenvalues_cardano(VParams(y, 0.0, n), with_vectors=False).lambdas
    expected = [-(3 * n + 1), complex(-(n + 1), y), complex(-(n + 1), -y)]
    assert match_setwise(expected, lam)[1] < 1e-13


def test_p1_small_splitting_rates():
    lam = eigenvalues_cardano(VParams(0.1, 1.0, 1e3), with_vectors=False).lambdas
    mags = sorted(abs(lam))
    assert mags[2] == pytest.approx(4e3, rel=0.01)
    assert mags[1] == pytest.approx(1e3, rel=0.01)
    assert mags[0] == pytest.approx(7.5e-6, rel=0.02)


def test_gamma_scaling_of_eigenvalues():
    a = eigenvalues_cardano(VParams(2.0, 0.6, 40.0), with_vectors=False).lambdas
    b = eigenvalues_cardano(VParams(6.0, 0.6, 40.0, gamma=3.0), with_vectors=False).lambdas
    assert np.allclose(b, 3 * a, rtol=1e-13)


def test_conjugation_closure():
    for p, y, n in _draws(50, 3):
        lam = eigenvalues_cardano(VParams(y, p, n), with_vectors=False).lambdas
        _, err = match_setwise(lam, np.conj(lam))
        assert err < 1e-12


@pytest.mark.parametrize("p, n", [(0.5, 1e4), (1.0, 1e3), (0.8, 10.0)])
def test_critical_point_repeated_root(p, n):
    y = boundary_delta(p, n)
    lam = eigenvalues_numeric(VParams(y, p, n), with_vectors=False).lambdas
    norm = np.linalg.norm(generator_matrix_units(p, y, n))
    gap = min(abs(lam[i] - lam[j]) for i in range(3) for j in range(i + 1, 3))
    assert gap < 1e-6 * norm


# ---------------------------------------------------------------------------
# Eigenvectors
# ---------------------------------------------------------------------------


def test_eigen_residuals_random():
    for p, y, n in _draws(100, 4):
        params = VParams(y, p, n)
        spec = eigenvalues_cardano(params)
        a = generator_matrix_units(p, y, n)
        norm = np.linalg.norm(a, 2)
        for k in range(3):
            v = spec.eigvecs[:, k]
            res = np.linalg.norm(a @ v - spec.lambdas[k] * v)
            assert res <= 1e-8 * norm * np.linalg.norm(v)


def test_eigenvectors_third_row_unity_generic():
    spec = eigenvalues_cardano(VParams(10.0, 1.0, 1e3))
    assert np.allclose(spec.eigvecs[2], 1.0)


def test_p0_eigenvectors():
    spec = eigenvalues_cardano(VParams(2.0, 0.0, 5.0))
    for k in range(3):
        v = spec.eigvecs[:, k]
        if abs(spec.lambdas[k].imag) > 0:
            assert v[0] == 0
        else:
            assert np.allclose(v, [1, 0, 0])


def test_degenerate_eigenvector_without_fallback():
    params = VParams(0.0, 0.5, 3.0)
    spec = eigenvalues_cardano(params, with_vectors=False)
    with pytest.raises(DegenerateEigenvector):
        eigenvectors_exact(params, spec, fallback=False)
    m = eigenvectors_exact(params, spec)
    assert np.all(np.isfinite(m))


def test_eigenvector_expansion_leading_entries():
    # Leading entries of the expanded matrix against exact eigenvectors at
    # the large-splitting dynamics point (relative 1 %).
    params = VParams(10.0, 1.0, 1e3)
    exp = eigenvector_expansion(params)
    spec = eigenvalues_cardano(params)
    lam_idx = np.argsort(-np.abs(spec.lambdas.real))  # fast, ..., slow
    order = [lam_idx[0], lam_idx[2], lam_idx[1]]  # fast, slow, middle
    exact = spec.eigvecs[:, order]
    for k in range(3):
        for row in range(2):
            if abs(exp.M[row, k]) > 1e-6:
                assert exact[row, k].real == pytest.approx(exp.M[row, k], rel=0.01)


def test_expansion_determinant_against_exact():
    params = VParams(0.1, 0.95, 1e3)
    exp = eigenvector_expansion(params)
    spec = eigenvalues_cardano(params)
    assert exp.det == pytest.approx(np.linalg.det(spec.eigvecs).real, rel=0.02)
    b2 = (0.1 / 1e3) ** 2
    assert exp.det == pytest.approx((exp.coeffs.T1 + exp.coeffs.T2 * b2) * (1e3 / 0.1) ** 2)


def test_expansion_adjugate_is_inverse():
    exp = eigenvector_expansion(VParams(0.1, 0.95, 1e3))
    prod = exp.M @ exp.T / exp.det
    assert np.allclose(prod, np.eye(3), atol=2e-3)


# ---------------------------------------------------------------------------
# Perturbative expansion
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("p, y", [(1.0, 0.1), (0.9, 0.1), (0.5, 0.3), (0.95, 3.0), (0.3, 0.05)])
def test_z_coefficients_against_numeric_extraction(p, y):
    ref = z_coefficients_mp(p, y, order=3)
    zc = z_expansion(VParams(y, p, 1e3))
    got = sorted((zc.z[j, :4].real for j in range(3)), key=lambda r: r[0])
    for r, g in zip(ref, got):
        assert np.allclose(g[:3], r[:3], rtol=1e-6, atol=1e-9)
        assert g[3] == pytest.approx(r[3], rel=1e-4, abs=1e-8)
    assert np.abs(zc.z[:, :4].imag).max() < 1e-9


def test_z0_z1_independent_of_splitting():
    a = z_expansion(VParams(0.01, 0.8, 1e3))
    b = z_expansion(VParams(0.9, 0.8, 1e3))
    assert np.allclose(a.z[:, :2], b.z[:, :2], rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("y", [0.05, 0.1, 0.5])
def test_z2_split(y):
    zc = z_expansion(VParams(y, 0.7, 1e3))
    assert np.allclose(zc.z[:, 2], zc.f[:, 0] * y * y + zc.f[:, 1], rtol=1e-9, atol=1e-12)


def test_z0_limits_at_p1():
    zc = z_expansion(VParams(0.1, 1.0, 1e3))
    z0 = sorted(zc.z[:, 0].real)
    assert np.allclose(z0, [-4.0, -1.0, 0.0], atol=1e-9)


def test_f21_limit():
    c = expansion_coefficients(1.0 - 1e-9)
    assert c.f1[1] == pytest.approx(-0.749, abs=0.002)


def test_truncated_eigenvalues_accuracy():
    params = VParams(0.1, 0.9, 1e3)
    approx = z_expansion(params).eigenvalues(1e3, order=2)
    exact = eigenvalues_cardano(params, with_vectors=False).lambdas
    for j in range(3):
        assert abs(approx[j] - exact[j]) / abs(exact[j]) < 1e-3


def test_z0_reproduces_large_nbar_limit():
    n = 1e6
    params = VParams(0.1, 0.7, n)
    lead = z_expansion(params).z[:, 0] * n
    exact = eigenvalues_cardano(params, with_vectors=False).lambdas
    assert match_setwise(exact, lead)[1] < 1e-3


def test_root_labels_match_cardano_order():
    params = VParams(0.1, 0.9, 1e3)
    approx = z_expansion(params).eigenvalues(1e3, order=2)
    exact = eigenvalues_cardano(params, with_vectors=False).lambdas
    perm, _ = match_setwise(exact, approx)
    assert perm == (0, 1, 2)


def test_series_low_orders_literal():
    # First binomial-series terms written out by hand.
    zc = z_expansion(VParams(0.2, 0.8, 1e3))
    u, v, w, b = zc.u, zc.v, zc.w, zc.b
    d = discriminant_coeffs(0.8, 0.2).as_array()
    alpha = [d[6 - k] / d[6] for k in range(0, 7)]
    assert u[1] == pytest.approx(alpha[1] / 2)
    assert u[2] == pytest.approx(alpha[2] / 2 - alpha[1] ** 2 / 8)
    assert u[3] == pytest.approx(alpha[3] / 2 - alpha[1] * alpha[2] / 4 + alpha[1] ** 3 / 16)
    assert v[1] == pytest.approx(b[1] / 3)
    assert v[2] == pytest.approx(b[2] / 3 - b[1] ** 2 / 9)
    assert w[1] == pytest.approx(-v[1])
    assert w[2] == pytest.approx(v[1] ** 2 - v[2])
    assert w[3] == pytest.approx(-v[3] + 2 * v[1] * v[2] - v[1] ** 3)


def test_outside_window():
    with pytest.raises(OutsideValidity):
        z_expansion(VParams(0.1, 0.9, 50.0))
    with pytest.raises(OutsideValidity):
        z_expansion(VParams(5.0, 0.8, 1e3))
    assert z_expansion(VParams(5.0, 0.8, 1e3), force=True).z.shape == (3, 9)


def test_z20_stable_matches_quadratic_root():
    for eps in (1e-12, 1e-6, 0.1):
        p = 1 - eps
        roots = np.roots([1.0, 4.0, 3.0 * (1 - p * p)])
        if eps > 1e-8:
            assert z20_stable(eps) == pytest.approx(max(roots), rel=1e-8)
        if eps < 1e-5:
            assert z20_stable(eps) == pytest.approx(-1.5 * eps, rel=1e-3)


# ---------------------------------------------------------------------------
# Critical alignment and lifetimes
# ---------------------------------------------------------------------------


def test_critical_epsilon_range_and_monotone():
    ys = np.logspace(-2, 2, 17)
    eps = np.array([critical_epsilon(1e3, y) for y in ys])
    assert np.all(np.diff(eps) > 0)
    assert eps[0] == pytest.approx(5e-11, rel=0.05)
    assert eps[-1] == pytest.approx(5e-3, rel=0.05)
    assert 0.9 < critical_p(1e3, 0.1) < 1.0


def test_critical_epsilon_is_crossing():
    y, n = 0.3, 1e3
    eps = critical_epsilon(n, y)
    zc = z_expansion(VParams(y, 1 - eps, n))
    assert abs(z20_stable(eps)) == pytest.approx(abs(zc.z[1, 2]) / n**2, rel=1e-6)


def test_critical_epsilon_errors():
    with pytest.raises(OutsideValidity):
        critical_epsilon(10.0, 0.1)
    with pytest.raises(NoCrossing):
        critical_epsilon(1e3, 1e4)


def test_branch_switch_of_slow_rate():
    n, y = 1e3, 0.1
    eps = critical_epsilon(n, y)
    above = slow_eigenvalue(eigenvalues_cardano(VParams(y, 1 - eps / 100, n), with_vectors=False))[0]
    below = slow_eigenvalue(eigenvalues_cardano(VParams(y, 1 - eps * 100, n), with_vectors=False))[0]
    assert abs(above) == pytest.approx(0.75 * y * y / n, rel=0.05)
    assert abs(below) == pytest.approx(abs(z20_stable(eps * 100)) * n, rel=0.05)


@pytest.mark.parametrize("y, tau", [(10.0, 13.4), (1.0, 1340.0)])
def test_supercritical_lifetime(y, tau):
    lt = coherence_lifetime(VParams(y, 1.0, 1e3))
    assert lt.branch == "supercritical"
    assert lt.tau_formula == pytest.approx(tau)
    assert lt.tau_exact == pytest.approx(tau, rel=0.03)
    assert lt.ratio_to_weak_pumping == pytest.approx(670.0)
    assert lt.label_consistent


def test_subcritical_lifetime_decreases_with_nbar():
    a = coherence_lifetime(VParams(0.1, 0.9, 1e3))
    b = coherence_lifetime(VParams(0.1, 0.9, 1e4))
    assert a.branch == b.branch == "subcritical"
    assert b.tau_formula < a.tau_formula
    assert a.tau_exact == pytest.approx(a.tau_formula, rel=0.01)


def test_lifetime_rejects_underdamped():
    with pytest.raises(WrongRegime):
        coherence_lifetime(VParams(1e4, 1.0, 1e2))
    with pytest.raises(OutsideValidity):
        coherence_lifetime(VParams(0.1, 1.0, 10.0))
