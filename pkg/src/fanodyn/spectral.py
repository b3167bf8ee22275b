"""Eigenvalues, eigenvectors and their large-``nbar`` expansions.

The generator's characteristic cubic is solved in closed form (Cardano) and,
independently, through companion-matrix roots with Halley refinement.  The
perturbative description writes each eigenvalue as

    lambda_j = r * sum_k z_jk x**k,      x = 1 / nbar,

with coefficients obtained by expanding the Cardano expression in ``x``.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._series import binomial_series
from .core import (
    DegenerateEigenvector,
    NoCrossing,
    OutsideValidity,
    RegimeTag,
    VParams,
    WrongRegime,
    validate,
)
from .regime import cardano_invariants, classify, discriminant_units, _dk_terms

__all__ = [
    "SpectrumMethod",
    "Spectrum",
    "ZCoeffs",
    "ExpansionCoeffs",
    "EigenvectorExpansion",
    "Lifetime",
    "OMEGA",
    "ROOT_LABELS",
    "char_poly",
    "generator_matrix_units",
    "eigenvalues_cardano",
    "eigenvalues_numeric",
    "match_setwise",
    "eigenvectors_exact",
    "null_vector",
    "in_validity_window",
    "z_expansion",
    "z20_stable",
    "expansion_coefficients",
    "eigenvector_expansion",
    "critical_epsilon",
    "critical_p",
    "coherence_lifetime",
    "slow_eigenvalue",
]

OMEGA = complex(-0.5, math.sqrt(3.0) / 2.0)
#: Cube-root-of-unity labels ``(alpha_j, beta_j)`` defining the root order.
ROOT_LABELS = ((1.0 + 0j, 1.0 + 0j), (OMEGA * OMEGA, OMEGA), (OMEGA, OMEGA * OMEGA))

#: Order of the full perturbative eigenvalue expansion.
Z_ORDER = 8
#: Lifetime prefactor for supercritical alignment, ``1 / |f21(1)|`` rounded.
TAU_SUPER_PREFACTOR = 1.34
#: Weak-pumping coherence lifetime prefactor, ``tau = 2 / gamma * y**-2``.
TAU_WEAK_PUMPING_PREFACTOR = 2.0


class SpectrumMethod(str, enum.Enum):
    CARDANO = "cardano"
    NUMERIC = "numeric"
    EXPANSION = "expansion"


@dataclass(frozen=True)
class Spectrum:
    """Three eigenvalues with matching column eigenvectors.

    Attributes
    ----------
    lambdas : ndarray of complex, shape (3,)
        Eigenvalues in physical units (rate, same units as ``gamma``).
    eigvecs : ndarray of complex, shape (3, 3) or None
        Columns are eigenvectors, normalised to a unit third component where
        that component does not vanish.
    method : SpectrumMethod
    """

    lambdas: np.ndarray
    eigvecs: np.ndarray | None
    method: SpectrumMethod


def generator_matrix_units(p: float, y: float, nbar: float) -> np.ndarray:
    """Generator in units ``gamma = 1``."""
    r = nbar
    return np.array(
        [
            [-(3 * r + 1), -p * (r + 1), 0.0],
            [-p * (3 * r + 1), -(r + 1), y],
            [0.0, -y, -(r + 1)],
        ]
    )


def char_poly(p: float, y: float, nbar: float) -> tuple[float, float, float]:
    """Coefficients ``(c2, c1, c0)`` of ``lambda**3 + c2 lambda**2 + c1 lambda + c0``.

    Written as sums of non-negative terms (for ``0 <= p <= 1``) so they carry
    full relative precision even when the slow eigenvalue is tiny.
    """
    r = nbar
    rg = r + 1.0
    r3g = 3.0 * r + 1.0
    omp2 = (1.0 - p) * (1.0 + p)
    c2 = 5.0 * r + 3.0
    c1 = omp2 * r3g * rg + r3g * rg + rg * rg + y * y
    c0 = r3g * (omp2 * rg * rg + y * y)
    return c2, c1, c0


def _horner(coeffs, lam):
    c2, c1, c0 = coeffs
    val = ((lam + c2) * lam + c1) * lam + c0
    der = (3.0 * lam + 2.0 * c2) * lam + c1
    return val, der


def _newton_polish(coeffs, lam, steps: int = 2):
    for _ in range(steps):
        val, der = _horner(coeffs, lam)
        if der == 0:
            break
        cand = lam - val / der
        if abs(_horner(coeffs, cand)[0]) < abs(val):
            lam = cand
        else:
            break
    return lam


def _cardano_units(p: float, y: float, nbar: float, polish: bool = True) -> np.ndarray:
    a, b, _, e = cardano_invariants(float(p), float(y), float(nbar))
    d = discriminant_units(p, y, nbar)
    sq = np.sqrt(complex(d))
    t3 = e + sq
    if abs(t3) < 1e-300:
        t3 = e - sq
    t = t3 ** (1.0 / 3.0)
    lams = np.empty(3, dtype=complex)
    for j, (alpha, beta) in enumerate(ROOT_LABELS):
        if t == 0:
            lams[j] = -a
        else:
            lams[j] = -a + alpha * b / t - beta * t
    if polish:
        coeffs = char_poly(p, y, nbar)
        lams = np.array([_newton_polish(coeffs, lam) for lam in lams])
    # A real generator has real or conjugate-pair eigenvalues.
    for j in range(3):
        if abs(lams[j].imag) <= 1e-13 * abs(lams[j]):
            lams[j] = complex(lams[j].real, 0.0)
    return lams


def eigenvalues_cardano(params: VParams, *, polish: bool = True, with_vectors: bool = True) -> Spectrum:
    """Closed-form eigenvalues ``-A + alpha_j B / T - beta_j T``.

    ``T`` is the principal complex cube root of ``E + sqrt(D)``.  The root
    order is defined by the labels in :data:`ROOT_LABELS`.  One guarded
    Newton step on the characteristic cubic removes cancellation error in
    the slow eigenvalue.
    """
    validate(params)
    lams = _cardano_units(params.p, params.y, params.nbar, polish=polish) * params.gamma
    spec = Spectrum(lams, None, SpectrumMethod.CARDANO)
    if with_vectors:
        spec = Spectrum(lams, eigenvectors_exact(params, spec), SpectrumMethod.CARDANO)
    return spec


def _halley_refine(coeffs, lam, steps: int = 4):
    c2, c1, _ = coeffs
    for _ in range(steps):
        val, der = _horner(coeffs, lam)
        sec = 6.0 * lam + 2.0 * c2
        denom = 2.0 * der * der - val * sec
        if denom == 0:
            break
        cand = lam - 2.0 * val * der / denom
        if not abs(_horner(coeffs, cand)[0]) < abs(val):
            break
        lam = cand
    return lam


def eigenvalues_numeric(params: VParams, *, with_vectors: bool = True) -> Spectrum:
    """Eigenvalues from companion-matrix roots of the characteristic cubic.

    The roots are refined by Halley iteration on the cubic.  No code is shared
    with the Cardano path beyond the polynomial coefficients.
    """
    validate(params)
    coeffs = char_poly(params.p, params.y, params.nbar)
    roots = np.roots([1.0, *coeffs]).astype(complex)
    roots = np.array([_halley_refine(coeffs, lam) for lam in roots])
    for j in range(3):
        if abs(roots[j].imag) <= 1e-13 * abs(roots[j]):
            roots[j] = complex(roots[j].real, 0.0)
    roots = roots[np.lexsort((roots.imag, roots.real))]
    lams = roots * params.gamma
    spec = Spectrum(lams, None, SpectrumMethod.NUMERIC)
    if with_vectors:
        spec = Spectrum(lams, eigenvectors_exact(params, spec), SpectrumMethod.NUMERIC)
    return spec


def match_setwise(a, b) -> tuple[tuple[int, int, int], float]:
    """Optimal pairing of two eigenvalue triples.

    Returns
    -------
    perm : tuple
        ``b[perm[i]]`` is paired with ``a[i]``.
    err : float
        Largest relative deviation ``|a_i - b_perm(i)| / max(|a_i|, tiny)``.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    best = None
    for perm in itertools.permutations(range(3)):
        err = max(abs(a[i] - b[perm[i]]) / max(abs(a[i]), 1e-300) for i in range(3))
        if best is None or err < best[1]:
            best = (perm, err)
    return best


def null_vector(mat: np.ndarray) -> np.ndarray:
    """Null vector of a (numerically) rank-2 complex 3x3 matrix.

    Uses the largest cross product of two rows; for 3x3 matrices this is the
    adjugate column and is insensitive to the scaling of the rows.
    """
    rows = [mat[0], mat[1], mat[2]]
    best = None
    for i, j in ((0, 1), (0, 2), (1, 2)):
        v = np.cross(rows[i], rows[j])
        nv = np.linalg.norm(v)
        if best is None or nv > best[1]:
            best = (v, nv)
    v, nv = best
    if nv == 0:
        raise DegenerateEigenvector("eigenspace is more than one-dimensional")
    return v / nv


def _normalise_column(v: np.ndarray) -> np.ndarray:
    if abs(v[2]) > 1e-12 * np.linalg.norm(v):
        return v / v[2]
    k = int(np.argmax(np.abs(v)))
    return v / v[k]


def eigenvectors_exact(params: VParams, spectrum: Spectrum, *, fallback: bool = True) -> np.ndarray:
    """Closed-form eigenvectors ``[p y (r+1) / Dj, -y (3r+1+l) / Dj, 1]``.

    ``Dj = -(3r+1+l)(r+1+l) + p**2 (r+1)(3r+1)`` (units ``gamma = 1``).  On
    an eigenvector ``Dj = y**2 (3r+1+l)/(r+1+l)`` as well; the better
    conditioned of the two expressions is used.

    Parameters
    ----------
    fallback : bool
        If true, columns whose denominator degenerates are replaced by a
        numerical null vector of ``A - lambda``; otherwise
        :class:`DegenerateEigenvector` is raised.
    """
    p, y, r = params.p, params.y, params.nbar
    a_mat = generator_matrix_units(p, y, r)
    norm_a = np.linalg.norm(a_mat, 2)
    cols = []
    for lam_phys in spectrum.lambdas:
        lam = complex(lam_phys) / params.gamma
        s3 = 3 * r + 1 + lam
        s1 = r + 1 + lam
        prod = s3 * s1
        pp = p * p * (r + 1) * (3 * r + 1)
        dj_a = -prod + pp
        cond_a = (abs(prod) + pp) / max(abs(dj_a), 1e-300)
        dj = dj_a
        if y > 0 and s1 != 0:
            dj_b = y * y * s3 / s1
            cond_b = 1.0 + (r + 1 + abs(lam)) / abs(s1)
            if cond_b < cond_a:
                dj = dj_b
        degenerate = abs(dj) < 1e-12 * norm_a**2 or y == 0 or abs(dj_a) < 1e-14 * (abs(prod) + pp)
        if degenerate:
            if not fallback:
                raise DegenerateEigenvector(f"eigenvector denominator vanishes for lambda={lam_phys!r}")
            v = null_vector(a_mat - lam * np.eye(3))
        else:
            v = np.array([y * p * (r + 1) / dj, -y * s3 / dj, 1.0], dtype=complex)
        cols.append(_normalise_column(v))
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# Perturbative expansion in x = 1/nbar
# ---------------------------------------------------------------------------


def in_validity_window(p: float, y: float, nbar: float) -> bool:
    """Parameter window in which the truncated ``1/nbar`` expansion is trusted."""
    if nbar < 100:
        return False
    if y > 1:
        return 0.89 < p <= 1
    return 0.1 < p <= 1


def _check_window(p, y, nbar, force):
    if not force and not in_validity_window(p, y, nbar):
        raise OutsideValidity(
            f"expansion needs nbar >= 100 and p > 0.1 (p in (0.89, 1] when delta/gamma > 1); "
            f"got p={p!r}, delta/gamma={y!r}, nbar={nbar!r}"
        )


@dataclass(frozen=True)
class ZCoeffs:
    """Coefficients of ``lambda_j = r sum_k z_jk x**k``.

    Attributes
    ----------
    z : ndarray of complex, shape (3, 9)
        ``z[j-1, k]`` for ``k = 0..8``.  Orders ``k <= 6`` are complete; the
        two highest orders only carry the terms generated by the truncated
        ``W`` series.
    k_factor : complex
        ``K = (c3/6 + sqrt(d6/108))**(1/3)``.
    f : ndarray of complex, shape (3, 2)
        ``z_j2 = f[j, 0] * y**2 + f[j, 1]``.
    """

    p: float
    y: float
    z: np.ndarray
    k_factor: complex
    f: np.ndarray
    b: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    intermediates: dict = field(default_factory=dict)

    def eigenvalues(self, nbar: float, order: int = 2, gamma: float = 1.0) -> np.ndarray:
        """Truncated eigenvalues ``gamma nbar sum_{k<=order} z_jk nbar**-k``."""
        x = 1.0 / nbar
        powers = x ** np.arange(order + 1)
        return gamma * nbar * (self.z[:, : order + 1] @ powers)


def _k_factor(p: float) -> complex:
    p2 = p * p
    c3 = (16.0 + 54.0 * p2) / 9.0
    s = np.sqrt(complex(-36.0 * p2 * p2 * (1.0 + 3.0 * p2) / 108.0))
    return (c3 / 6.0 + s) ** (1.0 / 3.0)


def _f_split(p: float):
    """``f_j1, f_j2`` with ``z_j2 = f_j1 y**2 + f_j2``, plus the intermediates."""
    p2 = p * p
    kk = _k_factor(p)
    k3 = kk**3
    g = 4.0 / 3.0 + 3.0 * p2
    sq = math.sqrt((1.0 + 3.0 * p2) / 3.0)
    h1 = 4.0 * (16.0 + 60.0 * p2 + 27.0 * p2 * p2)
    h2 = -4.0 * p2 * p2 * (22.0 + 171.0 * p2)
    g1 = -h1 / (72.0 * p2 * p2 * (1.0 + 3.0 * p2))
    g2 = -h2 / (72.0 * p2 * p2 * (1.0 + 3.0 * p2)) - (2.0 / 81.0) * ((6.0 + 27.0 * p2) / (1.0 + 3.0 * p2)) ** 2
    l1 = (2.0 / 3.0 + p2 * sq * g1 * 1j) / k3
    l2 = (p2 / 3.0 + p2 * sq * g2 * 1j) / k3
    b1 = (4.0 * p2 / 3.0 + (2.0 / 9.0) * p2 * (6.0 + 27.0 * p2) / (1.0 + 3.0 * p2) * sq * 1j) / k3
    s1 = l1 / 3.0
    s2 = l2 / 3.0 - (b1 / 3.0) ** 2
    v1 = b1 / 3.0
    f = np.zeros((3, 2), dtype=complex)
    for j, (alpha, beta) in enumerate(ROOT_LABELS):
        pref = alpha / (3.0 * kk)
        lead = pref * g - beta * kk
        f[j, 0] = pref + lead * s1
        f[j, 1] = -pref * p2 + 4.0 * p2 * pref * v1 + lead * s2 - pref * g * v1 * v1
    inter = {"s1": s1, "s2": s2, "l1": l1, "l2": l2, "g1": g1, "g2": g2, "h1": h1, "h2": h2}
    return f, inter


def _zcoeffs_units(p: float, y: float) -> ZCoeffs:
    p2 = p * p
    d = _dk_terms(p, y)
    c1 = 4.0 * y * y + 2.0 * p2
    c2 = 8.0 * p2
    s = np.sqrt(complex(d[6] / 108.0))
    kk = _k_factor(p)
    k3 = kk**3
    order = 6
    alpha_series = [0.0] + [d[6 - k] / d[6] for k in range(1, order + 1)]
    u = binomial_series(alpha_series, 0.5, order)
    extra = {1: c2, 2: c1}
    b = np.zeros(order + 1, dtype=complex)
    for k in range(1, order + 1):
        b[k] = (extra.get(k, 0.0) / 6.0 + s * u[k]) / k3
    v = binomial_series(b, 1.0 / 3.0, order)
    v[0] = 0.0
    w = binomial_series(v, -1.0, order)
    q = y * y - p2
    g = 4.0 / 3.0 + 3.0 * p2
    wext = np.concatenate([w, np.zeros(3, dtype=complex)])
    z = np.zeros((3, Z_ORDER + 1), dtype=complex)
    for j, (alpha, beta) in enumerate(ROOT_LABELS):
        pref = alpha / (3.0 * kk)
        z[j, 0] = -5.0 / 3.0 - pref * g - beta * kk
        z[j, 1] = -1.0 - pref * (4.0 * p2 + g * w[1]) - beta * kk * v[1]
        for k in range(2, Z_ORDER + 1):
            vk = v[k] if k <= order else 0.0
            z[j, k] = pref * (q * wext[k - 2] - 4.0 * p2 * wext[k - 1] - g * wext[k]) - beta * kk * vk

    f, inter = _f_split(p)
    return ZCoeffs(float(p), float(y), z, kk, f, b, u, v, w, inter)


def z_expansion(params: VParams, *, force: bool = False) -> ZCoeffs:
    """Perturbative eigenvalue coefficients for ``params``.

    Raises
    ------
    OutsideValidity
        Outside the trusted window unless ``force`` is set.
    """
    validate(params)
    _check_window(params.p, params.y, params.nbar, force)
    if params.p == 0:
        raise OutsideValidity("expansion is singular at p = 0")
    return _zcoeffs_units(params.p, params.y)


def z20_stable(eps: float) -> float:
    """Leading slow-mode coefficient ``z_20`` at ``p = 1 - eps``.

    ``z_10`` and ``z_20`` solve ``z**2 + 4 z + 3 (1 - p**2) = 0``; the root
    near zero is evaluated without cancellation.
    """
    p = 1.0 - eps
    omp2 = eps * (2.0 - eps)
    return -3.0 * omp2 / (2.0 + math.sqrt(1.0 + 3.0 * p * p))


# ---------------------------------------------------------------------------
# Truncated eigenvector matrix and its cofactors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpansionCoeffs:
    """Alignment-dependent coefficients of the truncated eigenvector matrix.

    All entries are real functions of ``p`` only.  ``m`` holds ``m_1..m_16``
    at indices ``1..16`` (index 0 unused).
    """

    p: float
    z0: np.ndarray
    z1: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    F1: np.ndarray
    F2: np.ndarray
    L30: float
    m: np.ndarray
    T1: float
    T2: float
    vcoef: dict = field(default_factory=dict)


def _real(zval) -> float:
    return float(np.real(zval))


def expansion_coefficients(p: float) -> ExpansionCoeffs:
    """Coefficients ``F_jk``, ``L_30``, ``m_i``, ``T_1`` and ``T_2`` at alignment ``p``.

    The cofactor coefficients follow from the truncated eigenvector entries

        V_11 = a (alpha1 + alpha1' b2),  V_12 = a (beta1 + beta1' b2),
        V_21 = a alpha2,  V_22 = a beta2,  V_31 = b alpha3,  V_32 = b beta3,

    with ``a = nbar / y``, ``b = 1 / a`` and ``b2 = b**2``.
    """
    if not 0 < p <= 1:
        raise OutsideValidity(f"coefficients need 0 < p <= 1, got {p!r}")
    zc = _zcoeffs_units(p, 0.0)
    z0 = np.array([_real(v) for v in zc.z[:, 0]])
    z0[1] = z20_stable(1.0 - p)
    z0[2] = -1.0
    z1 = np.array([_real(v) for v in zc.z[:, 1]])
    f1 = np.array([_real(v) for v in zc.f[:, 0]])
    f2 = np.array([_real(v) for v in zc.f[:, 1]])
    F1 = (4.0 + 2.0 * z0) * f1
    F2 = (4.0 + 2.0 * z0) * f2 + z1 * z1 + 2.0 * z1 + (1.0 - p * p)
    L30 = z0[2] ** 2 + 4.0 * z0[2] + 3.0 * (1.0 - p * p)
    z10, z20, z30 = z0
    F11, F21 = F1[0], F1[1]
    f11 = f1[0]
    corr = f11 / F11 / (2.0 * z10 + 4.0)
    al1, al1c = -p / F11, p * corr
    be1, be1c = (3.0 + z10) / F11, corr * (1.0 + z10)
    al2, be2 = -p / F21, (3.0 + z20) / F21
    al3, be3 = -p / L30, (3.0 + z30) / L30
    m = np.zeros(17)
    m[1], m[2] = be2, -be3
    m[3], m[4] = -al2, al3
    m[5], m[6] = -be1, be3 - be1c
    m[7], m[8] = al1, al1c - al3
    m[9], m[10] = -(al1 * be3 - al3 * be1), -(al1c * be3 - al3 * be1c)
    m[11], m[12] = be1 - be2, be1c
    m[13], m[14] = al2 - al1, -al1c
    m[15], m[16] = al1 * be2 - al2 * be1, al1c * be2 - al2 * be1c
    T1 = al1 * m[1] + al2 * m[5]
    T2 = al1 * m[2] + al1c * m[1] + al2 * m[6] + al3 * m[11]
    vcoef = {
        "alpha1": al1, "alpha1_corr": al1c, "beta1": be1, "beta1_corr": be1c,
        "alpha2": al2, "beta2": be2, "alpha3": al3, "beta3": be3,
    }
    return ExpansionCoeffs(float(p), z0, z1, f1, f2, F1, F2, float(L30), m, float(T1), float(T2), vcoef)


@dataclass(frozen=True)
class EigenvectorExpansion:
    """Truncated eigenvector matrix ``M``, its adjugate ``T`` and determinant.

    ``T[k, l]`` is the adjugate entry, so ``inv(M) = T / det``.
    """

    M: np.ndarray
    T: np.ndarray
    det: float
    coeffs: ExpansionCoeffs


def eigenvector_expansion(params: VParams, *, force: bool = False) -> EigenvectorExpansion:
    """Leading-order eigenvector matrix, cofactors and determinant."""
    validate(params)
    _check_window(params.p, params.y, params.nbar, force)
    if params.y == 0:
        raise OutsideValidity("expansion needs delta > 0")
    c = expansion_coefficients(params.p)
    p, m = params.p, c.m
    a = params.nbar / params.y
    b = 1.0 / a
    b2 = b * b
    z10, z20, z30 = c.z0
    F11, F21 = c.F1[0], c.F1[1]
    corr = c.f1[0] / F11 / (2.0 * z10 + 4.0)
    M = np.array(
        [
            [p * (-1.0 / F11 + corr * b2) * a, -p / F21 * a, -p / c.L30 * b],
            [((3.0 + z10) / F11 + corr * (1.0 + z10) * b2) * a, (3.0 + z20) / F21 * a, (3.0 + z30) / c.L30 * b],
            [1.0, 1.0, 1.0],
        ]
    )
    T = np.array(
        [
            [(m[1] + m[2] * b2) * a, (m[3] + m[4] * b2) * a, p * (z20 - z30) / (F21 * c.L30)],
            [(m[5] + m[6] * b2) * a, (m[7] + m[8] * b2) * a, m[9] + m[10] * b2],
            [(m[11] + m[12] * b2) * a, (m[13] + m[14] * b2) * a, (m[15] + m[16] * b2) * a * a],
        ]
    )
    det = (c.T1 + c.T2 * b2) * a * a
    return EigenvectorExpansion(M, T, float(det), c)


# ---------------------------------------------------------------------------
# Critical alignment and lifetimes
# ---------------------------------------------------------------------------


def _crossing_gap(eps: float, y: float, nbar: float) -> float:
    f, _ = _f_split(1.0 - eps)
    z22 = f[1, 0] * y * y + f[1, 1]
    return abs(z20_stable(eps)) - abs(z22) / (nbar * nbar)


def critical_epsilon(nbar: float, delta_over_gamma: float, rtol: float = 1e-10) -> float:
    """``eps = 1 - p_c`` where ``|z_20| = |z_22| x**2``.

    The root is bracketed in ``log(eps)`` and refined with Brent's method,
    which keeps full relative precision even for ``eps ~ 1e-11``.

    Raises
    ------
    OutsideValidity
        For ``nbar < 100``.
    NoCrossing
        If the two terms do not cross for ``eps`` in ``(1e-14, 0.1)``.
    """
    if nbar < 100:
        raise OutsideValidity(f"critical alignment needs nbar >= 100, got {nbar!r}")
    y = float(delta_over_gamma)
    lo, hi = 1e-14, 0.1
    g_lo, g_hi = _crossing_gap(lo, y, nbar), _crossing_gap(hi, y, nbar)
    if not (g_lo < 0 < g_hi):
        raise NoCrossing(f"|z20| and |z22 x^2| do not cross for nbar={nbar!r}, delta/gamma={y!r}")
    root = brentq(
        lambda le: _crossing_gap(math.exp(le), y, nbar),
        math.log(lo),
        math.log(hi),
        xtol=rtol,
        rtol=4 * np.finfo(float).eps,
    )
    return math.exp(root)


def critical_p(nbar: float, delta_over_gamma: float) -> float:
    """Critical alignment ``p_c = 1 - eps``; see :func:`critical_epsilon`."""
    return 1.0 - critical_epsilon(nbar, delta_over_gamma)


def slow_eigenvalue(spectrum: Spectrum) -> tuple[complex, int]:
    """Real eigenvalue of smallest magnitude and its index."""
    lams = spectrum.lambdas
    real_idx = [k for k in range(3) if lams[k].imag == 0]
    if not real_idx:
        real_idx = list(range(3))
    k = min(real_idx, key=lambda i: abs(lams[i]))
    return lams[k], k


@dataclass(frozen=True)
class Lifetime:
    """Coherence lifetime from the spectrum and from the branch formula."""

    tau_exact: float
    tau_formula: float
    branch: str
    p_critical: float
    tau_weak_pumping: float
    label_consistent: bool

    @property
    def ratio_to_weak_pumping(self) -> float:
        return self.tau_formula / self.tau_weak_pumping


def coherence_lifetime(params: VParams) -> Lifetime:
    """Coherence lifetime ``1/|lambda_2|`` and its closed-form estimate.

    Above the critical alignment ``tau = 1.34 nbar / gamma * (delta/gamma)**-2``;
    below it ``tau = 1 / (gamma |z_20| nbar)``.

    Raises
    ------
    WrongRegime
        In the underdamped regime.
    OutsideValidity
        For ``nbar < 100``.
    """
    validate(params)
    reg = classify(params)
    if reg.tag is RegimeTag.UNDERDAMPED:
        raise WrongRegime("underdamped: coherence lifetime formulas need the overdamped regime")
    if params.nbar < 100:
        raise OutsideValidity(f"lifetime formulas need nbar >= 100, got {params.nbar!r}")
    spec = eigenvalues_cardano(params, with_vectors=False)
    lam2, idx = slow_eigenvalue(spec)
    tau_exact = 1.0 / abs(lam2)
    eps_c = critical_epsilon(params.nbar, params.y)
    pc = 1.0 - eps_c
    y, g = params.y, params.gamma
    if 1.0 - params.p < eps_c:
        branch = "supercritical"
        tau_formula = TAU_SUPER_PREFACTOR * params.nbar / g / (y * y)
    else:
        branch = "subcritical"
        tau_formula = 1.0 / (g * abs(z20_stable(1.0 - params.p)) * params.nbar)
    tau_wp = TAU_WEAK_PUMPING_PREFACTOR / g / (y * y) if y > 0 else math.inf
    return Lifetime(tau_exact, tau_formula, branch, pc, tau_wp, idx == 1)
