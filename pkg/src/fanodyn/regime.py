"""Discriminant of the characteristic cubic and regime classification.

The sign of the discriminant ``D`` separates oscillatory (``D > 0``, one real
and two complex-conjugate eigenvalues) from monotone (``D < 0``, three real
eigenvalues) relaxation.  Two independent closed forms are provided:

* :func:`discriminant_direct` builds ``D`` from the Cardano invariants of the
  generator.  Its leading powers of ``nbar`` cancel, so it is evaluated in
  exact rational arithmetic on the (exactly representable) float inputs.
* :func:`discriminant_poly` sums the degree-6 polynomial in ``nbar`` and is
  accurate in plain double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import (
    NoRoot,
    Regime,
    RegimeTag,
    VParams,
    critical_tolerance,
    validate,
)

try:  # gmpy2 rationals are ~6x faster than fractions.Fraction
    from gmpy2 import mpq as _rational
except ImportError:  # pragma: no cover - exercised only without gmpy2
    _rational = Fraction

__all__ = [
    "DiscriminantCoeffs",
    "discriminant_coeffs",
    "cardano_invariants",
    "discriminant_direct",
    "discriminant_poly",
    "discriminant_poly_array",
    "discriminant_units",
    "discriminant_scale",
    "slope_f",
    "limit_slope",
    "classify",
    "classify_units",
    "boundary_delta",
]


@dataclass(frozen=True)
class DiscriminantCoeffs:
    """Coefficients ``d0..d6`` of ``108 D / gamma**6`` as a polynomial in nbar."""

    d0: float
    d1: float
    d2: float
    d3: float
    d4: float
    d5: float
    d6: float

    def as_array(self) -> np.ndarray:
        return np.array([self.d0, self.d1, self.d2, self.d3, self.d4, self.d5, self.d6])


def _dk_terms(p, y):
    """Return d0..d6 for scalar or array ``p`` and ``y = delta/gamma``."""
    p2 = p * p
    p4 = p2 * p2
    y2 = y * y
    q = y2 - p2
    s = 2.0 * y2 + p2
    d0 = 4.0 * q**3
    d1 = -48.0 * p2 * q * q
    d2 = 12.0 * s * s + 192.0 * p4 * q - 4.0 * (4.0 + 9.0 * p2) * q * q
    d3 = 96.0 * p2 * s + 32.0 * p2 * (4.0 + 9.0 * p2) * q - 256.0 * p4 * p2
    d4 = (
        (8.0 / 3.0) * (8.0 + 27.0 * p2) * s
        + (4.0 / 3.0) * (4.0 + 9.0 * p2) ** 2 * q
        - 64.0 * p4 * (1.0 + 9.0 * p2)
    )
    d5 = -16.0 * p4 * (6.0 + 27.0 * p2)
    d6 = -36.0 * p4 * (1.0 + 3.0 * p2)
    return d0, d1, d2, d3, d4, d5, d6


def discriminant_coeffs(p: float, y: float) -> DiscriminantCoeffs:
    """Polynomial coefficients ``d_k`` for alignment ``p`` and splitting ``y``."""
    return DiscriminantCoeffs(*(float(v) for v in _dk_terms(float(p), float(y))))


def cardano_invariants(p, y, nbar):
    """Cardano invariants ``(A, B, C, E)`` of the characteristic cubic.

    Works on floats, ``Fraction`` or ``mpq`` inputs (units ``gamma = 1``).
    The cubic ``lambda**3 + 3A lambda**2 + c1 lambda + c0`` is reduced by
    ``lambda = mu - A`` so that ``D = B**3 + E**2``.
    """
    one = nbar - nbar + 1
    r = nbar
    rg = r + one
    r3g = 3 * r + one
    omp2 = one - p * p
    a = (5 * r + 3 * one) / 3
    b = (y * y + rg * (rg + (2 * one - p * p) * r3g)) / 3 - a * a
    c = r3g * (y * y + omp2 * rg * rg) / 2 + a**3
    e = c - 3 * a * (b + a * a) / 2
    return a, b, c, e


def _direct_exact(p: float, y: float, nbar: float):
    P, Y, N = _rational(p), _rational(y), _rational(nbar)
    _, b, _, e = cardano_invariants(P, Y, N)
    return b**3 + e * e


def discriminant_units(p: float, y: float, nbar: float) -> float:
    """Discriminant in units ``gamma = 1`` via the exact direct form."""
    return float(_direct_exact(float(p), float(y), float(nbar)))


def discriminant_direct(params: VParams) -> float:
    """Discriminant ``D = B**3 + E**2`` from the Cardano invariants.

    The two leading powers of ``nbar`` cancel between ``B**3`` and ``E**2``;
    the sum is therefore formed in exact rational arithmetic and rounded once.
    """
    validate(params)
    d = discriminant_units(params.p, params.y, params.nbar)
    return d * params.gamma**6


def discriminant_poly(params: VParams) -> float:
    """Discriminant as ``(gamma**6 / 108) * sum_k d_k nbar**k``."""
    validate(params)
    coeffs = _dk_terms(params.p, params.y)
    total = 0.0
    for dk in reversed(coeffs):
        total = total * params.nbar + dk
    return params.gamma**6 * total / 108.0


def discriminant_poly_array(p, y, nbar) -> np.ndarray:
    """Vectorised polynomial form in units ``gamma = 1`` (broadcasting)."""
    p = np.asarray(p, dtype=float)
    y = np.asarray(y, dtype=float)
    n = np.asarray(nbar, dtype=float)
    coeffs = _dk_terms(p, y)
    total = np.zeros(np.broadcast(p, y, n).shape)
    for dk in reversed(coeffs):
        total = total * n + dk
    return total / 108.0


def slope_f(p):
    """Large-``nbar`` slope of the zero-discriminant line, ``delta/gamma = f(p) nbar``.

    Real root of the depressed cubic ``z**3 + P z + Q = 0`` with
    ``P = 16 + 60 p**2 + 27 p**4`` and ``Q = -9 p**4 (1 + 3 p**2)``,
    ``f = sqrt(z)``.  Accepts scalars or arrays.
    """
    p = np.asarray(p, dtype=float)
    p2 = p * p
    P = 16.0 + 60.0 * p2 + 27.0 * p2 * p2
    Q = -9.0 * p2 * p2 * (1.0 + 3.0 * p2)
    root = np.sqrt(Q * Q / 4.0 + P**3 / 27.0)
    t1 = -Q / 2.0 + root
    t2 = -Q / 2.0 - root
    z = np.cbrt(t1) + np.cbrt(t2)
    f = np.sqrt(np.maximum(z, 0.0))
    return float(f) if f.ndim == 0 else f


def limit_slope(p: float) -> float:
    """Exact ``lim delta_boundary / nbar`` including every order-six term.

    Unlike :func:`slope_f` this keeps the ``d2 nbar**2`` contribution, whose
    ``y**4 nbar**2`` part has the same scaling as the retained terms.  It
    solves ``z**3 + (8 - 9p**2) z**2 + P z + Q = 0`` for its positive root.
    """
    p2 = p * p
    P = 16.0 + 60.0 * p2 + 27.0 * p2 * p2
    Q = -9.0 * p2 * p2 * (1.0 + 3.0 * p2)
    roots = np.roots([1.0, 8.0 - 9.0 * p2, P, Q])
    real = [z.real for z in roots if abs(z.imag) < 1e-12 * (1 + abs(z)) and z.real >= 0]
    return math.sqrt(max(real)) if real else 0.0


def discriminant_scale(p: float, y: float, nbar: float) -> float:
    """``sum_k |d_k| nbar**k / 108``, the size of the terms that cancel in ``D``."""
    total = 0.0
    for dk in reversed(_dk_terms(float(p), float(y))):
        total = total * nbar + abs(dk)
    return total / 108.0


def classify_units(p: float, y: float, nbar: float) -> Regime:
    """Classify a point given in units ``gamma = 1``."""
    d = discriminant_units(p, y, nbar)
    if abs(d) <= critical_tolerance(discriminant_scale(p, y, nbar)):
        tag = RegimeTag.CRITICAL
    elif d > 0:
        tag = RegimeTag.UNDERDAMPED
    else:
        tag = RegimeTag.OVERDAMPED
    return Regime(tag, d)


def classify(params: VParams) -> Regime:
    """Classify ``params`` by the sign of the exact direct discriminant.

    Returns
    -------
    Regime
        ``discriminant_value`` carries the physical ``D`` (``gamma**6`` units).
    """
    validate(params)
    reg = classify_units(params.p, params.y, params.nbar)
    return Regime(reg.tag, reg.discriminant_value * params.gamma**6)


def _sign(p, y, n) -> int:
    d = _direct_exact(p, y, n)
    return (d > 0) - (d < 0)


def boundary_delta(p: float, nbar: float) -> float:
    """Splitting ``delta/gamma`` on the zero-discriminant line at fixed ``(p, nbar)``.

    The bracket ``[1e-6, 1e3 max(1, nbar)]`` is scanned geometrically (factor 2);
    when several sign changes occur the largest root is returned.  The root
    is then bisected down to adjacent floating-point numbers, so the result is
    classified as critical.

    Raises
    ------
    NoRoot
        If ``D`` does not change sign inside the bracket.
    """
    if not p > 0 or not nbar > 0:
        raise NoRoot(f"boundary requires p > 0 and nbar > 0 (p={p!r}, nbar={nbar!r})")
    lo_lim, hi_lim = 1e-6, 1e3 * max(1.0, nbar)
    grid = [lo_lim]
    while grid[-1] < hi_lim:
        grid.append(min(grid[-1] * 2.0, hi_lim))
    signs = [_sign(p, y, nbar) for y in grid]
    bracket = None
    for i in range(len(grid) - 1, 0, -1):
        if signs[i] == 0:
            return grid[i]
        if signs[i] != signs[i - 1] and signs[i - 1] != 0:
            bracket = (grid[i - 1], grid[i], signs[i - 1])
            break
    if bracket is None:
        raise NoRoot(f"no sign change of D for p={p!r}, nbar={nbar!r} in [{lo_lim}, {hi_lim}]")
    lo, hi, s_lo = bracket
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        s_mid = _sign(p, mid, nbar)
        if s_mid == 0:
            return mid
        if s_mid == s_lo:
            lo = mid
        else:
            hi = mid
    d_lo = abs(_direct_exact(p, lo, nbar))
    d_hi = abs(_direct_exact(p, hi, nbar))
    return lo if d_lo <= d_hi else hi
