"""Truncated power-series helpers used by the perturbative expansions."""

from __future__ import annotations

import numpy as np


def binomial_series(coeffs, exponent: float, order: int) -> np.ndarray:
    """Coefficients of ``(1 + a(x))**exponent`` up to ``x**order``.

    Parameters
    ----------
    coeffs : sequence
        ``a_0, a_1, ...`` with ``a_0`` ignored (treated as zero).
    exponent : float
    order : int

    Returns
    -------
    ndarray of complex, shape ``(order + 1,)``
    """
    a = np.zeros(order + 1, dtype=complex)
    src = np.asarray(coeffs, dtype=complex)[: order + 1]
    a[: src.size] = src
    a[0] = 0.0
    out = np.zeros(order + 1, dtype=complex)
    out[0] = 1.0
    term = out.copy()
    coef = 1.0
    for m in range(1, order + 1):
        term = np.convolve(term, a)[: order + 1]
        coef *= (exponent - m + 1) / m
        out += coef * term
    return out


def reciprocal_series(coeffs, order: int) -> np.ndarray:
    """Coefficients of ``1 / (c_0 + c_1 x + ...)`` up to ``x**order``."""
    c = np.zeros(order + 1, dtype=complex)
    src = np.asarray(coeffs, dtype=complex)[: order + 1]
    c[: src.size] = src
    if c[0] == 0:
        raise ZeroDivisionError("leading coefficient is zero")
    out = np.zeros(order + 1, dtype=complex)
    out[0] = 1.0 / c[0]
    for k in range(1, order + 1):
        out[k] = -np.dot(c[1 : k + 1], out[k - 1 :: -1][:k]) / c[0]
    return out
