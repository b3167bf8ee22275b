"""Parallel evaluation of scalar quantities over two-dimensional parameter grids.

Cells are independent closed-form evaluations.  Rows of the grid are handed
out to worker processes and written back into a preallocated table in grid
order, so the result does not depend on the number of workers.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import FanodynError, RegimeTag, VParams
from .regime import classify_units, discriminant_units, slope_f
from .spectral import (
    _cardano_units,
    _zcoeffs_units,
    coherence_lifetime,
    critical_epsilon,
    in_validity_window,
    slow_eigenvalue,
    Spectrum,
    SpectrumMethod,
    z20_stable,
)

__all__ = [
    "Axis",
    "GridSpec",
    "Quantity",
    "SweepTable",
    "run",
    "zjk_magnitudes",
    "default_workers",
    "WORKERS_ENV",
    "REGIME_CODES",
]

#: Environment variable holding the default worker count.
WORKERS_ENV = "FANODYN_WORKERS"

#: Numeric codes used for regime maps.
REGIME_CODES = {RegimeTag.OVERDAMPED: -1.0, RegimeTag.CRITICAL: 0.0, RegimeTag.UNDERDAMPED: 1.0}

_AXIS_NAMES = ("nbar", "delta_over_gamma", "p")


class Quantity(str, enum.Enum):
    DISCRIMINANT = "discriminant"
    REGIME = "regime"
    LAMBDA2_MAG = "lambda2mag"
    LIFETIME = "lifetime"
    SLOPE_F = "slopef"
    EPSILON = "epsilon"


@dataclass(frozen=True)
class Axis:
    """One grid axis."""

    name: str
    min: float
    max: float
    points: int
    spacing: str = "linear"

    def __post_init__(self):
        if self.name not in _AXIS_NAMES:
            raise ValueError(f"axis name must be one of {_AXIS_NAMES}, got {self.name!r}")
        if self.points < 2:
            raise ValueError("an axis needs at least 2 points")
        if not self.min < self.max:
            raise ValueError("axis needs min < max")
        if self.spacing not in ("linear", "log"):
            raise ValueError("spacing must be 'linear' or 'log'")
        if self.spacing == "log" and not self.min > 0:
            raise ValueError("log spacing needs min > 0")

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.logspace(math.log10(self.min), math.log10(self.max), self.points)
        return np.linspace(self.min, self.max, self.points)


@dataclass(frozen=True)
class GridSpec:
    """Two swept axes, fixed values for the remaining parameter(s), and a quantity.

    Parameters are in units ``gamma = 1``.
    """

    axis1: Axis
    axis2: Axis
    quantity: Quantity
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "quantity", Quantity(self.quantity))
        if self.axis1.name == self.axis2.name:
            raise ValueError("the two axes must differ")
        missing = [n for n in _AXIS_NAMES if n not in (self.axis1.name, self.axis2.name) and n not in self.fixed]
        if missing:
            raise ValueError(f"missing fixed value(s) for {missing}")

    def point(self, v1: float, v2: float) -> tuple[float, float, float]:
        vals = dict(self.fixed)
        vals[self.axis1.name] = v1
        vals[self.axis2.name] = v2
        return float(vals["p"]), float(vals["delta_over_gamma"]), float(vals["nbar"])


@dataclass(frozen=True)
class SweepTable:
    """Row-major table of ``(axis1, axis2, value)`` with per-cell error text."""

    axis1_name: str
    axis2_name: str
    quantity: Quantity
    axis1: np.ndarray
    axis2: np.ndarray
    values: np.ndarray
    errors: list

    def rows(self):
        """Yield ``(v1, v2, value, error)`` in grid order."""
        n2 = self.axis2.size
        for i, v1 in enumerate(self.axis1):
            for j, v2 in enumerate(self.axis2):
                yield float(v1), float(v2), float(self.values[i, j]), self.errors[i * n2 + j]


def default_workers() -> int:
    """Worker count from ``FANODYN_WORKERS`` (default 1)."""
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return n


def _cell(quantity: Quantity, p: float, y: float, n: float) -> float:
    if quantity is Quantity.DISCRIMINANT:
        return discriminant_units(p, y, n)
    if quantity is Quantity.REGIME:
        return REGIME_CODES[classify_units(p, y, n).tag]
    if quantity is Quantity.LAMBDA2_MAG:
        lam, _ = slow_eigenvalue(Spectrum(_cardano_units(p, y, n), None, SpectrumMethod.CARDANO))
        return abs(lam)
    if quantity is Quantity.LIFETIME:
        return coherence_lifetime(VParams(y, p, n)).tau_exact
    if quantity is Quantity.SLOPE_F:
        return slope_f(p)
    if quantity is Quantity.EPSILON:
        return critical_epsilon(n, y)
    raise ValueError(f"unknown quantity {quantity!r}")


def _row(args):
    grid, v1 = args
    out = []
    errs = []
    for v2 in grid.axis2.values():
        p, y, n = grid.point(v1, v2)
        try:
            if not (0.0 <= p <= 1.0 and y >= 0.0 and n >= 0.0):
                raise FanodynError(f"parameters outside domain: p={p!r}, delta/gamma={y!r}, nbar={n!r}")
            out.append(float(_cell(grid.quantity, p, y, n)))
            errs.append("")
        except (FanodynError, ValueError, ArithmeticError) as exc:
            out.append(math.nan)
            errs.append(f"{type(exc).__name__}: {exc}")
    return out, errs


def run(grid: GridSpec, workers: int | None = None) -> SweepTable:
    """Evaluate ``grid.quantity`` on every cell of the grid.

    Parameters
    ----------
    grid : GridSpec
    workers : int, optional
        Process count; defaults to :func:`default_workers`.  ``1`` evaluates
        in the calling process.

    Returns
    -------
    SweepTable
        Identical for every worker count.  Failed cells hold NaN and the
        exception text.
    """
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    a1 = grid.axis1.values()
    a2 = grid.axis2.values()
    tasks = [(grid, float(v)) for v in a1]
    if workers == 1:
        results = [_row(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_row, tasks, chunksize=chunk))
    values = np.empty((a1.size, a2.size))
    errors: list = []
    for i, (vals, errs) in enumerate(results):
        values[i] = vals
        errors.extend(errs)
    return SweepTable(grid.axis1.name, grid.axis2.name, grid.quantity, a1, a2, values, errors)


def zjk_magnitudes(p_grid, nbar: float, delta_over_gamma: float) -> np.ndarray:
    """Magnitudes ``|z_jk x**k|`` for ``j = 1..3`` and ``k = 0..2``.

    Returns
    -------
    ndarray, shape ``(len(p_grid), 3, 3)``
        Entry ``[i, j-1, k]``.  Cells outside the expansion window are NaN.
        ``z_20`` uses the cancellation-free form so that the small values
        close to ``p = 1`` are resolved.
    """
    p_grid = np.atleast_1d(np.asarray(p_grid, dtype=float))
    y = float(delta_over_gamma)
    x = 1.0 / nbar
    out = np.full((p_grid.size, 3, 3), math.nan)
    scale = x ** np.arange(3)
    for i, p in enumerate(p_grid):
        if not in_validity_window(p, y, nbar):
            continue
        zc = _zcoeffs_units(float(p), y)
        mags = np.abs(zc.z[:, :3]) * scale
        mags[1, 0] = abs(z20_stable(1.0 - p))
        out[i] = mags
    return out
