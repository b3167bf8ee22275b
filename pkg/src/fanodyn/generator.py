"""Generator matrix, exact and stepped propagation, steady state.

The reduced state ``x = (rho_aa, Re rho_ab, Im rho_ab)`` obeys the linear
inhomogeneous system ``dx/dt = A x + d`` with a constant drive switched on at
``t = 0``.  Its solution is evaluated exactly through the eigendecomposition
of ``A``; an adaptive Runge-Kutta integrator provides an independent check.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from .core import (
    DegenerateEigenvector,
    SingularGenerator,
    StateVector,
    StepFailure,
    VParams,
    validate,
)

__all__ = [
    "Generator",
    "Method",
    "Trajectory",
    "build",
    "log_time_grid",
    "default_time_grid",
    "steady_state",
    "propagate_exact",
    "propagate_stepped",
    "POINTS_PER_DECADE",
]

log = logging.getLogger(__name__)

POINTS_PER_DECADE = 64
#: Stiffness ratio above which the implicit embedded scheme is used.
STIFFNESS_SWITCH = 1e3


class Method(str, enum.Enum):
    EXACT_DUHAMEL = "exact"
    STEPPED = "stepped"
    ANALYTIC_OVERDAMPED = "analytic-supercritical"
    ANALYTIC_SUBCRITICAL = "analytic-subcritical"
    ANALYTIC_SMALL_DELTA = "analytic-small-delta"
    ANALYTIC_P1 = "analytic-p1"
    ANALYTIC_GENERAL = "analytic-general"


@dataclass(frozen=True)
class Generator:
    """Coefficient matrix ``A`` and drive ``d = [r, p r, 0]``."""

    a_matrix: np.ndarray
    drive: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution of the reduced Bloch-Redfield system.

    Attributes
    ----------
    times : ndarray, shape (N,)
        Increasing sample times in units of ``1/gamma`` (physical time).
    values : ndarray, shape (N, 3)
        Rows ``(rho_aa, Re rho_ab, Im rho_ab)``.
    method : Method
    info : dict
        Diagnostics (e.g. imaginary residue, solver statistics).
    """

    times: np.ndarray
    values: np.ndarray
    method: Method
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.times.ndim != 1 or self.values.shape != (self.times.size, 3):
            raise ValueError("times and values have inconsistent shapes")
        if self.times.size < 1 or self.times[0] < 0:
            raise ValueError("trajectory needs at least one sample at t >= 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def states(self) -> list[StateVector]:
        return [StateVector.from_array(row) for row in self.values]

    @property
    def rho_aa(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def rho_ab_re(self) -> np.ndarray:
        return self.values[:, 1]

    @property
    def rho_ab_im(self) -> np.ndarray:
        return self.values[:, 2]

    @property
    def rho_cc(self) -> np.ndarray:
        return 1.0 - 2.0 * self.values[:, 0]

    def positivity_violations(self, tol: float = 1e-9) -> int:
        """Number of samples failing :meth:`StateVector.is_physical`."""
        return sum(not s.is_physical(tol) for s in self.states)


def _units_system(params: VParams):
    """Generator and drive in units ``gamma = 1``."""
    p, y, r = params.p, params.y, params.nbar
    a = np.array(
        [
            [-(3 * r + 1), -p * (r + 1), 0.0],
            [-p * (3 * r + 1), -(r + 1), y],
            [0.0, -y, -(r + 1)],
        ]
    )
    d = np.array([r, p * r, 0.0])
    return a, d


def build(params: VParams) -> Generator:
    """Coefficient matrix and drive vector for ``params`` (physical units)."""
    validate(params)
    g, r, p, dl = params.gamma, params.r, params.p, params.delta
    a = np.array(
        [
            [-(3 * r + g), -p * (r + g), 0.0],
            [-p * (3 * r + g), -(r + g), dl],
            [0.0, -dl, -(r + g)],
        ]
    )
    return Generator(a, np.array([r, p * r, 0.0]))


def _steady_units(a: np.ndarray, d: np.ndarray) -> np.ndarray:
    # -det(A) written as a sum of non-negative terms: (3r+1)((1-p^2)(r+1)^2 + y^2)
    r = -(a[2, 2] + 1.0)
    y = a[1, 2]
    p = -a[0, 1] / (r + 1.0)
    c0 = (3.0 * r + 1.0) * ((1.0 - p) * (1.0 + p) * (r + 1.0) ** 2 + y * y)
    if not c0 > 1e-300 * max(1.0, r) ** 3:
        raise SingularGenerator("generator matrix is singular (p = 1 with zero splitting)")
    x = np.linalg.solve(a, -d)
    # one step of iterative refinement
    x = x + np.linalg.solve(a, -(a @ x + d))
    return x + 0.0


def steady_state(params: VParams) -> StateVector:
    """Fixed point ``-A^{-1} d``.

    Raises
    ------
    SingularGenerator
        If ``A`` is not invertible.
    """
    validate(params)
    a, d = _units_system(params)
    return StateVector.from_array(_steady_units(a, d))


def log_time_grid(t_min: float, t_max: float, per_decade: int = POINTS_PER_DECADE) -> np.ndarray:
    """Logarithmically spaced grid with ``per_decade`` points per decade."""
    if not 0 < t_min < t_max:
        raise ValueError("log grid needs 0 < t_min < t_max")
    decades = math.log10(t_max / t_min)
    n = max(2, int(math.ceil(decades * per_decade)) + 1)
    return np.logspace(math.log10(t_min), math.log10(t_max), n)


def _rates(params: VParams) -> np.ndarray:
    a, _ = _units_system(params)
    return np.abs(np.linalg.eigvals(a).real) * params.gamma


def default_time_grid(params: VParams, per_decade: int = POINTS_PER_DECADE) -> np.ndarray:
    """Grid from ``1e-3 / |lambda_fast|`` to ``10 / |lambda_slow|``."""
    rates = _rates(params)
    return log_time_grid(1e-3 / rates.max(), 10.0 / rates.min(), per_decade)


def _as_initial(x0) -> np.ndarray:
    if x0 is None:
        return np.zeros(3)
    if isinstance(x0, StateVector):
        return x0.as_array()
    return np.asarray(x0, dtype=float).reshape(3)


def _eigensystem(params: VParams):
    """Eigenvalues (units gamma=1) and eigenvector matrix, or ``None``."""
    from .spectral import Spectrum, SpectrumMethod, _cardano_units, eigenvectors_exact

    for shift in (0.0, 1e-10):
        trial = params if shift == 0 else params.replace(delta=params.delta + shift * params.gamma)
        lams = _cardano_units(trial.p, trial.y, trial.nbar)
        try:
            vecs = eigenvectors_exact(trial.replace(gamma=1.0, delta=trial.y), Spectrum(lams, None, SpectrumMethod.CARDANO))
        except DegenerateEigenvector:
            continue
        if np.linalg.cond(vecs) < 1e10:
            return lams, vecs
    return None


def propagate_exact(params: VParams, x0=None, times=None) -> Trajectory:
    """Exact solution ``x(t) = x_ss + sum_k c_k exp(lambda_k t) v_k``.

    Parameters
    ----------
    params : VParams
    x0 : StateVector or array-like, optional
        Initial state at ``t = 0``; defaults to the ground state ``(0, 0, 0)``.
    times : array-like, optional
        Sample times (physical units).  Defaults to :func:`default_time_grid`.

    Raises
    ------
    SingularGenerator
        If ``A`` cannot be inverted.
    """
    validate(params)
    times = default_time_grid(params) if times is None else np.asarray(times, dtype=float).ravel()
    a, d = _units_system(params)
    x_ss = _steady_units(a, d)
    delta0 = _as_initial(x0) - x_ss
    tu = times * params.gamma
    eig = _eigensystem(params)
    info = {}
    if eig is not None:
        lams, vecs = eig
        c = np.linalg.solve(vecs, delta0.astype(complex))
        with np.errstate(under="ignore"):
            modes = np.exp(np.outer(tu, lams)) * c
        full = modes @ vecs.T
        info["imag_residue"] = float(np.abs(full.imag).max()) if full.size else 0.0
        values = x_ss + full.real
        info["backend"] = "eigen"
    else:
        log.info("near-defective generator, using matrix exponential")
        values = np.array([x_ss + scipy.linalg.expm(a * t) @ delta0 for t in tu])
        info["backend"] = "expm"
        info["imag_residue"] = 0.0
    return Trajectory(times, values, Method.EXACT_DUHAMEL, info)


def propagate_stepped(params: VParams, x0=None, t_end: float | None = None, rel_tol: float = 1e-10, times=None) -> Trajectory:
    """Adaptive embedded Runge-Kutta integration from ``t = 0``.

    The scheme is chosen from the stiffness ratio ``max|Re l| / min|Re l|``:
    the explicit Dormand-Prince 5(4) pair for mild ratios and the implicit
    Radau IIA (order 5, embedded error estimate) otherwise.

    Parameters
    ----------
    t_end : float, optional
        Final time; defaults to the last entry of ``times``.
    rel_tol : float
        Relative tolerance in ``[1e-12, 1e-3]``; the absolute tolerance is
        ``rel_tol * 1e-3`` (states are of order one).
    times : array-like, optional
        Output times; defaults to a log grid ending at ``t_end``.

    Raises
    ------
    StepFailure
        If the integrator cannot reach ``t_end``.
    """
    validate(params)
    if not 1e-12 <= rel_tol <= 1e-3:
        raise ValueError("rel_tol must lie in [1e-12, 1e-3]")
    if times is None:
        if t_end is None or not t_end > 0:
            raise ValueError("t_end must be > 0")
        rates = _rates(params)
        times = log_time_grid(min(1e-3 / rates.max(), t_end / 10), t_end)
    times = np.asarray(times, dtype=float).ravel()
    t_end = float(times[-1]) if t_end is None else float(t_end)
    if not t_end > 0 or times[-1] > t_end * (1 + 1e-12):
        raise ValueError("t_end must be > 0 and cover the output times")
    a, d = _units_system(params)
    rates = _rates(params) / params.gamma
    stiffness = rates.max() / max(rates.min(), 1e-300)
    method = "RK45" if stiffness < STIFFNESS_SWITCH else "Radau"
    tu = times * params.gamma
    extra = {"jac": a} if method == "Radau" else {}
    sol = solve_ivp(
        lambda t, x: a @ x + d,
        (0.0, t_end * params.gamma),
        _as_initial(x0),
        method=method,
        t_eval=tu,
        rtol=rel_tol,
        atol=rel_tol * 1e-3,
        **extra,
    )
    if sol.status != 0:
        t_reached = float(sol.t[-1]) / params.gamma if sol.t.size else 0.0
        raise StepFailure(sol.message, t_reached)
    info = {"scheme": method, "stiffness_ratio": float(stiffness), "nfev": int(sol.nfev)}
    return Trajectory(times, sol.y.T.copy(), Method.STEPPED, info)
