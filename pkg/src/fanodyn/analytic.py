"""Closed-form population and coherence dynamics in the overdamped regime.

All forms are sums of three relaxing exponentials,

    rho(t) = (1/T) sum_k W_k (1 - exp(-|lambda_k| t)) / |lambda_k / r|,

whose weights come from the leading-order eigenvector matrix.  Using
``a = nbar / y`` and ``b = y / nbar`` (``y = delta/gamma``), each weight is a
short polynomial in ``b**2`` with alignment-dependent coefficients ``A_i``
(populations), ``B_i`` (real coherence) and ``C_i`` (imaginary coherence).

Above the critical alignment the slow mode relaxes at ``|f21| y**2 / nbar``;
below it every rate is proportional to ``nbar``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DegenerateEigenvector,
    OutsideValidity,
    RegimeTag,
    SplittingTooLarge,
    StateVector,
    VParams,
    WrongBranch,
    WrongRegime,
    validate,
)
from .generator import Method, Trajectory
from .regime import classify
from .spectral import (
    Spectrum,
    SpectrumMethod,
    _cardano_units,
    critical_epsilon,
    eigenvectors_exact,
    expansion_coefficients,
    in_validity_window,
)

__all__ = [
    "TrajectoryCoeffs",
    "coeffs",
    "rho_supercritical",
    "rho_subcritical",
    "rho_small_delta",
    "rho_p1",
    "dm_general",
    "analytic_auto",
    "SMALL_DELTA_MAX",
    "SMALL_DELTA_WARN",
    "P1_THRESHOLD",
]

log = logging.getLogger(__name__)

#: Largest splitting accepted by the small-splitting forms.
SMALL_DELTA_MAX = 0.2
#: Splitting above which the small-splitting forms emit a warning.
SMALL_DELTA_WARN = 0.1
#: Alignment from which the rounded p = 1 numerals are used.
P1_THRESHOLD = 1.0 - 1e-6
#: Exponent magnitude beyond which a decaying exponential is set to zero.
EXP_CLAMP = 700.0

# Rounded p -> 1 limits of the coefficients used by the p = 1 closed form.
_P1 = {
    "T": (-4.0, 1.33),
    "A": (-4.0, 2.92, 0.44),
    "B": (-4.0, 3.249, -0.89),
    "C": (-1.33, 0.99, 1.33, -0.25),
    "z10": 4.0,
    "f21": 0.75,
    "z30": 1.0,
}


@dataclass(frozen=True)
class TrajectoryCoeffs:
    """Alignment-dependent amplitudes of the closed-form trajectories.

    ``A``, ``B``, ``C`` and ``m`` are indexed from 1 (index 0 unused) so that
    ``A[1]`` is ``A_1``.
    """

    p: float
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    T1: float
    T2: float
    m: np.ndarray
    F1: np.ndarray
    F2: np.ndarray
    L30: float
    z0: np.ndarray
    z1: np.ndarray
    f1: np.ndarray
    f2: np.ndarray

    @property
    def f21(self) -> float:
        return float(self.f1[1])

    def as_dict(self) -> dict:
        out = {"p": self.p, "T1": self.T1, "T2": self.T2}
        for name in ("A", "B", "C"):
            arr = getattr(self, name)
            out.update({f"{name}{i}": float(arr[i]) for i in range(1, 7)})
        out.update({f"m{i}": float(self.m[i]) for i in range(1, 17)})
        out.update({"F11": float(self.F1[0]), "F21": float(self.F1[1]), "F12": float(self.F2[0]),
                    "F22": float(self.F2[1]), "L30": self.L30, "f11": float(self.f1[0]), "f21": self.f21,
                    "z10": float(self.z0[0]), "z20": float(self.z0[1]), "z30": float(self.z0[2])})
        return out


def coeffs(p: float) -> TrajectoryCoeffs:
    """Coefficients ``A_i``, ``B_i``, ``C_i``, ``T_1``, ``T_2`` and ``m_i`` at alignment ``p``.

    The weights are assembled from the cofactor coefficients ``m_i`` and the
    leading eigenvector components rather than written out by hand.

    Raises
    ------
    OutsideValidity
        If ``p`` is not in ``(0, 1]``.
    """
    c = expansion_coefficients(p)
    m, v = c.m, c.vcoef
    s1 = m[1] + p * m[3]
    s2 = m[2] + p * m[4]
    s3 = m[5] + p * m[7]
    s4 = m[6] + p * m[8]
    s5 = m[11] + p * m[13]
    s6 = m[12] + p * m[14]
    A = np.zeros(7)
    B = np.zeros(7)
    C = np.zeros(7)
    A[1] = v["alpha1"] * s1
    A[2] = v["alpha1_corr"] * s1 + v["alpha1"] * s2
    A[3] = v["alpha2"] * s3
    A[4] = v["alpha2"] * s4
    A[5] = v["alpha3"] * s5
    A[6] = v["alpha3"] * s6
    B[1] = v["beta1"] * s1
    B[2] = v["beta1_corr"] * s1 + v["beta1"] * s2
    B[3] = v["beta2"] * s3
    B[4] = v["beta2"] * s4
    B[5] = v["beta3"] * s5
    B[6] = v["beta3"] * s6
    C[1:] = (s1, s2, s3, s4, s5, s6)
    return TrajectoryCoeffs(
        float(p), A, B, C, c.T1, c.T2, c.m, c.F1, c.F2, c.L30, c.z0, c.z1, c.f1, c.f2
    )


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _rise(rate: float, t: np.ndarray) -> np.ndarray:
    """``1 - exp(-rate t)`` with the exponential clamped at large arguments."""
    arg = rate * t
    decay = np.where(arg > EXP_CLAMP, 0.0, np.exp(-np.minimum(arg, EXP_CLAMP)))
    return 1.0 - decay


def _package(params: VParams, t, values: np.ndarray, method: Method, info: dict):
    if np.ndim(t) == 0:
        return StateVector.from_array(values[0])
    times = np.asarray(t, dtype=float).ravel()
    return Trajectory(times, values, method, info)


def _times_units(params: VParams, t) -> np.ndarray:
    tt = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
    if np.any(tt < 0):
        raise ValueError("times must be >= 0")
    return tt * params.gamma


def _require_overdamped(params: VParams) -> None:
    reg = classify(params)
    if reg.tag is RegimeTag.UNDERDAMPED:
        raise WrongRegime("underdamped: analytic branch unavailable")


def _require_window(params: VParams) -> None:
    if not in_validity_window(params.p, params.y, params.nbar):
        raise OutsideValidity(
            f"analytic forms need nbar >= 100 and p > 0.1 (p in (0.89, 1] when delta/gamma > 1); "
            f"got p={params.p!r}, delta/gamma={params.y!r}, nbar={params.nbar!r}"
        )


def _is_supercritical(params: VParams) -> bool:
    eps = critical_epsilon(params.nbar, params.y)
    return 1.0 - params.p < eps


def _weights(c: TrajectoryCoeffs, b2: float, full: bool):
    """Per-mode weights ``(rho_aa, Re rho_ab, Im rho_ab / b)`` before rate factors."""
    A, B, C = c.A, c.B, c.C
    a6 = A[6] * b2 if full else 0.0
    b6 = B[6] * b2 if full else 0.0
    w_aa = (A[1] + A[2] * b2, A[3] + A[4] * b2, (A[5] + a6) * b2)
    w_re = (B[1] + B[2] * b2, B[3] + B[4] * b2, (B[5] + b6) * b2)
    w_im = (C[1] + C[2] * b2, C[3] + C[4] * b2, C[5] + C[6] * b2)
    return w_aa, w_re, w_im


def _combine(w, rises, inv_rates):
    return sum(wk * rk * ik for wk, rk, ik in zip(w, rises, inv_rates))


def _three_mode(params: VParams, t, slow_super: bool, full: bool) -> np.ndarray:
    c = coeffs(params.p)
    y, n = params.y, params.nbar
    b = y / n
    b2 = b * b
    tu = _times_units(params, t)
    z10, z20, z30 = np.abs(c.z0)
    f21 = abs(c.f21)
    if slow_super:
        slow_rate = f21 * y * y / n
        slow_inv = (n / y) ** 2 / f21
    else:
        slow_rate = z20 * n
        slow_inv = 1.0 / z20
    rises = (_rise(z10 * n, tu), _rise(slow_rate, tu), _rise(z30 * n, tu))
    inv = (1.0 / z10, slow_inv, 1.0 / z30)
    denom = c.T1 + c.T2 * b2
    w_aa, w_re, w_im = _weights(c, b2, full)
    out = np.empty((tu.size, 3))
    out[:, 0] = _combine(w_aa, rises, inv) / denom
    out[:, 1] = _combine(w_re, rises, inv) / denom
    out[:, 2] = b * _combine(w_im, rises, inv) / denom
    return out


# ---------------------------------------------------------------------------
# Public closed forms
# ---------------------------------------------------------------------------


def rho_supercritical(params: VParams, t, *, full: bool = True):
    """Closed-form dynamics for alignment above the critical value.

    Parameters
    ----------
    params : VParams
    t : float or array-like
        Time(s) in units of ``1/gamma``.
    full : bool
        Keep the ``A_6``/``B_6`` corrections of the third mode (order
        ``b**4``) alongside ``C_6``.

    Returns
    -------
    StateVector for scalar ``t``; :class:`Trajectory` otherwise.

    Raises
    ------
    WrongRegime, WrongBranch, OutsideValidity
    """
    validate(params)
    _require_overdamped(params)
    _require_window(params)
    if not _is_supercritical(params):
        raise WrongBranch("subcritical alignment: p <= p_c, use rho_subcritical")
    vals = _three_mode(params, t, True, full)
    return _package(params, t, vals, Method.ANALYTIC_OVERDAMPED, {"branch": "supercritical"})


def rho_subcritical(params: VParams, t, *, full: bool = True):
    """Closed-form dynamics for alignment below the critical value.

    All three relaxation rates scale linearly with ``nbar``.
    """
    validate(params)
    _require_overdamped(params)
    _require_window(params)
    if _is_supercritical(params):
        raise WrongBranch("supercritical alignment: p > p_c, use rho_supercritical")
    vals = _three_mode(params, t, False, full)
    return _package(params, t, vals, Method.ANALYTIC_SUBCRITICAL, {"branch": "subcritical"})


def _small_delta_values(params: VParams, t, branch: str) -> np.ndarray:
    y, n = params.y, params.nbar
    b = y / n
    tu = _times_units(params, t)
    out = np.empty((tu.size, 3))
    if branch == "p1":
        e1 = np.exp(-np.minimum(4.0 * n * tu, EXP_CLAMP))
        e2 = np.exp(-np.minimum(_P1["f21"] * y * y / n * tu, EXP_CLAMP))
        e3 = np.exp(-np.minimum(n * tu, EXP_CLAMP))
        out[:, 0] = 1.0 / 3.0 - (3.0 * e1 + e2) / 12.0
        out[:, 1] = 0.25 * (e2 - e1)
        out[:, 2] = -(b / 12.0) * (e1 + 3.0 * e2 - 4.0 * e3)
        return out
    c = coeffs(params.p)
    z10, z20, z30 = np.abs(c.z0)
    r1 = _rise(z10 * n, tu) / z10
    r3 = _rise(z30 * n, tu) / z30
    if branch == "supercritical":
        f21 = abs(c.f21)
        r2 = _rise(f21 * y * y / n, tu) / f21
        out[:, 0] = (c.A[1] * r1 + c.A[4] * r2) / c.T1
        out[:, 1] = (c.B[1] * r1 + c.B[4] * r2) / c.T1
        out[:, 2] = b * (c.C[1] * r1 + c.C[4] * r2 + c.C[5] * r3) / c.T1
    else:
        r2 = _rise(z20 * n, tu) / z20
        out[:, 0] = (c.A[1] * r1 + c.A[3] * r2) / c.T1
        out[:, 1] = (c.B[1] * r1 + c.B[3] * r2) / c.T1
        out[:, 2] = b * (c.C[1] * r1 + c.C[3] * r2 + c.C[5] * r3) / c.T1
    return out


def rho_small_delta(params: VParams, t, branch: str = "auto"):
    """Closed forms for closely spaced excited states (``delta/gamma <= 0.2``).

    Parameters
    ----------
    branch : {"auto", "supercritical", "subcritical", "p1"}
        ``"p1"`` uses the rounded ``p -> 1`` numerals and requires
        ``p >= 1 - 1e-6``.  ``"auto"`` picks ``"p1"`` there and otherwise
        compares ``p`` with the critical alignment.

    Raises
    ------
    SplittingTooLarge
        If ``delta/gamma > 0.2``.
    WrongBranch
        If the requested branch does not match ``p``.
    """
    validate(params)
    if params.y > SMALL_DELTA_MAX:
        raise SplittingTooLarge(f"delta/gamma = {params.y!r} exceeds {SMALL_DELTA_MAX}")
    if params.y > SMALL_DELTA_WARN:
        log.warning("delta/gamma = %g: small-splitting forms lose accuracy above %g", params.y, SMALL_DELTA_WARN)
    _require_overdamped(params)
    _require_window(params)
    if branch not in ("auto", "supercritical", "subcritical", "p1"):
        raise ValueError(f"unknown branch {branch!r}")
    if params.y == 0:
        raise OutsideValidity("small-splitting forms need delta > 0")
    supercritical = _is_supercritical(params)
    if branch == "auto":
        branch = "p1" if params.p >= P1_THRESHOLD else ("supercritical" if supercritical else "subcritical")
    elif branch == "p1" and params.p < P1_THRESHOLD:
        raise WrongBranch(f"p = 1 numerals need p >= {P1_THRESHOLD}")
    elif branch == "supercritical" and not supercritical:
        raise WrongBranch("subcritical alignment: p <= p_c")
    elif branch == "subcritical" and supercritical:
        raise WrongBranch("supercritical alignment: p > p_c")
    method = Method.ANALYTIC_P1 if branch == "p1" else Method.ANALYTIC_SMALL_DELTA
    vals = _small_delta_values(params, t, branch)
    return _package(params, t, vals, method, {"branch": f"small-delta-{branch}"})


def rho_p1(params: VParams, t):
    """Supercritical closed form with the rounded ``p -> 1`` coefficients.

    Valid for any overdamped splitting in the expansion window when
    ``p >= 1 - 1e-6``.
    """
    validate(params)
    if params.p < P1_THRESHOLD:
        raise WrongBranch(f"p = 1 numerals need p >= {P1_THRESHOLD}")
    _require_overdamped(params)
    _require_window(params)
    y, n = params.y, params.nbar
    b = y / n
    b2 = b * b
    tu = _times_units(params, t)
    t1, t2 = _P1["T"]
    a1, a2, a5 = _P1["A"]
    bb1, bb2, bb5 = _P1["B"]
    c1, c2, c5, c6 = _P1["C"]
    r1 = _rise(4.0 * n, tu) / 4.0
    r2 = _rise(_P1["f21"] * y * y / n, tu)
    r3 = _rise(n, tu)
    denom = t1 + t2 * b2
    out = np.empty((tu.size, 3))
    out[:, 0] = ((a1 + a2 * b2) * r1 - r2 / 3.0 + a5 * b2 * r3) / denom
    out[:, 1] = ((bb1 + bb2 * b2) * r1 + r2 + bb5 * b2 * r3) / denom
    out[:, 2] = b * ((c1 + c2 * b2) * r1 - r2 + (c5 + c6 * b2) * r3) / denom
    return _package(params, t, out, Method.ANALYTIC_P1, {"branch": "p1"})


def _adjugate(m: np.ndarray) -> np.ndarray:
    """Adjugate of a 3x3 matrix from its cofactors, ``adj[k, l] = C[l, k]``."""
    cof = np.empty((3, 3), dtype=m.dtype)
    for i in range(3):
        for j in range(3):
            rows = [r for r in range(3) if r != i]
            cols = [c for c in range(3) if c != j]
            minor = m[np.ix_(rows, cols)]
            cof[i, j] = (-1) ** (i + j) * (minor[0, 0] * minor[1, 1] - minor[0, 1] * minor[1, 0])
    return cof.T


def dm_general(params: VParams, t, spectrum: Spectrum | None = None):
    """Exact spectral sum from the ground state with explicit cofactors.

    ``rho_n(t) = (r / det M) sum_k (exp(l_k t) - 1)/l_k V_{k,n} (T_k1 + p T_k2)``
    where ``M`` holds the eigenvectors as columns and ``T`` is its adjugate.

    Raises
    ------
    DegenerateEigenvector
        If the eigenvector matrix is singular even after a ``1e-10 gamma``
        detuning of the splitting.
    """
    validate(params)
    tu = _times_units(params, t)
    attempts = [params, params.replace(delta=params.delta + 1e-10 * params.gamma)]
    for k, trial in enumerate(attempts):
        if spectrum is not None and k == 0:
            lams = np.asarray(spectrum.lambdas, dtype=complex) / params.gamma
            vecs = spectrum.eigvecs
        else:
            lams = _cardano_units(trial.p, trial.y, trial.nbar)
            vecs = None
        try:
            if vecs is None:
                unit = trial.replace(gamma=1.0, delta=trial.y)
                vecs = eigenvectors_exact(unit, Spectrum(lams, None, SpectrumMethod.CARDANO))
        except DegenerateEigenvector:
            continue
        adj = _adjugate(np.asarray(vecs, dtype=complex))
        det = np.sum(vecs[0, :] * adj[:, 0])
        if abs(det) > 1e-12 * np.prod(np.linalg.norm(vecs, axis=0)) and np.all(lams != 0):
            break
    else:
        raise DegenerateEigenvector("eigenvector matrix is singular")
    r, p = trial.nbar, trial.p
    weights = r / det * (adj[:, 0] + p * adj[:, 1])
    with np.errstate(under="ignore"):
        growth = np.expm1(np.outer(tu, lams)) / lams
    vals = (growth * weights) @ vecs.T
    out = vals.real + 0.0
    return _package(params, t, out, Method.ANALYTIC_GENERAL, {"branch": "general", "imag_residue": float(np.abs(vals.imag).max())})


def analytic_auto(params: VParams, t):
    """Dispatch to the most specific applicable closed form.

    Order: regime -> critical alignment -> small splitting; points outside
    the overdamped expansion window fall back to :func:`dm_general`.
    Always returns a :class:`Trajectory` (``info['branch']`` names the form).
    """
    validate(params)
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    reg = classify(params)
    if reg.tag is RegimeTag.UNDERDAMPED or not in_validity_window(params.p, params.y, params.nbar) or params.y == 0:
        return dm_general(params, tt)
    if params.y <= SMALL_DELTA_MAX:
        return rho_small_delta(params, tt, "supercritical" if _is_supercritical(params) else "subcritical")
    if _is_supercritical(params):
        return rho_supercritical(params, tt)
    return rho_subcritical(params, tt)
