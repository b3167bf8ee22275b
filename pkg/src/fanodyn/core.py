"""Parameter and state value types shared across the package.

All internal arithmetic is carried out in units of the radiative decay rate
``gamma``.  ``VParams`` keeps ``gamma`` so that callers can work with physical
units; every other module divides it out through :meth:`VParams.y` and
:meth:`VParams.nbar`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FanodynError",
    "DomainError",
    "SingularGenerator",
    "StepFailure",
    "NoRoot",
    "NoCrossing",
    "OutsideValidity",
    "WrongRegime",
    "WrongBranch",
    "SplittingTooLarge",
    "DegenerateEigenvector",
    "VParams",
    "StateVector",
    "RegimeTag",
    "Regime",
    "validate",
    "critical_tolerance",
    "CRITICAL_RTOL",
]

#: Relative width of the band in which the discriminant counts as zero.
CRITICAL_RTOL = 1e-9


class FanodynError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(FanodynError, ValueError):
    """A parameter lies outside its admissible range.

    Attributes
    ----------
    field : str
        Name of the offending parameter.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class SingularGenerator(FanodynError):
    """The generator matrix is (numerically) singular."""


class StepFailure(FanodynError):
    """The adaptive stepper could not continue.

    Attributes
    ----------
    t_reached : float
        Last time successfully reached by the integrator.
    """

    def __init__(self, message: str, t_reached: float):
        super().__init__(f"{message} (t reached = {t_reached!r})")
        self.t_reached = t_reached


class NoRoot(FanodynError):
    """No sign change of the discriminant inside the search bracket."""


class NoCrossing(FanodynError):
    """The slow-mode terms never cross inside the alignment bracket."""


class OutsideValidity(FanodynError):
    """Parameters fall outside the window where the 1/nbar expansion holds."""


class WrongRegime(FanodynError):
    """Operation requires a different dynamical regime."""


class WrongBranch(FanodynError):
    """Operation requires the other side of the critical alignment."""


class SplittingTooLarge(FanodynError):
    """The small-splitting closed forms were requested at large splitting."""


class DegenerateEigenvector(FanodynError):
    """Eigenvector formula breaks down (near-defective generator)."""


@dataclass(frozen=True)
class VParams:
    """Physical parameters of one symmetric V-system.

    Parameters
    ----------
    delta : float
        Excited-state splitting, same units as ``gamma``.
    p : float
        Transition dipole alignment factor in ``[0, 1]``.
    nbar : float
        Effective thermal photon occupation number.
    gamma : float, default 1.0
        Radiative decay rate.  The default expresses everything in units of
        ``gamma``.
    """

    delta: float
    p: float
    nbar: float
    gamma: float = 1.0

    @property
    def r(self) -> float:
        """Incoherent pumping rate ``nbar * gamma``."""
        return self.nbar * self.gamma

    @property
    def y(self) -> float:
        """Dimensionless splitting ``delta / gamma``."""
        return self.delta / self.gamma

    @property
    def x(self) -> float:
        """Small expansion parameter ``1 / nbar``."""
        if self.nbar == 0:
            return math.inf
        return 1.0 / self.nbar

    def replace(self, **changes) -> "VParams":
        """Return a copy with some fields replaced."""
        fields = {"delta": self.delta, "p": self.p, "nbar": self.nbar, "gamma": self.gamma}
        fields.update(changes)
        return VParams(**fields)

    def as_dict(self) -> dict:
        return {"gamma": self.gamma, "delta": self.delta, "p": self.p, "nbar": self.nbar}


def validate(params: VParams) -> VParams:
    """Check the admissible ranges of ``params`` and return it unchanged.

    Raises
    ------
    DomainError
        If ``gamma <= 0``, ``delta < 0``, ``p`` outside ``[0, 1]``,
        ``nbar < 0`` or any field is not finite.
    """
    for name in ("gamma", "delta", "p", "nbar"):
        value = getattr(params, name)
        try:
            ok = math.isfinite(value)
        except TypeError:
            raise DomainError(name, f"not a real number ({value!r})") from None
        if not ok:
            raise DomainError(name, f"must be finite, got {value!r}")
    if params.gamma <= 0:
        raise DomainError("gamma", f"must be > 0, got {params.gamma!r}")
    if params.delta < 0:
        raise DomainError("delta", f"must be >= 0, got {params.delta!r}")
    if not 0.0 <= params.p <= 1.0:
        raise DomainError("p", f"must lie in [0, 1], got {params.p!r}")
    if params.nbar < 0:
        raise DomainError("nbar", f"must be >= 0, got {params.nbar!r}")
    return params


@dataclass(frozen=True)
class StateVector:
    """Reduced state ``(rho_aa, Re rho_ab, Im rho_ab)``.

    The symmetric V-system has ``rho_bb == rho_aa`` and the ground-state
    population follows from the trace.
    """

    rho_aa: float
    rho_ab_re: float
    rho_ab_im: float

    @property
    def rho_bb(self) -> float:
        return self.rho_aa

    @property
    def rho_cc(self) -> float:
        return 1.0 - 2.0 * self.rho_aa

    def as_array(self) -> np.ndarray:
        return np.array([self.rho_aa, self.rho_ab_re, self.rho_ab_im], dtype=float)

    @classmethod
    def from_array(cls, values) -> "StateVector":
        v = np.asarray(values, dtype=float).reshape(3)
        return cls(float(v[0]), float(v[1]), float(v[2]))

    def is_physical(self, tol: float = 1e-9) -> bool:
        """Positivity diagnostic for the excited-state block.

        Checks ``0 <= rho_aa <= 1/2`` and ``|rho_ab| <= rho_aa`` within
        ``tol``.  A violation is reported, never raised.
        """
        if self.rho_aa < -tol or self.rho_aa > 0.5 + tol:
            return False
        return math.hypot(self.rho_ab_re, self.rho_ab_im) <= self.rho_aa + tol


class RegimeTag(str, enum.Enum):
    UNDERDAMPED = "underdamped"
    OVERDAMPED = "overdamped"
    CRITICAL = "critical"


@dataclass(frozen=True)
class Regime:
    """Classification of one parameter point.

    Attributes
    ----------
    tag : RegimeTag
    discriminant_value : float
        Signed discriminant in units ``gamma = 1``.
    """

    tag: RegimeTag
    discriminant_value: float


def critical_tolerance(term_scale: float) -> float:
    """Absolute half-width of the critical band around ``D = 0``.

    Parameters
    ----------
    term_scale : float
        Sum of the magnitudes of the terms that make up ``D``
        (``sum_k |d_k| nbar**k / 108``).  For large ``nbar`` this is the
        leading term ``|d6| nbar**6 / 108``.  Scaling by the cancelling terms
        rather than by a fixed floor keeps a strictly positive ``D`` (as at
        ``p = 0``) out of the band however small it is.
    """
    return CRITICAL_RTOL * term_scale
