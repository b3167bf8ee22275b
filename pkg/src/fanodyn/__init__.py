"""Dynamics of an incoherently pumped three-level V-system with Fano coherences."""

__version__ = "0.1.0"

from .core import (
    DegenerateEigenvector,
    DomainError,
    FanodynError,
    NoCrossing,
    NoRoot,
    OutsideValidity,
    Regime,
    RegimeTag,
    SingularGenerator,
    SplittingTooLarge,
    StateVector,
    StepFailure,
    VParams,
    WrongBranch,
    WrongRegime,
)
from .regime import boundary_delta, classify, discriminant_direct, discriminant_poly, slope_f
from .spectral import coherence_lifetime, critical_p, eigenvalues_cardano, eigenvalues_numeric
from .generator import propagate_exact, propagate_stepped, steady_state
from .analytic import analytic_auto, coeffs, dm_general

__all__ = [
    "__version__",
    "VParams",
    "StateVector",
    "Regime",
    "RegimeTag",
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
    "classify",
    "discriminant_direct",
    "discriminant_poly",
    "slope_f",
    "boundary_delta",
    "eigenvalues_cardano",
    "eigenvalues_numeric",
    "critical_p",
    "coherence_lifetime",
    "steady_state",
    "propagate_exact",
    "propagate_stepped",
    "coeffs",
    "dm_general",
    "analytic_auto",
]
