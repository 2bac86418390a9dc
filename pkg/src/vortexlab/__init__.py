"""Point-vortex crystals in alpha-models, their instability data, confinement
thresholds, escape-time experiments and hexagonal-domain Robin saddles."""

from .core import AlphaModel, Configuration, PointVortex, coupling_constant, invariants, kernel, velocity_field
from .crystal import CrystalSpec, build_crystal, center_intensity
from .errors import (
    CollisionError,
    DomainError,
    InversionError,
    NoInstabilityError,
    NonEscapeError,
    NumericalError,
    QuadratureError,
    SingularityError,
    StepBudgetError,
    VortexLabError,
)
from .linearization import jacobian_analytic, jacobian_fd, linearize, spectrum
from .bounds import domain_thresholds, g_closed_form, nu_curve, nu_threshold, threshold_report
from .ode import IntegratorSettings, escape_experiment, integrate

__version__ = "0.1.0"

__all__ = [
    "AlphaModel",
    "Configuration",
    "PointVortex",
    "CrystalSpec",
    "IntegratorSettings",
    "coupling_constant",
    "kernel",
    "velocity_field",
    "invariants",
    "build_crystal",
    "center_intensity",
    "jacobian_analytic",
    "jacobian_fd",
    "linearize",
    "spectrum",
    "nu_threshold",
    "nu_curve",
    "g_closed_form",
    "threshold_report",
    "domain_thresholds",
    "integrate",
    "escape_experiment",
    "VortexLabError",
    "DomainError",
    "SingularityError",
    "NumericalError",
    "NoInstabilityError",
    "CollisionError",
    "StepBudgetError",
    "NonEscapeError",
    "InversionError",
    "QuadratureError",
    "__version__",
]
