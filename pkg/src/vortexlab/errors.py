"""Exception hierarchy shared by every vortexlab module."""


class VortexLabError(Exception):
    """Base class for all library errors."""


class DomainError(VortexLabError, ValueError):
    """An argument lies outside the admissible range of an operation."""


class SingularityError(VortexLabError, ValueError):
    """Two points coincide where the interaction kernel is singular."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class NumericalError(VortexLabError, ArithmeticError):
    """A numerical procedure failed (eigensolver, quadrature, Newton...)."""


class NoInstabilityError(NumericalError):
    """The linearization has no eigenvalue with positive real part."""


class CollisionError(NumericalError):
    """Two vortices came closer than the configured floor during integration."""

    def __init__(self, message, time=None, pair=None):
        super().__init__(message)
        self.time = time
        self.pair = pair


class StepBudgetError(NumericalError):
    """The integrator exhausted its step budget before reaching t_end."""


class NonEscapeError(NumericalError):
    """An escape experiment did not reach the exit radius within its horizon."""


class InversionError(NumericalError):
    """Newton inversion of the conformal map did not converge."""


class QuadratureError(NumericalError):
    """Path quadrature of the conformal map could not be resolved."""
