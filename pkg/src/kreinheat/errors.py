"""Exception hierarchy.

Validation problems derive from :class:`ValidationError` (a ``ValueError``);
failures of a numerical method derive from :class:`NumericalError`.  The CLI
maps the two families onto distinct exit codes.
"""


class KreinHeatError(Exception):
    """Base class for all package errors."""


class ValidationError(KreinHeatError, ValueError):
    """A parameter or configuration violates a documented invariant."""


class DomainError(ValidationError):
    """Argument outside the domain of a special function."""


class PoleError(DomainError):
    """Argument sits on a pole (e.g. Gamma at a non-positive integer)."""


class NumericalError(KreinHeatError, ArithmeticError):
    """A numerical method could not deliver a result within tolerance."""


class ResonanceError(NumericalError):
    """Frobenius recursion hit the resonant order nu = 1/2 with V != 0."""


class SeriesOverflowError(NumericalError):
    """Frobenius coefficients diverged before the requested order."""


class TruncationError(NumericalError):
    """Series truncation error exceeds the matching tolerance."""


class StepUnderflowError(NumericalError):
    """The ODE integrator could not advance (typically too close to x = 0)."""


class TurningPointError(NumericalError):
    """Far-field seed point is not in the classically forbidden region."""


class ConditioningError(NumericalError):
    """A linear system or design matrix is too ill-conditioned."""


class InstabilityError(NumericalError):
    """Connection coefficients moved under matching-point halving."""


class EigenvalueCollisionError(NumericalError):
    """Spectral parameter coincides with an eigenvalue (vanishing Wronskian)."""


class KreinPoleError(NumericalError):
    """The Krein function has a pole (beta ~ 0)."""


class QuadratureError(NumericalError):
    """Composite quadrature did not converge."""


class MissedRootError(NumericalError):
    """Eigenvalue count outside the Weyl sanity window."""


class InsufficientSpectrumError(NumericalError):
    """Spectral sums cannot meet the certified tail-bound invariant."""


class GateError(NumericalError):
    """A consistency gate failed (signals an upstream normalization bug)."""


class ScientificCheckError(KreinHeatError):
    """A mathematical identity or prediction was falsified by the numerics."""
