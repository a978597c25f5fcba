"""Krein resolvent formula and heat-trace asymptotics for an inverse-square singularity.

The operator ``A = -d^2/dx^2 + (nu^2 - 1/4)/x^2 + V(x)`` with ``0 < nu < 1``
admits a one-parameter family of self-adjoint extensions ``A^theta``.  This
package computes how their resolvents and spectra differ, and the small-``t``
expansion of the heat-trace difference against the Friedrichs extension.
"""

__version__ = "0.1.0"

from .errors import KreinHeatError, NumericalError, ScientificCheckError, ValidationError
from .model import INFINITY, ExtensionParam, Finite, Potential, ProblemSpec, Tolerances, make_spec, validate

__all__ = [
    "__version__",
    "KreinHeatError",
    "NumericalError",
    "ScientificCheckError",
    "ValidationError",
    "INFINITY",
    "ExtensionParam",
    "Finite",
    "Potential",
    "ProblemSpec",
    "Tolerances",
    "make_spec",
    "validate",
]
