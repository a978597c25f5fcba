"""Problem definition: the operator, its boundary parameter and numerical policy.

The operator is ``A = -d^2/dx^2 + (nu^2 - 1/4)/x^2 + V(x)`` on the half-line
(or on ``[0, R]`` with a Dirichlet wall at ``R``), with a polynomial
potential ``V``.  Self-adjoint extensions are labelled by
:class:`ExtensionParam`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .specfun import FnAccuracy

__all__ = [
    "ExtensionParam",
    "INFINITY",
    "Finite",
    "Potential",
    "Tolerances",
    "ProblemSpec",
    "validate",
    "eval_potential",
    "is_scale_invariant",
]

MAX_DEGREE = 8
RESONANCE_EPS = 1e-6
NU_SAFE_RANGE = (0.05, 0.95)
MODES = ("dirichlet", "halfline")


@dataclass(frozen=True)
class ExtensionParam:
    """Boundary parameter theta of a self-adjoint extension.

    ``theta = inf`` is the Friedrichs extension (pure ``x^{nu+1/2}``
    behaviour at the origin).  theta carries dimension ``length^{-2 nu}``.
    """

    theta: float

    def __post_init__(self):
        t = float(self.theta)
        if math.isnan(t) or t == -math.inf:
            raise ValidationError(f"theta must be a real number or +inf, got {self.theta!r}")
        object.__setattr__(self, "theta", t)

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.theta)

    @classmethod
    def parse(cls, text: str | float) -> "ExtensionParam":
        if isinstance(text, (int, float)):
            return cls(float(text))
        s = str(text).strip().lower()
        if s in ("inf", "infinity", "+inf"):
            return cls(math.inf)
        try:
            return cls(float(s))
        except ValueError as exc:
            raise ValidationError(f"cannot parse theta {text!r}") from exc

    def label(self) -> str:
        return "inf" if self.is_infinite else f"{self.theta:g}"

    def __str__(self):
        return self.label()


INFINITY = ExtensionParam(math.inf)


def Finite(theta: float) -> ExtensionParam:  # noqa: N802 - reads like a tagged constructor
    theta = float(theta)
    if not math.isfinite(theta):
        raise ValidationError(f"Finite(theta) needs a finite theta, got {theta!r}")
    return ExtensionParam(theta)


@dataclass(frozen=True)
class Potential:
    """Polynomial potential ``V(x) = sum_j coeffs[j] x^j``."""

    coeffs: tuple[float, ...] = ()
    check_radius: float | None = None

    def __post_init__(self):
        c = [float(v) for v in self.coeffs]
        while c and c[-1] == 0.0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def __call__(self, x):
        return eval_potential(self, x)

    def derivative(self, x):
        if len(self.coeffs) < 2:
            return np.zeros_like(np.asarray(x, dtype=float)) if np.ndim(x) else 0.0
        d = Potential(tuple(j * c for j, c in enumerate(self.coeffs) if j > 0))
        return eval_potential(d, x)


def eval_potential(p: Potential, x):
    """Horner evaluation of ``V(x)``; works on scalars and arrays."""
    acc = 0.0 * np.asarray(x, dtype=float) if np.ndim(x) else 0.0
    for c in reversed(p.coeffs):
        acc = acc * x + c
    return acc


@dataclass(frozen=True)
class Tolerances:
    fn: FnAccuracy = field(default_factory=FnAccuracy)
    ode_rtol: float = 1e-12
    match_tol: float = 1e-9

    def __post_init__(self):
        for name in ("ode_rtol", "match_tol"):
            v = getattr(self, name)
            if not (0.0 < v < 1e-3):
                raise ValidationError(f"tolerance {name} must lie in (0, 1e-3), got {v!r}")


@dataclass(frozen=True)
class ProblemSpec:
    """Operator data plus the numerical policy used to treat it.

    Parameters
    ----------
    nu
        Order of the singular term, ``0 < nu < 1``.
    potential
        Polynomial ``V``.
    trunc_radius
        Position ``R`` of the Dirichlet wall (``dirichlet`` mode) and the
        right end of the evaluation region (``halfline`` mode).
    far_cutoff
        ``c_far``; decaying half-line solutions are seeded at
        ``x_far = c_far / sqrt(z) + far_offset``.
    mode
        ``"dirichlet"`` or ``"halfline"``; selects the right-hand solution used
        by Green kernels and the Krein function.
    allow_extreme_nu
        Permit ``nu`` outside ``[0.05, 0.95]``.
    """

    nu: float
    potential: Potential = field(default_factory=Potential)
    trunc_radius: float = 1.0
    far_cutoff: float = 30.0
    far_offset: float = 0.0
    mode: str = "dirichlet"
    tolerances: Tolerances = field(default_factory=Tolerances)
    allow_extreme_nu: bool = False

    @property
    def singular_coeff(self) -> float:
        return self.nu * self.nu - 0.25

    def q(self, x):
        """Full potential ``(nu^2 - 1/4)/x^2 + V(x)``."""
        return self.singular_coeff / (x * x) + eval_potential(self.potential, x)

    def q_prime(self, x):
        return -2.0 * self.singular_coeff / (x * x * x) + self.potential.derivative(x)

    @property
    def free_resonant(self) -> bool:
        """True on the closed-form nu = 1/2, V = 0 path."""
        return abs(self.nu - 0.5) <= RESONANCE_EPS and self.potential.is_zero


def _as_potential(p) -> Potential:
    if isinstance(p, Potential):
        return p
    if isinstance(p, (list, tuple)):
        return Potential(tuple(p))
    raise ValidationError(f"potential must be a Potential or coefficient list, got {p!r}")


def validate(spec: ProblemSpec) -> ProblemSpec:
    """Check every invariant of ``spec`` and return its normalized form.

    Idempotent: ``validate(validate(s)) == validate(s)``.
    """
    nu = float(spec.nu)
    if not (0.0 < nu < 1.0) or math.isnan(nu):
        raise ValidationError(f"order out of (0,1): nu={spec.nu!r}")
    lo, hi = NU_SAFE_RANGE
    if not spec.allow_extreme_nu and not (lo <= nu <= hi):
        raise ValidationError(
            f"order nu={nu} outside the well-conditioned range [{lo}, {hi}]; "
            "set allow_extreme_nu to override"
        )
    pot = _as_potential(spec.potential)
    if pot.degree > MAX_DEGREE:
        raise ValidationError(f"potential degree {pot.degree} exceeds {MAX_DEGREE}")
    if any(not math.isfinite(c) for c in pot.coeffs):
        raise ValidationError("potential coefficients must be finite")
    if abs(nu - 0.5) <= RESONANCE_EPS and not pot.is_zero:
        raise ValidationError(
            "nu = 1/2 is resonant for the Frobenius recursion (x^{1/2-nu+1} meets "
            "x^{1/2+nu}); only V = 0 is supported there (free-particle path)"
        )
    R = float(spec.trunc_radius)
    if not (R > 0.0 and math.isfinite(R)):
        raise ValidationError(f"trunc_radius must be positive, got {spec.trunc_radius!r}")
    if not spec.far_cutoff >= 30.0:
        raise ValidationError(f"far_cutoff must be >= 30, got {spec.far_cutoff!r}")
    if spec.far_offset < 0.0:
        raise ValidationError(f"far_offset must be >= 0, got {spec.far_offset!r}")
    if spec.mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {spec.mode!r}")

    radius = float(pot.check_radius) if pot.check_radius is not None else R
    if radius <= 0.0:
        raise ValidationError("potential check radius must be positive")
    xs = np.linspace(0.0, radius, 513)
    vals = eval_potential(pot, xs)
    if not np.all(np.isfinite(vals)):
        raise ValidationError("potential is not finite on the check interval")
    if spec.mode == "halfline" and pot.degree >= 1 and pot.coeffs[-1] < 0.0:
        raise ValidationError("potential is unbounded below on the half-line (negative leading coefficient)")
    pot = replace(pot, check_radius=radius)

    tol = spec.tolerances
    if not isinstance(tol, Tolerances):
        raise ValidationError("tolerances must be a Tolerances instance")

    return replace(
        spec,
        nu=nu,
        potential=pot,
        trunc_radius=R,
        far_cutoff=float(spec.far_cutoff),
        far_offset=float(spec.far_offset),
    )


def potential_minimum(p: Potential, radius: float) -> float:
    """Sampled minimum of ``V`` on ``[0, radius]``."""
    xs = np.linspace(0.0, radius, 2049)
    return float(np.min(eval_potential(p, xs)))


def is_scale_invariant(e: ExtensionParam) -> bool:
    """True for the two extensions whose boundary condition is scale invariant."""
    return e.is_infinite or e.theta == 0.0


def make_spec(nu: float, coeffs: Sequence[float] = (), **kw) -> ProblemSpec:
    """Convenience constructor returning a validated spec."""
    return validate(ProblemSpec(nu=nu, potential=Potential(tuple(coeffs)), **kw))
