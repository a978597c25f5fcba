r"""Series on the exponent lattice ``{p/2 + q nu}``.

A :class:`FractionalSeries` in ``z`` stores ``sum c_{p,q,N} z^{-(p/2 + q nu)}``;
in ``t`` it stores ``sum c_{p,q,N} t^{+(p/2 + q nu)}``.  ``N`` is the power of
the boundary parameter ``theta`` carried by a term, kept separate so the
polynomial dependence on ``theta`` stays explicit.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .errors import NumericalError, ValidationError
from .specfun import gamma

__all__ = [
    "LatticeExponent",
    "FractionalSeries",
    "CollisionWarning",
    "series_mul",
    "series_add",
    "series_scale",
    "series_inverse",
    "krein_factor",
    "inverse_laplace",
    "find_collisions",
]

COLLISION_EPS = 1e-9
_VALUE_EPS = 1e-12


class CollisionWarning(UserWarning):
    """Distinct lattice points with numerically equal exponent values."""


@dataclass(frozen=True, order=True)
class LatticeExponent:
    """Exponent ``p/2 + q nu``."""

    p: int
    q: int = 0

    def value(self, nu: float) -> float:
        return 0.5 * self.p + self.q * nu

    def __add__(self, other: "LatticeExponent") -> "LatticeExponent":
        return LatticeExponent(self.p + other.p, self.q + other.q)

    def __str__(self):
        return f"({self.p}/2{self.q:+d}nu)"


Key = tuple  # (p, q, N)


@dataclass(frozen=True)
class FractionalSeries:
    """Finite sum of lattice powers.

    Parameters
    ----------
    var
        ``"z"`` (terms ``z^{-value}``) or ``"t"`` (terms ``t^{value}``).
    nu
        Lattice parameter.
    terms
        Map ``(p, q, N) -> coefficient``; the coefficient excludes ``theta^N``.
    truncation
        Largest exponent value retained.
    theta
        Value substituted for ``theta`` when the series is evaluated.
    """

    var: str
    nu: float
    terms: Mapping[Key, float] = field(default_factory=dict)
    truncation: float = 3.0
    theta: float | None = None

    def __post_init__(self):
        if self.var not in ("z", "t"):
            raise ValidationError(f"variable must be 'z' or 't', got {self.var!r}")
        kept = {}
        for k, c in self.terms.items():
            k = (int(k[0]), int(k[1]), int(k[2]) if len(k) > 2 else 0)
            if self._val(k) <= self.truncation + _VALUE_EPS and c != 0.0:
                kept[k] = kept.get(k, 0.0) + float(c)
        object.__setattr__(self, "terms", dict(sorted(kept.items(), key=lambda kv: (self._val(kv[0]), kv[0]))))

    def _val(self, k) -> float:
        return 0.5 * k[0] + k[1] * self.nu

    @classmethod
    def constant(cls, var: str, nu: float, c: float = 1.0, truncation: float = 3.0) -> "FractionalSeries":
        return cls(var, nu, {(0, 0, 0): c}, truncation)

    @classmethod
    def monomial(cls, var, nu, p, q, c=1.0, N=0, truncation=3.0) -> "FractionalSeries":
        return cls(var, nu, {(p, q, N): c}, truncation)

    def exponents(self) -> list[LatticeExponent]:
        seen = []
        for p, q, _ in self.terms:
            e = LatticeExponent(p, q)
            if e not in seen:
                seen.append(e)
        return seen

    def coefficient(self, p: int, q: int = 0, N: int | None = None) -> float:
        """Coefficient of one lattice point; ``theta^N`` included unless ``N`` is given."""
        if N is not None:
            return self.terms.get((p, q, N), 0.0)
        th = self.theta
        tot = 0.0
        for (pp, qq, nn), c in self.terms.items():
            if (pp, qq) == (p, q):
                if nn and th is None:
                    raise ValidationError("series has theta powers but no theta value")
                tot += c * (th**nn if nn else 1.0)
        return tot

    def collapsed(self) -> dict[LatticeExponent, float]:
        """Coefficients with ``theta^N`` multiplied in, keyed by exponent."""
        out: dict[LatticeExponent, float] = {}
        for p, q, _ in self.terms:
            e = LatticeExponent(p, q)
            if e not in out:
                out[e] = self.coefficient(p, q)
        return out

    def __call__(self, x):
        tot = 0.0
        for e, c in self.collapsed().items():
            v = e.value(self.nu)
            tot = tot + c * (x ** (-v) if self.var == "z" else x**v)
        return tot

    def leading(self) -> LatticeExponent:
        if not self.terms:
            raise ValidationError("empty series has no leading term")
        p, q, _ = next(iter(self.terms))
        return LatticeExponent(p, q)

    def with_truncation(self, trunc: float) -> "FractionalSeries":
        return FractionalSeries(self.var, self.nu, self.terms, trunc, self.theta)

    def with_theta(self, theta: float | None) -> "FractionalSeries":
        return FractionalSeries(self.var, self.nu, self.terms, self.truncation, theta)

    def to_json(self) -> str:
        rows = [
            {"p": p, "q": q, "value": self._val((p, q, n)), "coefficient": c, "theta_power": n}
            for (p, q, n), c in self.terms.items()
        ]
        doc = {"var": self.var, "nu": self.nu, "truncation": self.truncation, "theta": self.theta, "terms": rows}
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FractionalSeries":
        d = json.loads(text)
        terms = {(r["p"], r["q"], r.get("theta_power", 0)): r["coefficient"] for r in d["terms"]}
        return cls(d["var"], d["nu"], terms, d["truncation"], d.get("theta"))


def _compatible(a: FractionalSeries, b: FractionalSeries):
    if a.var != b.var:
        raise ValidationError(f"variable mismatch: {a.var} vs {b.var}")
    if abs(a.nu - b.nu) > 1e-15:
        raise ValidationError("series built on different lattices")


def _theta(a, b):
    if a.theta is not None and b.theta is not None and a.theta != b.theta:
        raise ValidationError("series carry different theta values")
    return a.theta if a.theta is not None else b.theta


def series_mul(a: FractionalSeries, b: FractionalSeries) -> FractionalSeries:
    """Product; exponents and theta powers add, truncation is the smaller one."""
    _compatible(a, b)
    trunc = min(a.truncation, b.truncation)
    out: dict[Key, float] = {}
    for (p1, q1, n1), c1 in a.terms.items():
        for (p2, q2, n2), c2 in b.terms.items():
            k = (p1 + p2, q1 + q2, n1 + n2)
            if 0.5 * k[0] + k[1] * a.nu <= trunc + _VALUE_EPS:
                out[k] = out.get(k, 0.0) + c1 * c2
    return FractionalSeries(a.var, a.nu, out, trunc, _theta(a, b))


def series_add(a: FractionalSeries, b: FractionalSeries) -> FractionalSeries:
    _compatible(a, b)
    out = dict(a.terms)
    for k, c in b.terms.items():
        out[k] = out.get(k, 0.0) + c
    return FractionalSeries(a.var, a.nu, out, min(a.truncation, b.truncation), _theta(a, b))


def series_scale(a: FractionalSeries, c: float) -> FractionalSeries:
    return FractionalSeries(a.var, a.nu, {k: c * v for k, v in a.terms.items()}, a.truncation, a.theta)


def series_inverse(a: FractionalSeries) -> FractionalSeries:
    """Neumann-series inverse of a series with a nonzero constant term."""
    a0 = a.terms.get((0, 0, 0), 0.0)
    if a0 == 0.0:
        raise ValidationError("series_inverse needs a nonzero constant term")
    rest = {k: v / a0 for k, v in a.terms.items() if k != (0, 0, 0)}
    vals = [0.5 * k[0] + k[1] * a.nu for k in rest]
    if any(v <= 0 for v in vals):
        raise ValidationError("series_inverse needs all non-constant exponents positive")
    r = FractionalSeries(a.var, a.nu, rest, a.truncation, a.theta)
    one = FractionalSeries.constant(a.var, a.nu, 1.0, a.truncation)
    acc = one
    power = one
    steps = int(math.ceil(a.truncation / min(vals))) + 1 if vals else 0
    for m in range(1, steps + 1):
        power = series_mul(power, r)
        if not power.terms:
            break
        acc = series_add(acc, series_scale(power, (-1.0) ** m))
    return FractionalSeries(a.var, a.nu, {k: v / a0 for k, v in acc.terms.items()}, a.truncation, a.theta)


def krein_factor(K: FractionalSeries, theta: float, about: str = "zero") -> FractionalSeries:
    r"""Series of ``1 / (1 + theta K(z))``.

    ``about="zero"`` expands in powers of ``theta K`` (``K`` must lead with
    ``z^{-nu}``): ``sum_N (-theta)^N K^N``, the ``theta^N`` kept per term.
    ``about="infinity"`` expands in powers of ``1/(theta K)``, exchanging
    the roles of the two scale-invariant extensions; theta powers are then
    negative.
    """
    if K.var != "z":
        raise ValidationError("krein_factor expects a series in z")
    if K.terms and K.leading() != LatticeExponent(0, 1):
        raise ValidationError(f"K must lead with z^-nu, got {K.leading()}")
    one = FractionalSeries.constant("z", K.nu, 1.0, K.truncation)
    if theta == 0.0 or not K.terms:
        return one.with_theta(theta)
    if about == "zero":
        acc = one
        power = one
        n_max = int(math.floor(K.truncation / K.nu + 1e-9))
        for N in range(1, n_max + 1):
            power = series_mul(power, K)
            stamped = {(p, q, N): c * (-1.0) ** N for (p, q, _), c in power.terms.items()}
            acc = series_add(acc, FractionalSeries("z", K.nu, stamped, K.truncation))
        return acc.with_theta(theta)
    if about == "infinity":
        c0 = K.terms[(0, 1, 0)]
        # 1/K = z^{nu} (1/c0) (K/(c0 z^-nu))^{-1}; q shifts by -1 per power
        unit = FractionalSeries("z", K.nu, {(p, q - 1, 0): v / c0 for (p, q, _), v in K.terms.items()}, K.truncation)
        inv = series_inverse(unit)
        acc = FractionalSeries("z", K.nu, {}, K.truncation)
        n_max = int(math.floor(1.0 / K.nu - 1e-9))
        for N in range(1, n_max + 1):
            power = inv
            for _ in range(N - 1):
                power = series_mul(power, inv)
            stamped = {(p, q - N, -N): v * (-1.0) ** (N - 1) / c0**N for (p, q, _), v in power.terms.items()}
            acc = series_add(acc, _raw("z", K.nu, stamped, K.truncation))
        return acc.with_theta(theta)
    raise ValidationError(f"about must be 'zero' or 'infinity', got {about!r}")


def _raw(var, nu, terms, trunc):
    return FractionalSeries(var, nu, terms, trunc)


def find_collisions(exps: Iterable[LatticeExponent], nu: float) -> list[tuple[LatticeExponent, LatticeExponent]]:
    """Pairs of distinct lattice points whose values agree to ``1e-9``."""
    exps = sorted(set(exps), key=lambda e: e.value(nu))
    out = []
    for i, a in enumerate(exps):
        for b in exps[i + 1 :]:
            if abs(a.value(nu) - b.value(nu)) < COLLISION_EPS:
                out.append((a, b))
    return out


def inverse_laplace(series: FractionalSeries) -> FractionalSeries:
    """Term map ``z^{-s} -> t^{s-1} / Gamma(s)``, i.e. ``(p, q) -> (p - 2, q)``."""
    if series.var != "z":
        raise ValidationError("inverse_laplace expects a series in z")
    out = {}
    for (p, q, n), c in series.terms.items():
        s = 0.5 * p + q * series.nu
        if s <= 0:
            raise NumericalError(f"exponent z^-{s:g} has no function inverse Laplace transform")
        out[(p - 2, q, n)] = c / gamma(s)
    res = FractionalSeries("t", series.nu, out, series.truncation - 1.0, series.theta)
    coll = find_collisions(res.exponents(), series.nu)
    if coll:
        warnings.warn(f"exponent collisions in t-series: {coll}", CollisionWarning, stacklevel=2)
    return res


def rational_near(nu: float, max_den: int) -> Fraction | None:
    """A rational with denominator ``<= max_den`` within ``1e-9`` of ``nu``, if any."""
    f = Fraction(nu).limit_denominator(max_den)
    return f if abs(float(f) - nu) < COLLISION_EPS else None
