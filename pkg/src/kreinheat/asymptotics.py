r"""Small-``t`` expansion of the heat-trace difference.

The pipeline:

1. fit ``H(z)``, defined by ``K(z) = c_nu z^{-nu} / H(z)``, to
   ``1 + sum_k h_k z^{-k/2}`` on a large-``z`` grid;
2. fit the ``theta = 0`` resolvent trace to ``sum_{k>=2} b_k z^{-k/2}``;
3. multiply by the series of ``1 / (1 + theta K)`` and invert the Laplace
   transform term by term.

The result is compared with least-squares fits of computed trace curves.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConditioningError, GateError, ValidationError
from .green_krein import krein_K, resolvent_trace_diff
from .heattrace import TraceCurve, heat_trace_from_resolvent_series
from .model import ExtensionParam, ProblemSpec
from .series import (
    CollisionWarning,
    FractionalSeries,
    LatticeExponent,
    find_collisions,
    krein_factor,
    series_inverse,
    series_mul,
    series_scale,
)
from .specfun import gamma

__all__ = [
    "LatticeExponent",
    "FractionalSeries",
    "FitReport",
    "krein_constant",
    "extract_H_series",
    "extract_base_trace_series",
    "predict_heat_expansion",
    "expansion_coefficients",
    "fit_trace_curve",
    "seed_exponent",
]

H0_GATE = 1e-6
COND_SUPPRESS = 1e10
WEIGHT_FLOOR = 1e-12


def krein_constant(nu: float) -> float:
    """``4^nu Gamma(1+nu) / Gamma(1-nu)``: ``K(z) z^nu`` for ``V = 0``."""
    return 4.0**nu * gamma(1.0 + nu) / gamma(1.0 - nu)


def _check_grid(z_grid) -> np.ndarray:
    z = np.asarray(z_grid, dtype=float)
    if z.size < 12 or np.any(z <= 0):
        raise ValidationError("z grid needs at least 12 positive points")
    if math.log10(z.max() / z.min()) < 2.0 - 1e-9:
        raise ValidationError("z grid must span at least two decades")
    return z


def _lsq(A: np.ndarray, y: np.ndarray, w: np.ndarray | None = None):
    if w is not None:
        A = A * w[:, None]
        y = y * w
    scale = np.linalg.norm(A, axis=0)
    scale[scale == 0] = 1.0
    An = A / scale
    coef, *_ = np.linalg.lstsq(An, y, rcond=None)
    cond = float(np.linalg.cond(An))
    resid = float(np.linalg.norm(An @ coef - y))
    return coef / scale, cond, resid


def extract_H_series(spec: ProblemSpec, z_grid, max_k: int = 4, truncation: float = 4.0) -> FractionalSeries:
    r"""Fit ``H(z) = c_nu z^{-nu} / K(z)`` to ``1 + sum_{k=1}^{max_k} h_k z^{-k/2}``.

    ``K`` is taken from the half-line decaying solution.  The constant is
    first fitted freely and must come back as 1 within ``1e-6``; the
    returned series then has it fixed to exactly 1.
    """
    z = _check_grid(z_grid)
    hl = replace(spec, mode="halfline")
    c = krein_constant(spec.nu)
    H = np.array([c * zi ** (-spec.nu) / krein_K(hl, zi) for zi in z])
    u = z ** -0.5
    A = np.stack([u**k for k in range(max_k + 1)], axis=1)
    coef, cond, _ = _lsq(A, H)
    if cond > COND_SUPPRESS:
        raise ConditioningError(f"H fit ill-conditioned (cond={cond:.1e}); lower max_k or widen the grid")
    if abs(coef[0] - 1.0) > H0_GATE:
        raise GateError(f"H(z) constant term {coef[0]!r} differs from 1: normalization error upstream")
    coef1, _, _ = _lsq(A[:, 1:], H - 1.0)
    terms = {(0, 0, 0): 1.0}
    terms.update({(k, 0, 0): float(h) for k, h in zip(range(1, max_k + 1), coef1)})
    return FractionalSeries("z", spec.nu, terms, truncation)


def extract_base_trace_series(spec: ProblemSpec, z_grid, max_k: int = 4, truncation: float = 4.0):
    r"""Fit ``Tr[(A^0 + z)^{-1} - (A^inf + z)^{-1}]`` to ``sum_{k=2}^{max_k+1} b_k z^{-k/2}``.

    Returns ``(series, residual)``.
    """
    z = _check_grid(z_grid)
    T = np.array([resolvent_trace_diff(spec, ExtensionParam(0.0), zi) for zi in z])
    ks = list(range(2, max_k + 2))
    A = np.stack([z ** (-0.5 * k) for k in ks], axis=1)
    # relative weighting: the trace spans decades across the grid
    w = 1.0 / np.abs(T)
    coef, cond, resid = _lsq(A, T, w)
    if cond > COND_SUPPRESS:
        raise ConditioningError(f"base-trace fit ill-conditioned (cond={cond:.1e})")
    terms = {(k, 0, 0): float(b) for k, b in zip(ks, coef)}
    return FractionalSeries("z", spec.nu, terms, truncation), resid


def predict_heat_expansion(
    nu: float,
    theta: float,
    H_series: FractionalSeries,
    base_series: FractionalSeries,
    truncation: float = 3.0,
    about: str = "zero",
) -> FractionalSeries:
    r"""Small-``t`` series of ``Tr[exp(-t A^theta) - exp(-t A^inf)]``.

    ``trace_theta(z) = base(z) / (1 + theta K(z))`` with
    ``K = c_nu z^{-nu} / H(z)``, then ``z^{-s} -> t^{s-1}/Gamma(s)``.
    ``truncation`` bounds the exponent in ``t``.
    """
    if abs(H_series.nu - nu) > 1e-15 or abs(base_series.nu - nu) > 1e-15:
        raise ValidationError("input series built for a different nu")
    tz = truncation + 1.0
    if H_series.truncation < tz - 1.0 - 1e-12 or base_series.truncation < tz - 1e-12:
        raise ValidationError("input series truncated below the requested order")
    H = H_series.with_truncation(tz)
    K = series_scale(series_mul(FractionalSeries.monomial("z", nu, 0, 1, 1.0, truncation=tz), series_inverse(H)), krein_constant(nu))
    factor = krein_factor(K, theta, about=about)
    trace_z = series_mul(base_series.with_truncation(tz), factor)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", CollisionWarning)
        out = heat_trace_from_resolvent_series(trace_z)
    for w in caught:
        warnings.warn(str(w.message), CollisionWarning, stacklevel=2)
    return out.with_theta(theta)


def expansion_coefficients(series: FractionalSeries) -> dict:
    """``a_n`` (``t^{n/2}``) and ``b_{N,n}`` (``theta^N t^{nu N + n/2 - 1/2}``), theta excluded."""
    a, b = {}, {}
    for (p, q, N), c in series.terms.items():
        if q == 0 and N == 0:
            a[p] = a.get(p, 0.0) + c
        else:
            b[(N, p + 1)] = b.get((N, p + 1), 0.0) + c
    return {"a": a, "b": b}


@dataclass
class FitReport:
    """Outcome of a least-squares fit of a trace curve onto powers of ``t``."""

    exponents: list[float]
    labels: list[str]
    coefficients: list[float]
    residual: float
    condition: float
    suppressed: bool = False
    merged: list = field(default_factory=list)
    free_exponent: float | None = None
    free_ci: tuple[float, float] | None = None

    def coefficient_at(self, value: float, tol: float = 1e-9) -> float:
        for e, c in zip(self.exponents, self.coefficients):
            if abs(e - value) < tol:
                return c
        raise KeyError(f"no basis term with exponent {value}")

    def coefficient_of(self, term) -> float:
        """Coefficient of a lattice basis term, matched by label (robust to a free exponent)."""
        key = str(term)
        for l, c in zip(self.labels, self.coefficients):
            if key in l.split("+("):
                return c
            if l == key or l.startswith(key + "+") or l.endswith("+" + key):
                return c
        raise KeyError(f"no basis term {key}")

    def to_json(self) -> str:
        d = {
            "basis": self.labels,
            "exponents": self.exponents,
            "coefficients": self.coefficients,
            "residual": self.residual,
            "condition": self.condition,
            "suppressed": self.suppressed,
            "merged": [[str(a), str(b)] for a, b in self.merged],
            "free_exponent": self.free_exponent,
            "free_exponent_ci": list(self.free_ci) if self.free_ci else None,
        }
        return json.dumps(d, indent=2, sort_keys=True)


def _basis_values(basis, nu_eff: float | None, free: float | None):
    """Exponent values and labels; lattice points use ``free`` in place of ``nu`` if given."""
    vals, labels, lattice = [], [], []
    for b in basis:
        if isinstance(b, LatticeExponent):
            n = free if (free is not None and b.q != 0) else nu_eff
            if n is None and b.q != 0:
                raise ValidationError("lattice basis with q != 0 needs nu")
            vals.append(b.value(n if n is not None else 0.0))
            labels.append(str(b))
            lattice.append(b)
        else:
            vals.append(float(b))
            labels.append(f"{float(b):g}")
            lattice.append(None)
    return vals, labels, lattice


def _merge(vals, labels, lattice):
    out_v, out_l, merged = [], [], []
    for v, l, b in zip(vals, labels, lattice):
        for i, ov in enumerate(out_v):
            if abs(ov - v) < 1e-9:
                merged.append((out_l[i], l))
                out_l[i] = out_l[i] + "+" + l
                break
        else:
            out_v.append(v)
            out_l.append(l)
    return out_v, out_l, merged


def _fit_fixed(t, y, w, vals):
    A = np.stack([t**e for e in vals], axis=1)
    return _lsq(A, y, w)


def seed_exponent(curve: TraceCurve, npts: int = 3) -> float:
    """Leading non-constant exponent from the smallest ``t`` values.

    With ``v(t) ~ a + b t^e``, three points in geometric progression give
    ``e = log(D2 / D1) / log r`` for successive differences ``D``.
    """
    t = curve.t[:npts]
    v = curve.values[:npts]
    r = t[1] / t[0]
    d1, d2 = v[1] - v[0], v[2] - v[1]
    if d1 == 0 or d2 / d1 <= 0:
        raise ValidationError("cannot seed an exponent from a flat or non-monotone start")
    return float(math.log(d2 / d1) / math.log(r))


def fit_trace_curve(
    curve: TraceCurve,
    basis: Sequence,
    nu: float | None = None,
    free_exponent: float | str | None = None,
    window: float | None = None,
    t_max: float | None = None,
    t_min: float | None = None,
    jackknife: bool = True,
) -> FitReport:
    r"""Weighted least squares of ``value(t)`` onto ``{t^e}``.

    Parameters
    ----------
    basis
        Exponent values (floats) or :class:`LatticeExponent` points (need
        ``nu``).  Values closer than ``1e-9`` are merged into one column.
    free_exponent
        ``None`` for a linear fit.  A float seeds a search for the
        exponent: every lattice basis point with ``q != 0`` is evaluated with
        the free exponent in place of ``nu`` (or, for a float basis, a term
        ``t^e`` is appended).  ``"auto"`` seeds from :func:`seed_exponent`.
        The residual is scanned on ``seed +- window`` and refined with a
        bounded scalar minimizer; a leave-one-out jackknife gives the
        interval.
    """
    sel = np.ones(curve.t.size, dtype=bool)
    if t_max is not None:
        sel &= curve.t <= t_max * (1 + 1e-12)
    if t_min is not None:
        sel &= curve.t >= t_min * (1 - 1e-12)
    t = curve.t[sel]
    y = curve.values[sel]
    w = 1.0 / np.maximum(curve.tail_bounds[sel], WEIGHT_FLOOR)
    basis = list(basis)
    lattice_free = any(isinstance(b, LatticeExponent) and b.q != 0 for b in basis)

    def design(e):
        vals, labels, lat = _basis_values(basis, nu, e if lattice_free else None)
        if e is not None and not lattice_free:
            vals.append(e)
            labels.append("free")
            lat.append(None)
        return _merge(vals, labels, lat)

    def residual(e, tt, yy, ww):
        vals, _, _ = design(e)
        _, _, res = _fit_fixed(tt, yy, ww, vals)
        return res

    e_hat, ci = None, None
    if free_exponent is not None:
        seed = seed_exponent(curve) if free_exponent == "auto" else float(free_exponent)
        win = window if window is not None else (0.1 if free_exponent == "auto" else 0.25)
        lo, hi = max(seed - win, 1e-3), seed + win

        def optimize(tt, yy, ww):
            grid = np.linspace(lo, hi, 41)
            r = [residual(g, tt, yy, ww) for g in grid]
            j = int(np.argmin(r))
            a, b = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
            opt = minimize_scalar(lambda e: residual(e, tt, yy, ww), bounds=(a, b), method="bounded",
                                  options={"xatol": 1e-10})
            return float(opt.x)

        e_hat = optimize(t, y, w)
        if jackknife and t.size > 3:
            n = t.size
            est = np.array([optimize(np.delete(t, i), np.delete(y, i), np.delete(w, i)) for i in range(n)])
            se = math.sqrt((n - 1) / n * float(np.sum((est - est.mean()) ** 2)))
            ci = (e_hat - 2.0 * se, e_hat + 2.0 * se)

    vals, labels, merged = design(e_hat)
    if merged:
        warnings.warn(f"basis exponents merged: {merged}", CollisionWarning, stacklevel=2)
    coef, cond, res = _fit_fixed(t, y, w, vals)
    suppressed = cond > COND_SUPPRESS
    if suppressed:
        coef = np.zeros_like(coef)
    return FitReport(list(map(float, vals)), labels, list(map(float, coef)), res, cond, suppressed, merged, e_hat, ci)


def lattice_basis(
    series: FractionalSeries, max_value: float, min_abs: float = 0.0, t_max: float | None = None
) -> list[LatticeExponent]:
    """Distinct exponents of ``series`` up to ``max_value`` whose size exceeds ``min_abs``.

    With ``t_max`` the size is the term's contribution ``|c| t_max^value`` at
    the end of the fit window, so terms below the data noise are left out
    rather than fitted to it.
    """
    out = []
    for e, c in series.collapsed().items():
        v = e.value(series.nu)
        size = abs(c) * (t_max**v if t_max is not None else 1.0)
        if v <= max_value + 1e-12 and size > min_abs and e not in out:
            out.append(e)
    if find_collisions(out, series.nu):
        warnings.warn("basis contains colliding exponents", CollisionWarning, stacklevel=2)
    return out
