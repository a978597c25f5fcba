r"""Solutions of :math:`(A - \lambda)\psi = 0` near the singular point x = 0 and away from it.

Near ``x = 0`` the two Frobenius branches

.. math:: u_\pm(x) = x^{1/2 \pm \nu} \sum_k c_k x^k, \qquad c_0 = 1

are evaluated from their series; away from the origin solutions are
advanced with an adaptive 8th order Runge-Kutta method.  A solution is
decomposed as ``alpha u_- + beta u_+`` by a 2x2 match at a point ``x_m``
chosen so that the series is converged and the decomposition well
conditioned.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    ConditioningError,
    InstabilityError,
    ResonanceError,
    SeriesOverflowError,
    StepUnderflowError,
    TruncationError,
    TurningPointError,
    DomainError,
)
from .model import RESONANCE_EPS, ExtensionParam, ProblemSpec

__all__ = [
    "Branch",
    "FrobeniusBranch",
    "SolutionSample",
    "ConnectionCoeffs",
    "Solution",
    "frobenius_coeffs",
    "frobenius_series",
    "seed_at",
    "integrate",
    "matching_point",
    "fundamental_pair",
    "solve_L",
    "solve_R_halfline",
    "solve_R_dirichlet",
    "solve_R",
    "connection_coefficients",
    "far_point",
]

DEFAULT_ORDER = 48
MAX_HALVINGS = 20
COND_LIMIT = 1e8
# sqrt|lambda| * x_m bound; keeps alpha u_- and beta u_+ from cancelling
MAX_MATCH_PHASE = 2.0
FAR_ACTION = 40.0


class Branch(enum.Enum):
    MINUS = -1
    PLUS = 1


def frobenius_coeffs(nu: float, sign: int, vcoeffs, lams, order: int) -> np.ndarray:
    """Series coefficients for many ``lambda`` at once.

    Returns an array of shape ``(order + 1, len(lams))``.  The recursion is
    ``c_k k (k + sign 2 nu) = sum_{m<=k-2} (v_m - lambda [m=0]) c_{k-2-m}``.
    The ``k = 1`` equation has an empty right side, so ``c_1 = 0`` always;
    at ``nu = 1/2`` this is also what makes the Minus branch well defined.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    v = list(vcoeffs)
    c = np.zeros((order + 1, lams.size))
    c[0] = 1.0
    two_nu = 2.0 * nu * sign
    for k in range(2, order + 1):
        rhs = (v[0] if v else 0.0) * c[k - 2] - lams * c[k - 2]
        for m in range(1, min(len(v), k - 1)):
            if v[m] != 0.0:
                rhs = rhs + v[m] * c[k - 2 - m]
        c[k] = rhs / (k * (k + two_nu))
    return c


def _series_eval(sigma: float, c: np.ndarray, x):
    """psi, dpsi of x^sigma sum_k c_k x^k; ``c`` is (K+1, n), ``x`` broadcast to n."""
    x = np.asarray(x, dtype=float)
    K = c.shape[0] - 1
    p = c[K] * 1.0
    dp = c[K] * (sigma + K)
    for k in range(K - 1, -1, -1):
        p = p * x + c[k]
        dp = dp * x + c[k] * (sigma + k)
    xs = x**sigma
    return xs * p, xs / x * dp


@dataclass(frozen=True)
class FrobeniusBranch:
    """Truncated Frobenius series ``x^sigma sum_{k<=K} c_k x^k`` for one ``lambda``."""

    branch: Branch
    nu: float
    lam: float
    coeffs: np.ndarray = field(repr=False)

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    @property
    def sigma(self) -> float:
        return 0.5 + self.branch.value * self.nu

    def evaluate(self, x):
        p, dp = _series_eval(self.sigma, self.coeffs[:, None], np.atleast_1d(x))
        if np.ndim(x) == 0:
            return float(p[0]), float(dp[0])
        return p, dp

    def truncation(self, x: float) -> float:
        """Relative size of the last two retained terms at ``x``."""
        K = self.order
        c = self.coeffs
        tail = abs(c[K]) * x**K + abs(c[K - 1]) * x ** (K - 1)
        head = abs(float(np.polynomial.polynomial.polyval(x, c)))
        return tail / max(head, 1e-300)

    def recursion_residual(self, vcoeffs) -> float:
        """Largest relative residual of the recursion over all k."""
        c = self.coeffs
        s = self.branch.value
        v = list(vcoeffs)
        worst = 0.0
        for k in range(2, self.order + 1):
            terms = [(v[m] if m < len(v) else 0.0) * c[k - 2 - m] for m in range(k - 1)]
            terms.append(-self.lam * c[k - 2])
            lhs = c[k] * k * (k + 2.0 * s * self.nu)
            scale = max(abs(lhs), max(abs(t) for t in terms), 1e-300)
            worst = max(worst, abs(lhs - math.fsum(terms)) / scale)
        return worst


def _check_resonance(spec: ProblemSpec):
    if abs(spec.nu - 0.5) <= RESONANCE_EPS and not spec.potential.is_zero:
        raise ResonanceError("nu = 1/2 with V != 0 is resonant; no logarithmic branch support")


def frobenius_series(spec: ProblemSpec, lam: float, branch: Branch, order: int = DEFAULT_ORDER) -> FrobeniusBranch:
    """Frobenius coefficients of ``branch`` at spectral parameter ``lam``."""
    _check_resonance(spec)
    if order < 8:
        raise TruncationError(f"series order must be >= 8, got {order}")
    c = frobenius_coeffs(spec.nu, branch.value, spec.potential.coeffs, [lam], order)[:, 0]
    if not np.all(np.isfinite(c)):
        raise SeriesOverflowError(f"Frobenius coefficients overflow before order {order}")
    return FrobeniusBranch(branch, spec.nu, float(lam), c)


@dataclass(frozen=True)
class SolutionSample:
    x: float
    psi: float
    dpsi: float

    def __post_init__(self):
        if not (math.isfinite(self.psi) and math.isfinite(self.dpsi)):
            raise StepUnderflowError(f"non-finite solution value at x={self.x}")


@dataclass(frozen=True)
class ConnectionCoeffs:
    alpha: float
    beta: float
    cond: float
    x_m: float = math.nan

    @property
    def theta(self) -> float:
        """Boundary parameter ``beta / alpha`` of the decomposed solution."""
        return self.beta / self.alpha if self.alpha != 0.0 else math.inf


def seed_at(fb: FrobeniusBranch, x_m: float, tol: float = 1e-9) -> SolutionSample:
    """Evaluate ``fb`` and its derivative at ``x_m``."""
    tr = fb.truncation(x_m)
    if tr >= tol:
        raise TruncationError(f"series truncation {tr:.2e} at x={x_m:g}; shrink x_m or raise the order")
    p, dp = fb.evaluate(x_m)
    return SolutionSample(float(x_m), p, dp)


def _rhs_factory(spec: ProblemSpec, lam: float):
    nu2 = spec.singular_coeff
    v = spec.potential.coeffs

    def rhs(x, y):
        w = nu2 / (x * x) - lam
        acc = 0.0
        for c in reversed(v):
            acc = acc * x + c
        w += acc
        out = np.empty_like(y)
        out[0::2] = y[1::2]
        out[1::2] = w * y[0::2]
        return out

    return rhs


def _solve(spec, lam, y0, x0, x1, rtol, dense=False):
    sol = solve_ivp(
        _rhs_factory(spec, lam),
        (x0, x1),
        np.asarray(y0, dtype=float),
        method="DOP853",
        rtol=rtol,
        atol=1e-300,
        first_step=1e-4 * abs(x1 - x0),
        dense_output=dense,
    )
    if sol.status != 0 or not np.all(np.isfinite(sol.y[:, -1])):
        raise StepUnderflowError(
            f"integration from x={x0:g} to x={x1:g} failed ({sol.message}); "
            "near the origin use a Frobenius seed instead"
        )
    return sol


def integrate(spec: ProblemSpec, lam: float, start: SolutionSample, x_end: float, rtol: float | None = None):
    """Advance ``start`` to ``x_end``.

    Returns
    -------
    sample : SolutionSample
    error : float
        Relative difference against a run with a 100x looser tolerance
        (an upper estimate of the tight run's error).
    """
    if start.x <= 0.0 or x_end <= 0.0:
        raise StepUnderflowError("integration endpoints must be positive")
    rtol = rtol or spec.tolerances.ode_rtol
    y0 = [start.psi, start.dpsi]
    fine = _solve(spec, lam, y0, start.x, x_end, rtol).y[:, -1]
    coarse = _solve(spec, lam, y0, start.x, x_end, min(rtol * 100, 1e-6)).y[:, -1]
    err = float(np.max(np.abs(fine - coarse)) / max(np.max(np.abs(fine)), 1e-300))
    return SolutionSample(float(x_end), float(fine[0]), float(fine[1])), err


def matching_point(spec: ProblemSpec, lam: float, order: int = DEFAULT_ORDER) -> float:
    """Adaptive matching point for the 2x2 Frobenius decomposition.

    Starts at ``0.1 min(1, R)`` and halves until the series truncation is
    below the matching tolerance, the equilibrated 2x2 condition number is
    below 1e8 and ``sqrt|lambda| x_m <= 2``.
    """
    fm = frobenius_series(spec, lam, Branch.MINUS, order)
    fp = frobenius_series(spec, lam, Branch.PLUS, order)
    x = 0.1 * min(1.0, spec.trunc_radius)
    tol = spec.tolerances.match_tol * 1e-3
    for _ in range(MAX_HALVINGS + 1):
        ok_phase = math.sqrt(abs(lam)) * x <= MAX_MATCH_PHASE
        if ok_phase and fm.truncation(x) < tol and fp.truncation(x) < tol:
            if _match_cond(fm, fp, x) < COND_LIMIT:
                return x
        x *= 0.5
    raise ConditioningError(f"no acceptable matching point after {MAX_HALVINGS} halvings (lambda={lam:g})")


def _match_matrix(fm: FrobeniusBranch, fp: FrobeniusBranch, x: float) -> np.ndarray:
    pm, dm = fm.evaluate(x)
    pp, dp = fp.evaluate(x)
    return np.array([[pm, pp], [dm, dp]])


def _match_cond(fm, fp, x) -> float:
    M = _match_matrix(fm, fp, x)
    M = M / np.max(np.abs(M), axis=0, keepdims=True)
    M = M / np.max(np.abs(M), axis=1, keepdims=True)
    return float(np.linalg.cond(M))


class Solution:
    """Callable handle for one solution of ``(A - lambda) psi = 0``.

    On ``[x_lo, x_hi]`` values come from the dense output of the
    integrator; below ``x_lo`` from ``alpha u_- + beta u_+`` when the
    near-origin decomposition is known.
    """

    def __init__(self, spec, lam, dense, cols, x_lo, x_hi, weights=(1.0,), near=None, series=None):
        self.spec = spec
        self.lam = float(lam)
        self._dense = dense
        self._cols = cols
        self._w = tuple(float(w) for w in weights)
        self.x_lo = float(x_lo)
        self.x_hi = float(x_hi)
        self.near = near
        self._series = series

    def values(self, x):
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).ravel()
        psi = np.empty_like(flat)
        dpsi = np.empty_like(flat)
        inside = flat >= self.x_lo * (1 - 1e-14)
        if np.any(flat > self.x_hi * (1 + 1e-12)):
            raise DomainError(f"x beyond the integrated range (x_hi={self.x_hi:g})")
        if np.any(inside):
            y = self._dense(np.clip(flat[inside], self.x_lo, self.x_hi))
            p = sum(w * y[2 * c] for w, c in zip(self._w, self._cols))
            d = sum(w * y[2 * c + 1] for w, c in zip(self._w, self._cols))
            psi[inside] = p
            dpsi[inside] = d
        if np.any(~inside):
            if self.near is None or self._series is None:
                raise DomainError(f"x below the integrated range (x_lo={self.x_lo:g}) and no series form")
            fm, fp = self._series
            a, b = self.near
            pm, dm = fm.evaluate(flat[~inside])
            pp, dp = fp.evaluate(flat[~inside])
            psi[~inside] = a * pm + b * pp
            dpsi[~inside] = a * dm + b * dp
        if x.ndim == 0:
            return float(psi[0]), float(dpsi[0])
        return psi.reshape(x.shape), dpsi.reshape(x.shape)

    def __call__(self, x: float) -> SolutionSample:
        p, d = self.values(float(x))
        return SolutionSample(float(x), p, d)

    def combine(self, other: "Solution", a: float, b: float) -> "Solution":
        """``a * self + b * other`` for two columns of the same integration."""
        if other._dense is not self._dense:
            raise ValueError("can only combine solutions sharing one integration")
        near = None
        if self.near is not None and other.near is not None:
            near = (a * self.near[0] + b * other.near[0], a * self.near[1] + b * other.near[1])
        cols = self._cols + other._cols
        w = tuple(a * x for x in self._w) + tuple(b * x for x in other._w)
        return Solution(self.spec, self.lam, self._dense, cols, self.x_lo, self.x_hi, w, near, self._series)


def _x_hi(spec: ProblemSpec, lam: float) -> float:
    if spec.mode == "halfline":
        return max(far_point(spec, -lam), spec.trunc_radius) if lam < 0 else spec.trunc_radius
    return spec.trunc_radius


@lru_cache(maxsize=256)
def fundamental_pair(spec: ProblemSpec, lam: float, x_hi: float | None = None):
    """Integrated ``(u_-, u_+)`` from ``x_m / 4`` to ``x_hi`` (default: the mode's right end)."""
    x_m = matching_point(spec, lam)
    x_s = 0.25 * x_m
    x_hi = x_hi or _x_hi(spec, lam)
    fm = frobenius_series(spec, lam, Branch.MINUS)
    fp = frobenius_series(spec, lam, Branch.PLUS)
    sm = seed_at(fm, x_s, spec.tolerances.match_tol)
    sp = seed_at(fp, x_s, spec.tolerances.match_tol)
    sol = _solve(spec, lam, [sm.psi, sm.dpsi, sp.psi, sp.dpsi], x_s, x_hi, spec.tolerances.ode_rtol, dense=True)
    um = Solution(spec, lam, sol.sol, (0,), x_s, x_hi, near=(1.0, 0.0), series=(fm, fp))
    up = Solution(spec, lam, sol.sol, (1,), x_s, x_hi, near=(0.0, 1.0), series=(fm, fp))
    return um, up


def solve_L(spec: ProblemSpec, extension: ExtensionParam, lam: float) -> Solution:
    """``u_- + theta u_+`` (finite theta) or ``u_+`` (theta = inf)."""
    um, up = fundamental_pair(spec, float(lam))
    if extension.is_infinite:
        return up
    return um.combine(up, 1.0, extension.theta)


def far_point(spec: ProblemSpec, z: float) -> float:
    """Seeding point for the decaying solution.

    ``c_far / sqrt(z) + far_offset``, capped where the WKB action measured
    from ``R`` reaches ``FAR_ACTION`` (only binds for growing potentials,
    where the uncapped point would overflow the inward integration).
    """
    x_far = spec.far_cutoff / math.sqrt(z) + spec.far_offset
    x0 = spec.trunc_radius
    if x_far <= x0 or spec.potential.is_zero:
        return x_far
    xs = np.linspace(x0, x_far, 4001)
    Q = np.maximum(spec.q(xs) + z, 0.0)
    act = np.concatenate([[0.0], np.cumsum(0.5 * (np.sqrt(Q[1:]) + np.sqrt(Q[:-1])) * np.diff(xs))])
    j = int(np.searchsorted(act, FAR_ACTION))
    return float(xs[min(j, xs.size - 1)])


def _wrap_inward(spec, lam, sol, x_lo, x_hi):
    return Solution(spec, lam, sol.sol, (0,), x_lo, x_hi)


def solve_R_halfline(spec: ProblemSpec, z: float) -> Solution:
    """Solution decaying at infinity for ``lambda = -z``, WKB seeded and integrated inward."""
    if not z > 0:
        raise DomainError(f"z must be positive, got {z!r}")
    lam = -float(z)
    x_far = max(far_point(spec, z), spec.trunc_radius)
    Q = spec.q(x_far) + z
    if Q <= 0.0:
        raise TurningPointError(f"x_far={x_far:g} is not in the decaying region (Q={Q:g})")
    dQ = spec.q_prime(x_far)
    y0 = [1.0, -math.sqrt(Q) - dQ / (4.0 * Q)]
    x_lo = 0.5 * matching_point(spec, lam)
    sol = _solve(spec, lam, y0, x_far, x_lo, spec.tolerances.ode_rtol, dense=True)
    return _attach_near(spec, lam, _wrap_inward(spec, lam, sol, x_lo, x_far))


def solve_R_dirichlet(spec: ProblemSpec, lam: float) -> Solution:
    """Solution with ``(psi, psi') = (0, -1)`` at the wall ``x = R``, integrated inward."""
    lam = float(lam)
    R = spec.trunc_radius
    x_lo = 0.5 * matching_point(spec, lam)
    sol = _solve(spec, lam, [0.0, -1.0], R, x_lo, spec.tolerances.ode_rtol, dense=True)
    return _attach_near(spec, lam, _wrap_inward(spec, lam, sol, x_lo, R))


@lru_cache(maxsize=256)
def solve_R(spec: ProblemSpec, lam: float) -> Solution:
    """Right-hand solution for the spec's mode."""
    if spec.mode == "halfline":
        return solve_R_halfline(spec, -lam)
    return solve_R_dirichlet(spec, lam)


def _attach_near(spec, lam, sol: Solution) -> Solution:
    cc = connection_coefficients(spec, lam, sol)
    fm = frobenius_series(spec, lam, Branch.MINUS)
    fp = frobenius_series(spec, lam, Branch.PLUS)
    return Solution(spec, lam, sol._dense, sol._cols, sol.x_lo, sol.x_hi, sol._w, (cc.alpha, cc.beta), (fm, fp))


def _decompose(fm, fp, x, sample_p, sample_d):
    M = _match_matrix(fm, fp, x)
    ab = np.linalg.solve(M, [sample_p, sample_d])
    return float(ab[0]), float(ab[1])


def connection_coefficients(spec: ProblemSpec, lam: float, sol: Solution, x_m: float | None = None) -> ConnectionCoeffs:
    """Decompose ``sol`` as ``alpha u_- + beta u_+``.

    Matched at ``x_m`` and again at ``x_m / 2``; disagreement beyond the
    matching tolerance (in units of the solution at ``x_m``) raises
    :class:`InstabilityError`.
    """
    lam = float(lam)
    x_m = x_m or matching_point(spec, lam)
    fm = frobenius_series(spec, lam, Branch.MINUS)
    fp = frobenius_series(spec, lam, Branch.PLUS)
    if x_m * 0.5 < sol.x_lo * (1 - 1e-12) and sol.near is None:
        raise DomainError("solution not available down to x_m / 2")
    cond = _match_cond(fm, fp, x_m)
    if cond > COND_LIMIT:
        raise ConditioningError(f"2x2 match condition {cond:.2e} exceeds {COND_LIMIT:.0e}")
    p1, d1 = sol.values(x_m)
    p2, d2 = sol.values(0.5 * x_m)
    a1, b1 = _decompose(fm, fp, x_m, p1, d1)
    a2, b2 = _decompose(fm, fp, 0.5 * x_m, p2, d2)
    s = x_m ** (2.0 * spec.nu)
    scale = max(abs(a1), abs(b1) * s, 1e-300)
    drift = max(abs(a1 - a2), abs(b1 - b2) * s) / scale
    # both matches carry the same integration error; only drift beyond it signals trouble
    limit = max(spec.tolerances.match_tol * 100, 1e3 * spec.tolerances.ode_rtol)
    if drift > limit:
        raise InstabilityError(f"(alpha, beta) moved by {drift:.2e} under x_m halving")
    amp = (abs(a1) * abs(fm.evaluate(x_m)[0]) + abs(b1) * abs(fp.evaluate(x_m)[0])) / max(abs(p1), 1e-300)
    return ConnectionCoeffs(a1, b1, float(cond * amp), float(x_m))
