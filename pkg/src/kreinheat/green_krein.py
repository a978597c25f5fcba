r"""Resolvent kernels, the Krein function and resolvent-trace differences.

For an extension with boundary parameter ``theta`` the resolvent kernel is

.. math:: G_\theta(x, x', \lambda) = -\frac{L_\theta(x_<) R(x_>)}{W(L_\theta, R)},

and kernels of different extensions are tied together by

.. math:: G_\theta - G_\infty = \frac{G_0 - G_\infty}{1 + \theta K(\lambda)},
          \qquad K = -\alpha / \beta,

where ``R = alpha u_- + beta u_+`` near the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import EigenvalueCollisionError, KreinPoleError, QuadratureError, DomainError
from .model import INFINITY, ExtensionParam, ProblemSpec
from .singular_ode import Branch, frobenius_series, matching_point, solve_L, solve_R

__all__ = [
    "GreenKernel",
    "green_kernel",
    "green",
    "krein_K",
    "krein_residual",
    "resolvent_trace_diff",
]

COLLISION_EPS = 1e-12
QUAD_RTOL = 1e-10


@dataclass(frozen=True)
class GreenKernel:
    """Resolvent kernel of one extension at one ``lambda``."""

    spec: ProblemSpec
    extension: ExtensionParam
    lam: float
    L: object
    R: object
    W: float

    def __call__(self, x, x_prime):
        x = np.asarray(x, dtype=float)
        xp = np.asarray(x_prime, dtype=float)
        lo = np.minimum(x, xp)
        hi = np.maximum(x, xp)
        out = -self.L.values(lo)[0] * self.R.values(hi)[0] / self.W
        return float(out) if np.ndim(out) == 0 else out

    def diagonal(self, x):
        x = np.asarray(x, dtype=float)
        return -self.L.values(x)[0] * self.R.values(x)[0] / self.W


def _wronskian(L, R, x: float) -> tuple[float, float]:
    lp, ld = L.values(x)
    rp, rd = R.values(x)
    w = lp * rd - ld * rp
    scale = abs(lp * rd) + abs(ld * rp)
    return w, scale


@lru_cache(maxsize=512)
def green_kernel(spec: ProblemSpec, extension: ExtensionParam, lam: float) -> GreenKernel:
    """Build (and cache) the kernel of ``extension`` at ``lam``."""
    lam = float(lam)
    L = solve_L(spec, extension, lam)
    R = solve_R(spec, lam)
    x_ref = matching_point(spec, lam)
    W, scale = _wronskian(L, R, x_ref)
    if abs(W) <= COLLISION_EPS * scale:
        raise EigenvalueCollisionError(f"lambda={lam:g} is (numerically) an eigenvalue of theta={extension}")
    return GreenKernel(spec, extension, lam, L, R, W)


def green(spec: ProblemSpec, extension: ExtensionParam, lam: float, x, x_prime):
    """``G_theta(x, x', lambda)``; symmetric by construction."""
    return green_kernel(spec, extension, float(lam))(x, x_prime)


def krein_K(spec: ProblemSpec, z: float, mode: str | None = None) -> float:
    """Krein function ``K(-z) = -alpha / beta`` of the right-hand solution.

    ``mode`` overrides the spec's mode (``"halfline"`` or ``"dirichlet"``).
    """
    if not z > 0:
        raise DomainError(f"z must be positive, got {z!r}")
    if mode is not None and mode != spec.mode:
        spec = replace(spec, mode=mode)
    R = solve_R(spec, -float(z))
    alpha, beta = R.near
    # beta below the integration noise, measured against alpha at the matching point
    pole_tol = 100.0 * spec.tolerances.ode_rtol
    if abs(beta) <= pole_tol * abs(alpha) * matching_point(spec, -float(z)) ** (-2 * spec.nu):
        raise KreinPoleError(f"beta vanishes at z={z:g}: -z is an eigenvalue of the theta = 0 extension")
    return -alpha / beta


def krein_residual(spec: ProblemSpec, theta: float, lam: float, x: float, x_prime: float, _corrupt_K: float = 1.0) -> float:
    """Relative defect of ``G_theta - G_inf = (G_0 - G_inf) / (1 + theta K)``.

    ``_corrupt_K`` scales ``K`` before use; a test hook that must make
    the residual visible.
    """
    lam = float(lam)
    g_t = green(spec, ExtensionParam(theta), lam, x, x_prime)
    g_0 = green(spec, ExtensionParam(0.0), lam, x, x_prime)
    g_i = green(spec, INFINITY, lam, x, x_prime)
    alpha, beta = solve_R(spec, lam).near
    K = -alpha / beta * _corrupt_K
    denom = 1.0 + theta * K
    if denom == 0.0:
        raise KreinPoleError(f"1 + theta K vanishes at lambda={lam:g}")
    res = (g_t - g_i) - (g_0 - g_i) / denom
    return float(res / max(abs(g_t), abs(g_i), 1e-300))


def _series_product_integral(fa, fb, x_c: float) -> float:
    """Exact integral over ``[0, x_c]`` of the product of two truncated series."""
    prod = np.convolve(fa.coeffs, fb.coeffs)
    s = fa.sigma + fb.sigma
    k = np.arange(prod.size)
    e = s + k + 1.0
    return math.fsum(prod * x_c**e / e)


def _gauss_cells(a: float, b: float, h0: float, hmax: float) -> np.ndarray:
    edges = [a]
    while edges[-1] < b * (1 - 1e-14):
        h = min(max(h0, 0.5 * edges[-1]), hmax)
        edges.append(min(edges[-1] + h, b))
    return np.asarray(edges)


def _composite(f, edges: np.ndarray, npts: int) -> float:
    t, w = np.polynomial.legendre.leggauss(npts)
    lo, hi = edges[:-1, None], edges[1:, None]
    x = 0.5 * (hi - lo) * t[None, :] + 0.5 * (hi + lo)
    vals = f(x.ravel()).reshape(x.shape)
    return float(np.sum(0.5 * (hi - lo) * w[None, :] * vals))


def _direct_trace(spec: ProblemSpec, extension: ExtensionParam, z: float) -> float:
    lam = -float(z)
    g_t = green_kernel(spec, extension, lam)
    g_i = green_kernel(spec, INFINITY, lam)
    x_c = matching_point(spec, lam)
    x_end = g_t.R.x_hi

    # first cell: series products integrated exactly
    fm = frobenius_series(spec, lam, Branch.MINUS)
    fp = frobenius_series(spec, lam, Branch.PLUS)
    a, b = g_t.R.near
    th = extension.theta
    I = {
        ("m", "m"): _series_product_integral(fm, fm, x_c),
        ("m", "p"): _series_product_integral(fm, fp, x_c),
        ("p", "p"): _series_product_integral(fp, fp, x_c),
    }
    int_LtR = a * I["m", "m"] + b * I["m", "p"] + th * (a * I["m", "p"] + b * I["p", "p"])
    int_LiR = a * I["m", "p"] + b * I["p", "p"]
    head = -int_LtR / g_t.W + int_LiR / g_i.W

    def integrand(x):
        return g_t.diagonal(x) - g_i.diagonal(x)

    hmax = min(0.25 / math.sqrt(z), 0.05 * max(x_end, 1.0))
    edges = _gauss_cells(x_c, x_end, 0.5 * x_c, hmax)
    body16 = _composite(integrand, edges, 16)
    body24 = _composite(integrand, edges, 24)
    total = head + body24
    if abs(body24 - body16) > QUAD_RTOL * abs(total) + 1e-15:
        raise QuadratureError(f"diagonal quadrature not converged at z={z:g}: {abs(body24 - body16):.2e}")
    return total


def resolvent_trace_diff(spec: ProblemSpec, extension: ExtensionParam, z: float, route: str = "direct") -> float:
    r"""``Tr[(A^theta + z)^{-1} - (A^inf + z)^{-1}]``.

    Parameters
    ----------
    route
        ``"direct"`` integrates the kernel difference along the diagonal;
        ``"krein"`` divides the ``theta = 0`` trace by ``1 + theta K(-z)``.
        Both must agree to quadrature accuracy.
    """
    if not z > 0:
        raise DomainError(f"z must be positive, got {z!r}")
    if extension.is_infinite:
        return 0.0
    if route == "direct":
        return _direct_trace(spec, extension, float(z))
    if route == "krein":
        base = _direct_trace(spec, ExtensionParam(0.0), float(z))
        alpha, beta = solve_R(spec, -float(z)).near
        denom = 1.0 + extension.theta * (-alpha / beta)
        if denom == 0.0:
            raise KreinPoleError(f"1 + theta K vanishes at z={z:g}")
        return base / denom
    raise ValueError(f"unknown route {route!r}")
