r"""Discrete spectra on ``[0, R]`` with a Dirichlet wall at ``R``.

Eigenvalues are found by shooting from the origin: ``L_theta`` is seeded
from its Frobenius series and carried to ``R`` by a fourth order Magnus
propagator.  Instead of scanning ``psi(R; lambda)`` for sign changes, the
propagator tracks a Pruefer-type phase ``Theta(lambda)``, monotone in
``lambda`` with ``Theta(lambda_n) = n pi``.  The phase never overflows, so
no separate large-``lambda`` formulation is needed for finite ``theta``.

Each spectrum is computed on two meshes and Richardson extrapolated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._magnus import pruefer_angles
from .errors import InsufficientSpectrumError, MissedRootError, TruncationError, ValidationError
from .model import ExtensionParam, ProblemSpec, potential_minimum
from .singular_ode import _check_resonance, _series_eval, frobenius_coeffs
from .specfun import bessel_j_zeros, gamma, _bessel_j_any

__all__ = [
    "SpectrumResult",
    "MeshPolicy",
    "eigenvalues",
    "pruefer_phase",
    "shooting_function",
    "eigenvalues_calogero",
    "bessel_eigenvalues",
    "weyl_count",
]

SEED_ORDER = 60
SEED_PHASE = 2.0
REFINE_RTOL = 1e-13


@dataclass(frozen=True)
class MeshPolicy:
    """Propagation mesh: geometric steps ``rho x`` capped at ``h_max``."""

    rho: float = 0.05
    h_max: float = 0.004
    k_factor: float = 0.8

    def halved(self) -> "MeshPolicy":
        return MeshPolicy(self.rho / 2, self.h_max / 2, self.k_factor / 2)


@dataclass(frozen=True)
class SpectrumResult:
    """Eigenvalues of one extension below a cutoff."""

    extension: ExtensionParam
    eigenvalues: np.ndarray
    lambda_max: float
    residuals: np.ndarray = field(repr=False)
    error_estimates: np.ndarray = field(repr=False)

    def __len__(self):
        return int(self.eigenvalues.size)

    def __getitem__(self, i):
        return self.eigenvalues[i]


def _mesh(x0: float, R: float, rho: float, hmax: float) -> np.ndarray:
    x_geo_end = min(hmax / rho, R)
    n_geo = max(1, int(math.ceil(math.log(x_geo_end / x0) / math.log1p(rho)))) if x_geo_end > x0 else 0
    geo = x0 * (1 + rho) ** np.arange(n_geo + 1)
    geo = geo[geo < x_geo_end]
    start = geo[-1] if geo.size else x0
    n_uni = max(1, int(math.ceil((R - start) / hmax)))
    uni = np.linspace(start, R, n_uni + 1)
    return np.concatenate([geo[:-1], uni]) if geo.size else uni


class _Shooter:
    """Vectorized ``Theta(lambda)`` for one extension and one mesh."""

    def __init__(self, spec: ProblemSpec, ext: ExtensionParam, mesh: MeshPolicy, lam_abs_max: float):
        _check_resonance(spec)
        self.spec = spec
        self.ext = ext
        R = spec.trunc_radius
        self.R = R
        self.x_top = 0.5 * min(1.0, R)
        x_min = min(self.x_top, SEED_PHASE / math.sqrt(max(lam_abs_max, 1e-300)))
        # the local wavenumber is set by |lambda - V|, so a tall wall needs steps as fine as a high level
        v_span = float(np.max(np.abs(spec.potential(np.linspace(0.0, R, 257))))) if spec.potential.coeffs else 0.0
        hmax = min(mesh.h_max, mesh.k_factor / math.sqrt(max(lam_abs_max + v_span, 1.0)))
        self.xs = _mesh(x_min, R, mesh.rho, hmax)
        h = np.diff(self.xs)
        g = math.sqrt(3.0) / 6.0
        xa = self.xs[:-1] + h * (0.5 - g)
        xb = self.xs[:-1] + h * (0.5 + g)
        self.qa = spec.q(xa)
        self.qb = spec.q(xb)

    def seed(self, lams):
        x_l = np.minimum(self.x_top, SEED_PHASE / np.sqrt(np.abs(lams) + 1e-300))
        j0 = np.searchsorted(self.xs, x_l, side="right") - 1
        j0 = np.clip(j0, 0, self.xs.size - 2)
        x0 = self.xs[j0]
        nu = self.spec.nu
        v = self.spec.potential.coeffs
        cp = frobenius_coeffs(nu, 1, v, lams, SEED_ORDER)
        pp, dp = _series_eval(0.5 + nu, cp, x0)
        tail = np.abs(cp[-1]) * x0**SEED_ORDER + np.abs(cp[-2]) * x0 ** (SEED_ORDER - 1)
        if self.ext.is_infinite:
            p0, d0 = pp, dp
        else:
            cm = frobenius_coeffs(nu, -1, v, lams, SEED_ORDER)
            pm, dm = _series_eval(0.5 - nu, cm, x0)
            tail = tail + np.abs(cm[-1]) * x0**SEED_ORDER
            th = self.ext.theta
            p0, d0 = pm + th * pp, dm + th * dp
        # series sums are O(1) for sqrt|lambda| x0 <= 2 (c_0 = 1)
        if np.any(tail > 1e-13):
            raise TruncationError("Frobenius seed not converged; shrink the seed point")
        return j0.astype(np.int64), p0, d0

    def theta(self, lams) -> np.ndarray:
        lams = np.ascontiguousarray(np.atleast_1d(np.asarray(lams, dtype=float)))
        j0, p0, d0 = self.seed(lams)
        ks = np.sqrt(np.abs(lams) + (math.pi / self.R) ** 2)
        out = np.empty(lams.size)
        pruefer_angles(lams, ks, j0, p0, d0, self.xs, self.qa, self.qb, out)
        return out


def _illinois(f, n, lo, hi):
    """Vectorized Illinois iteration for the monotone ``f(lam, n) = 0``."""
    lo = lo.copy()
    hi = hi.copy()
    flo = f(lo, n)
    fhi = f(hi, n)
    if np.any(flo > 0) or np.any(fhi < 0):
        raise MissedRootError("bracket does not enclose the requested phase")
    side = np.zeros(n.size)
    mid = 0.5 * (lo + hi)
    act = np.arange(n.size)
    for _ in range(200):
        if not act.size:
            break
        den = fhi[act] - flo[act]
        m = np.where(den > 0, (lo[act] * fhi[act] - hi[act] * flo[act]) / np.where(den > 0, den, 1.0), 0.5 * (lo[act] + hi[act]))
        fm = f(m, n[act])
        mid[act] = m
        left = fm < 0
        lo[act] = np.where(left, m, lo[act])
        hi[act] = np.where(left, hi[act], m)
        fhi[act] = np.where(left, np.where(side[act] == -1, 0.5 * fhi[act], fhi[act]), fm)
        flo[act] = np.where(left, fm, np.where(side[act] == 1, 0.5 * flo[act], flo[act]))
        side[act] = np.where(left, -1, 1)
        done = (np.abs(fm) < 1e-13 * np.maximum(1.0, n[act])) | (
            hi[act] - lo[act] < REFINE_RTOL * np.maximum(np.abs(m), 1e-3)
        )
        act = act[~done]
    if act.size:
        raise MissedRootError(f"{act.size} roots failed to converge")
    return mid


def weyl_count(spec: ProblemSpec, lam: float) -> float:
    """Semiclassical count ``(1/pi) int_0^R sqrt(lam - V)_+ dx``."""
    xs = np.linspace(0.0, spec.trunc_radius, 4001)
    v = np.maximum(lam - spec.potential(xs) if not spec.potential.is_zero else lam + 0 * xs, 0.0)
    return float(np.trapezoid(np.sqrt(v), xs) / math.pi)


def _lower_bound(spec: ProblemSpec, ext: ExtensionParam, mesh: MeshPolicy, probe: float):
    """Push ``lo`` down until no eigenvalue lies below it; returns ``(lo, shooter)``."""
    lo = potential_minimum(spec.potential, spec.trunc_radius) - 1.0
    for _ in range(60):
        sh = _Shooter(spec, ext, mesh, max(probe, abs(lo)))
        if sh.theta([lo])[0] < math.pi:
            return lo, sh
        lo = 4.0 * lo
    raise MissedRootError("could not find a lower spectral bound")


def _solve_mesh(spec, ext, lambda_max, lam_min, mesh):
    if lam_min is None:
        lo, sh = _lower_bound(spec, ext, mesh, abs(lambda_max))
    else:
        lo = float(lam_min)
        sh = _Shooter(spec, ext, mesh, max(abs(lambda_max), abs(lo)))
    th_max = sh.theta([lambda_max])[0]
    ngrid = int(2 * th_max / math.pi) + 16
    grid = np.linspace(lo, lambda_max, ngrid)
    th = sh.theta(grid)
    # the fractional part depends on the lambda-dependent Pruefer scale; only the node count must be monotone
    if np.any(np.diff(np.floor(th / math.pi)) < 0):
        raise MissedRootError("node count is not monotone in lambda; refine the mesh")
    th = np.maximum.accumulate(th)
    n_lo = int(math.floor(th[0] / math.pi)) + 1
    n_hi = int(math.floor(th[-1] / math.pi))
    if th[-1] / math.pi - n_hi < 1e-9:
        n_hi -= 1
    n = np.arange(n_lo, n_hi + 1)
    if not n.size:
        return n, np.empty(0), sh
    idx = np.clip(np.searchsorted(th, n * math.pi), 1, grid.size - 1)
    f = lambda lam, nn: sh.theta(lam) - nn * math.pi  # noqa: E731
    lam = _illinois(f, n.astype(float), grid[idx - 1], grid[idx])
    return n, lam, sh


def eigenvalues(
    spec: ProblemSpec,
    extension: ExtensionParam,
    lambda_max: float,
    lambda_min: float | None = None,
    mesh: MeshPolicy | None = None,
    extrapolate: bool = True,
) -> SpectrumResult:
    """All eigenvalues of the extension in ``[lambda_min, lambda_max]``.

    Parameters
    ----------
    lambda_min
        Lower end of the search window; by default it is pushed down until
        no eigenvalue lies below it.
    extrapolate
        Richardson-combine results on a mesh and its halving; the
        difference is reported as the per-level error estimate.
    """
    mesh = mesh or MeshPolicy()
    if lambda_min is not None and lambda_min >= lambda_max:
        raise ValidationError("lambda_min must be below lambda_max")
    n1, lam1, sh = _solve_mesh(spec, extension, lambda_max, lambda_min, mesh)
    if extrapolate:
        n2, lam2, sh = _solve_mesh(spec, extension, lambda_max, lambda_min, mesh.halved())
        # a root within the mesh error of the cutoff may appear on one mesh only
        common = np.intersect1d(n1, n2)
        lam1 = lam1[np.isin(n1, common)]
        lam2 = lam2[np.isin(n2, common)]
        n1 = common
        lam = (16.0 * lam2 - lam1) / 15.0
        err = np.abs(lam2 - lam1) / 15.0
    else:
        lam = lam1
        err = np.full(lam.size, np.nan)
    keep = lam <= lambda_max
    lam, err, n1 = lam[keep], err[keep], n1[keep]
    resid = np.abs(sh.theta(lam) - n1 * math.pi) if lam.size else np.empty(0)
    if lam.size > 1 and np.any(np.diff(lam) <= 0):
        raise MissedRootError("eigenvalues not strictly ascending")
    w = weyl_count(spec, lambda_max)
    if lambda_min is None and abs(lam.size - w) > 2 + 0.05 * w + 1:
        raise MissedRootError(f"found {lam.size} eigenvalues, Weyl estimate {w:.1f}")
    return SpectrumResult(extension, lam, float(lambda_max), resid, err)


def pruefer_phase(spec: ProblemSpec, extension: ExtensionParam, lams, mesh: MeshPolicy | None = None) -> np.ndarray:
    """``Theta(lambda)``; ``floor(Theta / pi)`` counts eigenvalues below ``lambda``."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    sh = _Shooter(spec, extension, mesh or MeshPolicy(), float(np.max(np.abs(lams))))
    return sh.theta(lams)


def shooting_function(spec: ProblemSpec, extension: ExtensionParam, lam: float) -> float:
    """``psi_L(R; lambda)`` with the series normalization of ``L_theta``."""
    from .singular_ode import solve_L

    s = spec if spec.mode == "dirichlet" else _dirichlet(spec)
    return solve_L(s, extension, float(lam))(s.trunc_radius).psi


def _dirichlet(spec):
    from dataclasses import replace

    return replace(spec, mode="dirichlet")


def eigenvalues_calogero(nu: float, branch: str, count: int) -> np.ndarray:
    """Closed-form ladder of ``-d^2 + (nu^2 - 1/4)/x^2 + x^2`` on the half-line.

    ``branch`` is ``"theta_infinity"`` (``4n + 2 + 2nu``) or
    ``"theta_zero"`` (``4n + 2 - 2nu``).
    """
    n = np.arange(int(count), dtype=float)
    if branch == "theta_infinity":
        return 4 * n + 2 + 2 * nu
    if branch == "theta_zero":
        return 4 * n + 2 - 2 * nu
    raise ValidationError(f"branch must be theta_zero or theta_infinity, got {branch!r}")


def bessel_eigenvalues(nu: float, extension: ExtensionParam, R: float, count: int) -> np.ndarray:
    """Positive eigenvalues for ``V = 0`` on ``[0, R]`` from Bessel functions.

    Friedrichs: ``(j_{nu,n} / R)^2``.  Finite ``theta``: roots ``k^2`` of
    ``J_{-nu}(kR) + theta (2/k)^{2nu} Gamma(1+nu)/Gamma(1-nu) J_nu(kR)``.
    Negative eigenvalues (possible for ``theta < 0``) are not returned.
    """
    if extension.is_infinite:
        return (np.asarray(bessel_j_zeros(nu, count)) / R) ** 2
    th = extension.theta
    if th == 0.0:
        return (np.asarray(bessel_j_zeros(-nu, count)) / R) ** 2
    c = th * 2 ** (2 * nu) * gamma(1 + nu) / gamma(1 - nu)

    def g(k):
        # multiplied by k^nu to stay finite as k -> 0
        return k**nu * _bessel_j_any(-nu, k * R) + c * k ** (-nu) * _bessel_j_any(nu, k * R)

    out = []
    step = math.pi / (8.0 * R)
    k0 = 1e-6 / R
    g0 = g(k0)
    while len(out) < count:
        k1 = k0 + step
        g1 = g(k1)
        if g0 * g1 < 0:
            out.append(brentq(g, k0, k1, xtol=1e-15, rtol=1e-15))
        elif g1 == 0.0:
            out.append(k1)
        k0, g0 = k1, g1
    return np.asarray(out) ** 2


def required_lambda_max(t_min: float) -> float:
    """Cutoff giving ``exp(-lambda_max t_min) <= exp(-40)``."""
    if t_min <= 0:
        raise InsufficientSpectrumError("t_min must be positive")
    return 40.0 / t_min
