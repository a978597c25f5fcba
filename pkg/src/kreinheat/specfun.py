r"""Special functions for real order and positive real argument.

Gamma, the Bessel functions :math:`J_\nu`, :math:`I_\nu`, :math:`K_\nu`
for :math:`|\nu| < 1` and the positive zeros of :math:`J_\nu`.

The ascending series are summed with :func:`math.fsum`; downstream
connection-coefficient work is cancellation-sensitive, so the series must
not add rounding noise of its own.  ``J`` switches from the ascending
series to the Hankel expansion at ``x = 12``; both branches are exposed
privately so the seam can be tested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .errors import DomainError, PoleError, ValidationError

__all__ = [
    "FnAccuracy",
    "gamma",
    "bessel_j",
    "bessel_i",
    "bessel_k",
    "bessel_i_prime",
    "bessel_k_prime",
    "bessel_j_zeros",
    "mcmahon_zero",
]

J_SWITCH = 12.0
I_SWITCH = 25.0
K_SWITCH = 2.0

_MAX_TERMS = 500


@dataclass(frozen=True)
class FnAccuracy:
    """Relative accuracy requested from special-function evaluations."""

    rel_tol: float = 1e-12

    def __post_init__(self):
        if not (0.0 < self.rel_tol < 1e-6):
            raise ValidationError(f"rel_tol must lie in (0, 1e-6), got {self.rel_tol!r}")


DEFAULT_ACCURACY = FnAccuracy()


def _is_nonpositive_integer(x: float) -> bool:
    return x <= 0.0 and x == math.floor(x)


def gamma(x: float) -> float:
    """Gamma function for real ``x`` away from the poles.

    Uses the reflection formula below 1/2 and :func:`math.gamma` above.
    """
    x = float(x)
    if _is_nonpositive_integer(x):
        raise PoleError(f"gamma has a pole at x={x!r}")
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * math.gamma(1.0 - x))
    return math.gamma(x)


def _check_order(order: float, lo: float, hi: float, name: str) -> float:
    order = float(order)
    if not (lo < order < hi):
        raise DomainError(f"{name}: order {order!r} outside ({lo}, {hi})")
    return order


def _check_arg(x: float, name: str) -> float:
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"{name}: argument must be positive, got {x!r}")
    return x


def _hankel_coeffs(order: float, n: int) -> list[float]:
    """a_k(order) = prod_{j<=k} (4 order^2 - (2j-1)^2) / (k! 8^k)."""
    mu = 4.0 * order * order
    out = [1.0]
    for k in range(1, n):
        out.append(out[-1] * (mu - (2 * k - 1) ** 2) / (k * 8.0))
    return out


def _ascending(order: float, x: float, sign: float) -> float:
    """sum_k sign^k (x/2)^(2k+order) / (k! Gamma(k+order+1))."""
    half = 0.5 * x
    term = half**order / gamma(order + 1.0)
    q = sign * half * half
    terms = [term]
    biggest = abs(term)
    for k in range(1, _MAX_TERMS):
        term *= q / (k * (k + order))
        terms.append(term)
        biggest = max(biggest, abs(term))
        if abs(term) < 1e-18 * biggest and k > half:
            break
    return math.fsum(terms)


def _bessel_j_series(order: float, x: float) -> float:
    return _ascending(order, x, -1.0)


def _bessel_j_asymptotic(order: float, x: float) -> float:
    a = _hankel_coeffs(order, 60)
    p_terms, q_terms = [], []
    prev = math.inf
    for k in range(len(a)):
        t = a[k] / x**k
        if abs(t) > prev:
            break
        prev = abs(t)
        sgn = -1.0 if (k // 2) % 2 else 1.0
        (p_terms if k % 2 == 0 else q_terms).append(sgn * t)
        if abs(t) < 1e-18:
            break
    p = math.fsum(p_terms)
    q = math.fsum(q_terms)
    w = x - (0.5 * order + 0.25) * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(w) - q * math.sin(w))


def _bessel_j_any(order: float, x: float) -> float:
    # no order-range check; the recurrence test needs orders up to 2
    if x < J_SWITCH:
        return _bessel_j_series(order, x)
    return _bessel_j_asymptotic(order, x)


def bessel_j(order: float, x: float) -> float:
    """Bessel function of the first kind, ``|order| < 1``, ``x > 0``."""
    order = _check_order(order, -1.0, 1.0, "bessel_j")
    x = _check_arg(x, "bessel_j")
    return _bessel_j_any(order, x)


def _bessel_i_series(order: float, x: float) -> float:
    return _ascending(order, x, 1.0)


def _bessel_i_asymptotic(order: float, x: float) -> float:
    a = _hankel_coeffs(order, 80)
    terms = []
    prev = math.inf
    for k in range(len(a)):
        t = a[k] / x**k
        if abs(t) > prev:
            break
        prev = abs(t)
        terms.append(t if k % 2 == 0 else -t)
        if abs(t) < 1e-18:
            break
    return math.exp(x) / math.sqrt(2.0 * math.pi * x) * math.fsum(terms)


def _bessel_i_any(order: float, x: float) -> float:
    if x < I_SWITCH:
        return _bessel_i_series(order, x)
    return _bessel_i_asymptotic(order, x)


def bessel_i(order: float, x: float) -> float:
    """Modified Bessel function of the first kind, ``|order| < 1``, ``x > 0``."""
    order = _check_order(order, -1.0, 1.0, "bessel_i")
    x = _check_arg(x, "bessel_i")
    return _bessel_i_any(order, x)


def _steed_k(mu: float, x: float) -> tuple[float, float]:
    """K_mu(x), K_{mu+1}(x) for |mu| <= 1/2, x >= 2 (Steed's continued fraction)."""
    mu2 = mu * mu
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25 - mu2
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 10000):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < 1e-17:
            break
    h = a1 * h
    kmu = math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) / s
    kmu1 = kmu * (mu + x + 0.5 - h) / x
    return kmu, kmu1


def _bessel_k_any(order: float, x: float) -> float:
    order = abs(order)
    if order == 0.0 and x <= K_SWITCH:
        raise DomainError("order 0 is not supported by the reflection formula")
    if x <= K_SWITCH:
        return math.pi / (2.0 * math.sin(order * math.pi)) * (
            _bessel_i_series(-order, x) - _bessel_i_series(order, x)
        )
    if order <= 0.5:
        return _steed_k(order, x)[0]
    return _steed_k(order - 1.0, x)[1]


def bessel_k(order: float, x: float) -> float:
    """Modified Bessel function of the second kind, ``0 < order < 1``, ``x > 0``.

    For ``x <= 2`` this is ``pi / (2 sin(order pi)) (I_{-order} - I_order)``;
    beyond, the difference loses ``e^{2x}`` to cancellation and Steed's
    continued fraction is used instead.
    """
    order = _check_order(order, 0.0, 1.0, "bessel_k")
    x = _check_arg(x, "bessel_k")
    return _bessel_k_any(order, x)


def bessel_i_prime(order: float, x: float) -> float:
    """Derivative of ``I_order`` via ``I_{order+1} + (order/x) I_order``."""
    order = _check_order(order, -1.0, 1.0, "bessel_i_prime")
    x = _check_arg(x, "bessel_i_prime")
    return _bessel_i_any(order + 1.0, x) + order / x * _bessel_i_any(order, x)


def bessel_k_prime(order: float, x: float) -> float:
    """Derivative of ``K_order`` via ``-K_{1-order} - (order/x) K_order``."""
    order = _check_order(order, 0.0, 1.0, "bessel_k_prime")
    x = _check_arg(x, "bessel_k_prime")
    return -_bessel_k_any(1.0 - order, x) - order / x * _bessel_k_any(order, x)


def mcmahon_zero(order: float, n: int) -> float:
    """McMahon's large-n approximation to the n-th positive zero of J_order."""
    mu = 4.0 * order * order
    b = (n + 0.5 * order - 0.25) * math.pi
    e = 8.0 * b
    return b - (mu - 1.0) / e - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * e**3)


def bessel_j_zeros(order: float, count: int, accuracy: FnAccuracy | None = None) -> list[float]:
    """First ``count`` positive zeros of ``J_order`` in ascending order."""
    order = _check_order(order, -1.0, 1.0, "bessel_j_zeros")
    if int(count) != count or count < 1:
        raise ValidationError(f"count must be a positive integer, got {count!r}")
    acc = accuracy or DEFAULT_ACCURACY
    rtol = max(1e-3 * acc.rel_tol, 4.0 * 2.2e-16)
    f = lambda x: _bessel_j_any(order, x)  # noqa: E731

    zeros: list[float] = []
    lo = 1e-8
    for n in range(1, int(count) + 1):
        a = b = None
        if n >= 3:
            g = mcmahon_zero(order, n)
            if g - 0.5 > zeros[-1] and f(g - 0.5) * f(g + 0.5) < 0.0:
                a, b = g - 0.5, g + 0.5
        if a is None:
            step = 0.05 if n == 1 else 0.25
            x0, f0 = lo, f(lo)
            while True:
                x1 = x0 + step
                f1 = f(x1)
                if f0 * f1 < 0.0:
                    a, b = x0, x1
                    break
                x0, f0 = x1, f1
        root = brentq(f, a, b, xtol=1e-300, rtol=rtol, maxiter=200)
        zeros.append(root)
        lo = root + 1e-3
    return zeros
