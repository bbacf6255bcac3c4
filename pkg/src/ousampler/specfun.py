"""Scalar special-function kernel.

Hosts the error functions, the threshold map G and its inverse, the
hypergeometric series 2F2(1,1;3/2,2;x) that the mean hitting-time and
mean accumulated-error functionals R1/R2 are built from, and the piecewise
value function of the optimal-stopping free boundary.

All functions are pure, deterministic and thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InputError, PrecisionError, RangeError

__all__ = [
    "SeriesControl",
    "DEFAULT_SERIES",
    "erf",
    "erfi",
    "g_fn",
    "g_inv",
    "hyp2f2_special",
    "r1",
    "r1_prime",
    "r2",
    "value_function_h",
]

_SQRT_PI = math.sqrt(math.pi)
_HALF_SQRT_PI = 0.5 * _SQRT_PI
# exp(x) overflows float64 just above this argument
_EXP_ARG_MAX = 709.0
# largest x with representable exp(x**2)
_GAUSS_ARG_MAX = math.sqrt(_EXP_ARG_MAX)
# beyond this the direct series for 2F2 is abandoned for quadrature
_SERIES_ARG_MAX = 30.0


@dataclass(frozen=True)
class SeriesControl:
    """Convergence knobs shared by the series and inverse iterations."""

    rel_tol: float = 1e-12
    max_terms: int = 500

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-3):
            raise InputError(f"rel_tol must lie in (0, 1e-3], got {self.rel_tol}")
        if self.max_terms < 10:
            raise InputError(f"max_terms must be >= 10, got {self.max_terms}")


DEFAULT_SERIES = SeriesControl()


def _check_finite(name: str, x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise InputError(f"{name} must be finite, got {x}")
    return x


def erf(x: float) -> float:
    """Error function, odd, with range (-1, 1)."""
    return math.erf(_check_finite("x", x))


def erfi(x: float) -> float:
    """Imaginary error function (2/sqrt(pi)) * integral of exp(t^2) on [0, x].

    Small arguments use the Maclaurin series (all terms positive, no
    cancellation); large ones the asymptotic expansion exp(x^2)/(sqrt(pi) x).
    """
    x = _check_finite("x", x)
    ax = abs(x)
    if ax == 0.0:
        return 0.0
    u = ax * ax
    if u > _EXP_ARG_MAX:
        raise RangeError(f"erfi({x}) overflows float64")
    if ax <= 8.0:
        # sum_{n>=0} x^(2n+1) / (n! (2n+1))
        term = ax
        total = ax
        n = 0
        while True:
            n += 1
            term *= u / n
            piece = term / (2 * n + 1)
            total += piece
            if piece <= 1e-17 * total:
                break
        val = 2.0 / _SQRT_PI * total
    else:
        # exp(x^2)/(sqrt(pi) x) * sum_k (2k-1)!! / (2 x^2)^k, truncated at the
        # smallest term (the expansion is asymptotic)
        term = 1.0
        total = 1.0
        k = 0
        while True:
            k += 1
            nxt = term * (2 * k - 1) / (2.0 * u)
            if nxt >= term or nxt <= 1e-17 * total:
                break
            term = nxt
            total += term
        val = math.exp(u) / (_SQRT_PI * ax) * total
    return math.copysign(val, x)


def g_fn(x: float) -> float:
    """The threshold map G(x) = exp(x^2) sqrt(pi)/2 erf(x) / x on [0, inf).

    G(0) = 1 by continuity; G is strictly increasing and unbounded.
    """
    x = _check_finite("x", x)
    if x < 0.0:
        raise DomainError(f"g_fn requires x >= 0, got {x}")
    if x < 0.5:
        # G(x) = sum_n x^(2n) / (3/2)_n; exact at 0 and cancellation-free
        u = x * x
        term = 1.0
        total = 1.0
        n = 0
        while term > 1e-17 * total:
            term *= u / (n + 1.5)
            total += term
            n += 1
        return total
    if x > _GAUSS_ARG_MAX:
        raise RangeError(f"g_fn({x}) overflows float64")
    return math.exp(x * x) * _HALF_SQRT_PI * math.erf(x) / x


def _g_fn_prime(x: float) -> float:
    # G'(x) = G(x) (2x - 1/x) + 1/x for x > 0; that form cancels near 0, so
    # use the series derivative sum_{n>=1} 2n x^(2n-1) / (3/2)_n there
    if x < 0.25:
        if x == 0.0:
            return 0.0
        u = x * x
        term = 1.0
        total = 0.0
        n = 0
        while True:
            n += 1
            term *= u / (n + 0.5)
            piece = 2.0 * n * term / x
            total += piece
            if piece <= 1e-16 * total:
                return total
    return g_fn(x) * (2.0 * x - 1.0 / x) + 1.0 / x


def g_inv(y: float, ctl: SeriesControl = DEFAULT_SERIES) -> float:
    """Inverse of :func:`g_fn` on [1, inf): returns x >= 0 with G(x) = y.

    Brackets the root by doubling (G is strictly increasing and unbounded)
    and polishes with Newton steps safeguarded by bisection.
    """
    y = _check_finite("y", y)
    if y < 1.0:
        raise DomainError(f"g_inv requires y >= 1, got {y}")
    if y == 1.0:
        return 0.0
    # series start: G(x) ~ 1 + 2x^2/3 near 0
    x = math.sqrt(1.5 * (y - 1.0))
    lo, hi = 0.0, max(1.0, x)
    while True:
        try:
            ghi = g_fn(hi)
        except RangeError:
            hi = _GAUSS_ARG_MAX
            if g_fn(hi) < y:
                raise RangeError(f"g_inv({y}) exceeds the representable range")
            break
        if ghi >= y:
            break
        lo, hi = hi, 2.0 * hi
    x = min(max(x, lo), hi)
    if x == 0.0 or x == hi:
        x = 0.5 * (lo + hi)
    for _ in range(ctl.max_terms):
        gx = g_fn(x)
        err = gx - y
        if abs(err) <= ctl.rel_tol * y:
            return x
        if err > 0.0:
            hi = x
        else:
            lo = x
        step = err / _g_fn_prime(x)
        nxt = x - step
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        x = nxt
    raise PrecisionError(f"g_inv({y}) did not converge in {ctl.max_terms} iterations")


def _hyp2f2_m1_series(x: float, ctl: SeriesControl) -> float:
    """2F2(1,1;3/2,2;x) - 1 by the term recurrence, compensated summation."""
    # t_1 = x/3, t_{n+1} = t_n * x (n+1) / ((n+3/2)(n+2))
    term = x / 3.0
    total = term
    comp = 0.0
    for n in range(1, ctl.max_terms):
        term *= x * (n + 1) / ((n + 1.5) * (n + 2))
        yv = term - comp
        t = total + yv
        comp = (t - total) - yv
        total = t
        if term <= ctl.rel_tol * (1.0 + total):
            return total
    raise PrecisionError(
        f"2F2 series for x={x} did not converge within {ctl.max_terms} terms"
    )


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _hyp2f2_quadrature(x: float) -> float:
    """Large-argument 2F2 via the integral of its derivative kernel.

    2F2(1,1;3/2,2;x) = sqrt(pi)/x * integral of erf(w) exp(w^2) on [0, sqrt(x)].
    The mass concentrates at the upper endpoint, so substitute w = a - u and
    integrate erf(a-u) exp(-u(2a-u)) over geometrically refined panels.
    """
    if x > _EXP_ARG_MAX:
        raise RangeError(f"hyp2f2_special({x}) overflows float64")
    a = math.sqrt(x)
    # beyond u*, the integrand is below exp(-45) of its peak
    u_star = a - math.sqrt(x - 45.0) if x > 45.0 else a
    edges = [0.0] + [u_star * 2.0 ** (-k) for k in range(13, -1, -1)]
    total = 0.0
    for left, right in zip(edges[:-1], edges[1:]):
        half = 0.5 * (right - left)
        mid = 0.5 * (right + left)
        u = mid + half * _GL_NODES
        vals = np.array([math.erf(a - ui) * math.exp(-ui * (2.0 * a - ui)) for ui in u])
        total += half * float(np.dot(_GL_WEIGHTS, vals))
    # value = sqrt(pi)/x * exp(x) * total, assembled in log space for safety
    return _SQRT_PI / x * math.exp(x + math.log(total))


def hyp2f2_special(x: float, ctl: SeriesControl = DEFAULT_SERIES) -> float:
    """2F2(1,1;3/2,2;x) for x >= 0.

    Direct series below ``x = 30`` (all terms positive), quadrature of the
    closed-form derivative kernel above it.
    """
    x = _check_finite("x", x)
    if x < 0.0:
        raise DomainError(f"hyp2f2_special requires x >= 0, got {x}")
    if x == 0.0:
        return 1.0
    if x <= _SERIES_ARG_MAX:
        return 1.0 + _hyp2f2_m1_series(x, ctl)
    return _hyp2f2_quadrature(x)


def _hyp2f2_vec(x: np.ndarray, rel_tol: float = 1e-13, max_terms: int = 600) -> np.ndarray:
    """Vectorised 2F2(1,1;3/2,2;x) for a non-negative array (series range)."""
    x = np.asarray(x, dtype=float)
    big = x > _SERIES_ARG_MAX
    xs = np.where(big, 0.0, x)
    term = np.ones_like(xs)
    total = np.ones_like(xs)
    for n in range(max_terms):
        term = term * xs * (n + 1) / ((n + 1.5) * (n + 2))
        total += term
        if float(term.max()) <= rel_tol:
            break
    else:
        raise PrecisionError("vectorised 2F2 series did not converge")
    if np.any(big):
        total[big] = [_hyp2f2_quadrature(float(v)) for v in x[big]]
    return total


def _shape_args(p):
    return p.theta, p.sigma * p.sigma


def r1(v: float, p) -> float:
    """Mean exit time of the centred error process from (-|v|, |v|), from 0.

    Even in v with r1(0) = 0.
    """
    v = _check_finite("v", v)
    theta, sig2 = _shape_args(p)
    x = theta * v * v / sig2
    return v * v / sig2 * hyp2f2_special(x)


def r1_prime(v: float, p) -> float:
    """Derivative of :func:`r1`; odd in v."""
    v = _check_finite("v", v)
    theta, sig2 = _shape_args(p)
    arg = theta * v * v / sig2
    if arg > _EXP_ARG_MAX:
        raise RangeError(f"r1_prime({v}) overflows float64")
    mag = _SQRT_PI / (p.sigma * math.sqrt(theta))
    return mag * math.erf(math.sqrt(theta) * v / p.sigma) * math.exp(arg)


def r2(v: float, p) -> float:
    """Mean integrated squared error accumulated until the exit of :func:`r1`.

    Even, non-negative, r2(0) = 0.  Computed from the tail of the series so
    the leading cancellation against -v^2/(2 theta) is exact.
    """
    v = _check_finite("v", v)
    theta, sig2 = _shape_args(p)
    x = theta * v * v / sig2
    if x == 0.0:
        return 0.0
    if x <= _SERIES_ARG_MAX:
        m1 = _hyp2f2_m1_series(x, DEFAULT_SERIES)
    else:
        m1 = _hyp2f2_quadrature(x) - 1.0
    return v * v / (2.0 * theta) * m1


def value_function_h(v: float, beta: float, vstar: float, p, gamma: float) -> float:
    """Piecewise value function of the optimal-stopping problem.

    Inside (-vstar, vstar) it solves the generator ODE with source v^2 - beta;
    outside it equals the stopping payoff -gamma v^2.  The additive constant
    is fixed so the two pieces meet at +/- vstar; the fit is smooth only when
    vstar is the solved threshold for beta.
    """
    v = _check_finite("v", v)
    vstar = _check_finite("vstar", vstar)
    if vstar < 0.0:
        raise DomainError(f"vstar must be >= 0, got {vstar}")
    if abs(v) >= vstar:
        return -gamma * v * v

    theta, sig2 = _shape_args(p)

    def core(w: float) -> float:
        x = theta * w * w / sig2
        return (-w * w / (2.0 * theta)
                + (1.0 / (2.0 * theta) - beta / sig2) * w * w * hyp2f2_special(x))

    c2 = -gamma * vstar * vstar - core(vstar)
    return core(v) + c2
