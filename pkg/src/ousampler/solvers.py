"""Root-finders for the objective value beta, and the rate-constraint case split.

Three interchangeable methods solve f(beta) = f1 - beta f2 = 0 on a fixed
panel: plain bisection, Newton with finite-difference derivatives, and the
fixed-point update beta <- f1/f2.  Newton and the fixed-point iteration start
from an upper bracket produced by a few bisection steps and fall back to a
bisection step whenever an iterate stops decreasing or leaves the domain, so
convergence never rests on the concavity the noiseless analysis assumes.

The constrained solve targets g(beta) = 1/f_max - f2(beta) = 0 instead; which
equation applies is decided by comparing the unconstrained cycle length
against 1/f_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import SolverError
from .expectations import threshold_v

__all__ = [
    "SolverReport",
    "ThresholdSolution",
    "AgeSolution",
    "bisect_f",
    "newton_f",
    "fixed_point_f",
    "bisect_g",
    "newton_g",
    "solve_policy",
    "solve_age_policy",
]

DEFAULT_TOL = 1e-9
_MAX_ITER = 200
METHODS = ("bisection", "newton", "fixed_point")


@dataclass
class SolverReport:
    """Trace of one root-finding run.

    ``residual`` is the final convergence measure (bracket width for
    bisection, last step size otherwise); ``history`` holds one
    (iterate, residual) pair per iteration.
    """

    beta: float
    iterations: int
    residual: float
    history: list[tuple[float, float]] = field(default_factory=list)
    method: str = "bisection_f"
    constrained: bool = False
    binding: bool = True
    warmup: int = 0
    fallback_steps: int = 0


@dataclass
class ThresholdSolution:
    """Solved sampling threshold: beta, v(beta), and the implied multiplier."""

    beta: float
    v: float
    mse_opt: float
    lagrange_multiplier: float
    report: SolverReport


@dataclass
class AgeSolution:
    """Solved age-triggered policy: beta and the deterministic waiting age."""

    beta: float
    trigger_age: float
    mse_age_opt: float
    lagrange_multiplier: float
    report: SolverReport


def bisect_f(panel, tol: float = DEFAULT_TOL) -> SolverReport:
    """Bisection on f over [mse_y, mse_inf); halts when the bracket is <= tol."""
    lo, hi = panel.mse_y, panel.mse_inf
    f_lo = panel.f(lo)
    if f_lo <= 0.0:
        raise SolverError(
            f"bracket violated: f at the lower endpoint {lo} is {f_lo} <= 0"
        )
    history: list[tuple[float, float]] = []
    beta = lo
    while hi - lo > tol:
        if len(history) >= _MAX_ITER:
            raise SolverError("bisection exceeded the iteration cap")
        beta = 0.5 * (lo + hi)
        val = panel.f(beta)
        if val >= 0.0:
            lo = beta
        else:
            hi = beta
        history.append((beta, hi - lo))
    return SolverReport(
        beta=beta,
        iterations=len(history),
        residual=hi - lo,
        history=history,
        method="bisection_f",
    )


def _bisect_warmup(panel, fun, steps: int = 3):
    """A few bisection iterations; returns (lo, hi) with hi a finite upper bracket."""
    lo, hi = panel.mse_y, panel.mse_inf
    k = 0
    while k < steps or hi == panel.mse_inf:
        mid = 0.5 * (lo + hi)
        if fun(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
        k += 1
        if k > 60:
            break
    return lo, hi, k


def _safeguarded_descent(panel, fun, propose, beta0, tol, method, raise_on_upper=False):
    """Shared skeleton of the Newton and fixed-point iterations.

    ``propose(beta, val)`` returns the next candidate; any candidate that is
    not a decrease (up to floating slack) inside [mse_y, mse_inf) is replaced
    by a bisection step on the bracket maintained from the visited iterates.
    With ``raise_on_upper`` a candidate at or beyond mse_inf aborts instead:
    the fixed-point map has a second, spurious root there.
    """
    warm = 0
    if beta0 is None:
        lo, hi, warm = _bisect_warmup(panel, fun)
        beta = hi
    else:
        if not (panel.mse_y <= beta0 < panel.mse_inf):
            raise SolverError(f"beta0 must lie in [mse_y, mse_inf), got {beta0}")
        lo, hi = panel.mse_y, panel.mse_inf
        beta = beta0
    slack = 1e-12 * (panel.mse_inf - panel.mse_y)
    history: list[tuple[float, float]] = []
    fallback = 0
    for _ in range(_MAX_ITER):
        val = fun(beta)
        if val >= 0.0:
            lo = max(lo, beta)
        else:
            hi = min(hi, beta)
        candidate, step_size = propose(beta, val)
        if not (panel.mse_y <= candidate < panel.mse_inf) or candidate > beta + slack:
            if raise_on_upper and candidate >= panel.mse_inf:
                raise SolverError(
                    f"{method} diverged toward the upper bound at {candidate}"
                )
            candidate = 0.5 * (lo + hi)
            step_size = abs(candidate - beta)
            fallback += 1
        history.append((candidate, step_size))
        done = step_size <= tol
        beta = candidate
        if done:
            return SolverReport(
                beta=beta,
                iterations=len(history),
                residual=step_size,
                history=history,
                method=method,
                warmup=warm,
                fallback_steps=fallback,
            )
    raise SolverError(f"{method} did not converge within {_MAX_ITER} iterations")


def newton_f(panel, beta0: float | None = None, tol: float = DEFAULT_TOL) -> SolverReport:
    """Newton iteration on f with finite-difference derivatives.

    Without an explicit beta0, three bisection steps supply an upper bracket
    as the starting point, which keeps the iterates on the decreasing branch.
    """

    def propose(beta, val):
        deriv = panel.fprime(beta)
        if deriv == 0.0:
            raise SolverError(f"zero derivative of f at beta={beta}")
        step = val / deriv
        return beta - step, abs(step)

    return _safeguarded_descent(panel, panel.f, propose, beta0, tol, "newton_f")


def fixed_point_f(panel, beta0: float | None = None, tol: float = DEFAULT_TOL) -> SolverReport:
    """Fixed-point iteration beta <- f1(beta)/f2(beta)."""

    def propose(beta, val):
        candidate = panel.f1(beta).mean / panel.f2(beta).mean
        return candidate, abs(candidate - beta)

    return _safeguarded_descent(
        panel, panel.f, propose, beta0, tol, "fixed_point", raise_on_upper=True
    )


def bisect_g(panel, fmax: float, tol: float = DEFAULT_TOL) -> SolverReport:
    """Bisection on g(beta) = 1/fmax - f2(beta).

    When g is already negative at mse_y the rate constraint cannot bind even
    with a zero threshold; the report comes back with ``binding=False`` and
    beta pinned at mse_y rather than an error.
    """
    if not fmax > 0.0:
        raise SolverError(f"fmax must be > 0, got {fmax}")
    target = 1.0 / fmax
    lo, hi = panel.mse_y, panel.mse_inf
    if target - panel.f2(lo).mean < 0.0:
        return SolverReport(
            beta=lo,
            iterations=0,
            residual=0.0,
            history=[],
            method="bisection_g",
            binding=False,
        )
    history: list[tuple[float, float]] = []
    beta = lo
    while hi - lo > tol:
        if len(history) >= _MAX_ITER:
            raise SolverError("bisection exceeded the iteration cap")
        beta = 0.5 * (lo + hi)
        if panel.f2(beta).mean >= target:
            hi = beta
        else:
            lo = beta
        history.append((beta, hi - lo))
    return SolverReport(
        beta=beta,
        iterations=len(history),
        residual=hi - lo,
        history=history,
        method="bisection_g",
    )


def newton_g(panel, fmax: float, beta0: float | None = None, tol: float = DEFAULT_TOL) -> SolverReport:
    """Newton iteration on g, with the same safeguards as :func:`newton_f`."""
    if not fmax > 0.0:
        raise SolverError(f"fmax must be > 0, got {fmax}")
    target = 1.0 / fmax

    def g(beta):
        return target - panel.f2(beta).mean

    if g(panel.mse_y) < 0.0:
        return SolverReport(
            beta=panel.mse_y,
            iterations=0,
            residual=0.0,
            history=[],
            method="newton_g",
            binding=False,
        )

    def propose(beta, val):
        deriv = -panel.f2prime(beta)
        if deriv == 0.0:
            raise SolverError(f"zero derivative of g at beta={beta}")
        step = val / deriv
        return beta - step, abs(step)

    report = _safeguarded_descent(panel, g, propose, beta0, tol, "newton_g")
    return report


def _solve_f(panel, method: str, tol: float) -> SolverReport:
    if method == "bisection":
        return bisect_f(panel, tol)
    if method == "newton":
        return newton_f(panel, tol=tol)
    if method == "fixed_point":
        return fixed_point_f(panel, tol=tol)
    raise SolverError(f"unknown method {method!r}; choose from {METHODS}")


def _solve_g(panel, fmax: float, method: str, tol: float) -> SolverReport:
    if method in ("bisection", "fixed_point"):
        return bisect_g(panel, fmax, tol)
    if method == "newton":
        return newton_g(panel, fmax, tol=tol)
    raise SolverError(f"unknown method {method!r}; choose from {METHODS}")


def _solve_beta(panel, fmax: float, method: str, tol: float) -> SolverReport:
    """Case split of the rate-constrained problem on one panel.

    Solve f = 0 first; if the resulting cycle is longer than 1/fmax the
    constraint is slack and that root stands, otherwise re-solve for the beta
    that meets the rate with equality.
    """
    report = _solve_f(panel, method, tol)
    if math.isinf(fmax):
        return report
    if panel.f2(report.beta).mean > 1.0 / fmax:
        return report
    constrained = _solve_g(panel, fmax, method, tol)
    constrained.constrained = True
    return constrained


def solve_policy(panel, fmax: float = math.inf, method: str = "newton", tol: float = DEFAULT_TOL) -> ThresholdSolution:
    """Solve the signal-aware sampling threshold, honouring a rate cap."""
    report = _solve_beta(panel, fmax, method, tol)
    beta = report.beta
    mse_opt = panel.f1(beta).mean / panel.f2(beta).mean
    return ThresholdSolution(
        beta=beta,
        v=threshold_v(beta, panel.metrics, panel.params),
        mse_opt=mse_opt,
        lagrange_multiplier=beta - mse_opt,
        report=report,
    )


def solve_age_policy(panel, fmax: float = math.inf, method: str = "newton", tol: float = DEFAULT_TOL) -> AgeSolution:
    """Solve the signal-agnostic (age-triggered) policy on an age panel."""
    report = _solve_beta(panel, fmax, method, tol)
    beta = report.beta
    mse_opt = panel.f1(beta).mean / panel.f2(beta).mean
    return AgeSolution(
        beta=beta,
        trigger_age=panel.trigger_age(beta),
        mse_age_opt=mse_opt,
        lagrange_multiplier=beta - mse_opt,
        report=report,
    )
