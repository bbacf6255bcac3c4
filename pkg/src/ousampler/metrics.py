"""Closed-form scalar metrics of the model.

The two MSE bounds, the occupation constant gamma, the age penalty, and the
expected error seen one service time after a sample taken at a given age.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InputError
from .sde import OuParams

__all__ = [
    "ServiceDistribution",
    "ModelMetrics",
    "compute_metrics",
    "age_penalty",
    "age_penalty_integral",
    "expected_error_after_service",
    "age_trigger",
]

_KINDS = ("exponential", "lognormal_normalized", "constant", "empirical")


@dataclass(frozen=True)
class ServiceDistribution:
    """I.i.d. service-time law of the channel.

    Use the factory classmethods; the constructor does not validate kind
    combinations beyond basic sanity.
    """

    kind: str
    param: float = 0.0
    samples: tuple[float, ...] | None = None

    @classmethod
    def exponential(cls, mean: float) -> "ServiceDistribution":
        if not (math.isfinite(mean) and mean > 0.0):
            raise InputError(f"exponential mean must be finite and > 0, got {mean}")
        return cls("exponential", float(mean))

    @classmethod
    def lognormal_normalized(cls, alpha: float) -> "ServiceDistribution":
        """exp(alpha Z) / E[exp(alpha Z)], Z standard normal; mean exactly 1."""
        if not (math.isfinite(alpha) and alpha > 0.0):
            raise InputError(f"lognormal alpha must be finite and > 0, got {alpha}")
        return cls("lognormal_normalized", float(alpha))

    @classmethod
    def constant(cls, value: float) -> "ServiceDistribution":
        # value == 0 is the one legal degenerate limit (all metrics collapse
        # to their no-delay values); negatives are rejected
        if not (math.isfinite(value) and value >= 0.0):
            raise InputError(f"constant service time must be finite and >= 0, got {value}")
        return cls("constant", float(value))

    @classmethod
    def empirical(cls, durations) -> "ServiceDistribution":
        arr = tuple(float(d) for d in durations)
        if not arr:
            raise InputError("empirical distribution needs at least one duration")
        if any(not math.isfinite(d) or d < 0.0 for d in arr):
            raise InputError("empirical durations must be finite and >= 0")
        if sum(arr) <= 0.0:
            raise InputError("empirical distribution has mean 0 (degenerate)")
        return cls("empirical", 0.0, arr)

    def mean(self) -> float:
        if self.kind == "exponential":
            return self.param
        if self.kind == "lognormal_normalized":
            return 1.0
        if self.kind == "constant":
            return self.param
        if self.kind == "empirical":
            return float(np.mean(self.samples))
        raise InputError(f"unknown service distribution kind {self.kind!r}")

    def laplace(self, s: float) -> float | None:
        """E[exp(-s Y)] in closed form, or None when only Monte Carlo works."""
        if self.kind == "exponential":
            return 1.0 / (1.0 + s * self.param)
        if self.kind == "constant":
            return math.exp(-s * self.param)
        if self.kind == "empirical":
            return float(np.mean(np.exp(-s * np.asarray(self.samples))))
        return None

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "exponential":
            return rng.exponential(self.param, n)
        if self.kind == "lognormal_normalized":
            norm = math.exp(0.5 * self.param * self.param)
            return np.exp(self.param * rng.standard_normal(n)) / norm
        if self.kind == "constant":
            return np.full(n, self.param)
        if self.kind == "empirical":
            return rng.choice(np.asarray(self.samples), size=n, replace=True)
        raise InputError(f"unknown service distribution kind {self.kind!r}")


@dataclass(frozen=True)
class ModelMetrics:
    """The scalar constants every other module consumes.

    ``mse_y`` and ``mse_inf`` bound the achievable long-run MSE from below
    and above; ``gamma`` is the occupation constant (1 - laplace_2theta) /
    (2 theta); ``laplace_std_error`` is zero when closed forms were used.
    """

    mse_y: float
    mse_inf: float
    gamma: float
    laplace_2theta: float
    mean_y: float
    laplace_std_error: float = 0.0
    n_mc: int = 0

    def __post_init__(self):
        if not (0.0 <= self.mse_y <= self.mse_inf):
            raise InputError(f"need 0 <= mse_y <= mse_inf, got {self.mse_y}, {self.mse_inf}")
        if self.gamma > self.mean_y + 1e-12 * max(1.0, self.mean_y):
            raise InputError(f"gamma {self.gamma} exceeds mean service time {self.mean_y}")
        rel = abs(self.mse_y - self.mse_inf * (1.0 - self.laplace_2theta))
        if rel > 1e-9 * max(self.mse_inf, 1.0):
            raise InputError("mse_y inconsistent with mse_inf * (1 - laplace_2theta)")


def compute_metrics(
    p: OuParams,
    d: ServiceDistribution,
    n_mc: int = 1_000_000,
    rng: np.random.Generator | None = None,
) -> ModelMetrics:
    """Evaluate the model constants, by closed form where the law allows.

    The normalized log-normal has no elementary Laplace transform, so its
    E[exp(-2 theta Y)] is estimated over ``n_mc`` draws from ``rng``.
    """
    s = 2.0 * p.theta
    lap = d.laplace(s)
    se = 0.0
    n_used = 0
    if lap is None:
        if rng is None:
            raise InputError(f"{d.kind} metrics need an rng for Monte Carlo")
        if n_mc < 10_000:
            raise InputError(f"n_mc must be >= 10000 for Monte Carlo metrics, got {n_mc}")
        vals = np.exp(-s * d.sample(rng, n_mc))
        lap = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(n_mc))
        n_used = n_mc
    mse_inf = p.stationary_variance
    mse_y = mse_inf * (1.0 - lap)
    gamma = (1.0 - lap) / s
    return ModelMetrics(
        mse_y=mse_y,
        mse_inf=mse_inf,
        gamma=gamma,
        laplace_2theta=lap,
        mean_y=d.mean(),
        laplace_std_error=se,
        n_mc=n_used,
    )


def age_penalty(p: OuParams, delta) -> float | np.ndarray:
    """Expected squared error of a signal-agnostic estimate at age delta."""
    delta = np.asarray(delta, dtype=float)
    if np.any(delta < 0.0):
        raise InputError("age must be >= 0")
    out = p.stationary_variance * -np.expm1(-2.0 * p.theta * delta)
    return float(out) if out.ndim == 0 else out


def age_penalty_integral(p: OuParams, delta) -> float | np.ndarray:
    """Integral of :func:`age_penalty` from 0 to delta, in closed form."""
    delta = np.asarray(delta, dtype=float)
    out = p.stationary_variance * (delta + np.expm1(-2.0 * p.theta * delta) / (2.0 * p.theta))
    return float(out) if out.ndim == 0 else out


def expected_error_after_service(p: OuParams, m: ModelMetrics, delta) -> float | np.ndarray:
    """Expected squared error at delivery of a sample taken at age delta.

    Equals mse_inf (1 - exp(-2 theta delta) E[exp(-2 theta Y)]): the age
    penalty averaged over one more service time, strictly increasing from
    mse_y at delta = 0 toward mse_inf.
    """
    delta = np.asarray(delta, dtype=float)
    if np.any(delta < 0.0):
        raise InputError("age must be >= 0")
    out = m.mse_inf * (1.0 - np.exp(-2.0 * p.theta * delta) * m.laplace_2theta)
    return float(out) if out.ndim == 0 else out


def age_trigger(beta: float, m: ModelMetrics, p: OuParams) -> float:
    """Waiting age at which the expected error at next delivery reaches beta.

    Closed-form inverse of :func:`expected_error_after_service`; clamped to 0
    when the trigger is already met at any age.
    """
    if not (m.mse_y - 1e-12 * m.mse_inf <= beta < m.mse_inf):
        raise DomainError(
            f"beta must lie in [mse_y, mse_inf) = [{m.mse_y}, {m.mse_inf}), got {beta}"
        )
    if m.laplace_2theta <= 0.0:
        return 0.0
    ratio = (m.mse_inf - beta) / (m.mse_inf * m.laplace_2theta)
    if ratio >= 1.0:
        return 0.0
    return -math.log(ratio) / (2.0 * p.theta)
