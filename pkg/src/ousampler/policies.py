"""The four sampling policies as next-sample-time rules.

Uniform and zero-wait are clock rules; the age-triggered rule waits a
deterministic extra age computed in closed form; the error-threshold rule
watches the instantaneous estimation error and fires a path-hitting search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InputError
from .metrics import ModelMetrics, age_trigger
from .sde import ErrorProcessParams, OuParams, first_hit

__all__ = [
    "PolicySpec",
    "POLICY_KINDS",
    "ErrorPathSource",
    "uniform_next",
    "zero_wait_next",
    "zero_wait_feasible",
    "mse_optimal_next",
    "age_optimal_next",
    "wiener_threshold",
]

POLICY_KINDS = ("uniform", "zero_wait", "mse_optimal", "age_optimal")


@dataclass(frozen=True)
class PolicySpec:
    """A fully parameterised sampling policy.

    Build through the factory classmethods; ``beta`` is required for the two
    threshold kinds, ``period`` for uniform, ``v`` for mse_optimal.
    """

    kind: str
    period: float | None = None
    beta: float | None = None
    v: float | None = None
    trigger_age: float | None = None

    @classmethod
    def uniform(cls, period: float) -> "PolicySpec":
        if not (math.isfinite(period) and period > 0.0):
            raise InputError(f"period must be finite and > 0, got {period}")
        return cls("uniform", period=float(period))

    @classmethod
    def zero_wait(cls) -> "PolicySpec":
        return cls("zero_wait")

    @classmethod
    def mse_optimal(cls, beta: float, v: float) -> "PolicySpec":
        if v < 0.0 or not math.isfinite(v):
            raise InputError(f"threshold v must be finite and >= 0, got {v}")
        return cls("mse_optimal", beta=float(beta), v=float(v))

    @classmethod
    def age_optimal(cls, beta: float, trigger_age: float | None = None) -> "PolicySpec":
        """Carrying the solved trigger age keeps a simulation exactly
        consistent with the solver that produced beta; otherwise the trigger
        is re-derived from the model when the policy is instantiated."""
        if not math.isfinite(beta):
            raise InputError(f"beta must be finite, got {beta}")
        if trigger_age is not None and (trigger_age < 0.0 or not math.isfinite(trigger_age)):
            raise InputError(f"trigger_age must be finite and >= 0, got {trigger_age}")
        return cls("age_optimal", beta=float(beta), trigger_age=trigger_age)


def uniform_next(s_i: float, period: float) -> float:
    """Next sampling time of periodic sampling: the previous time plus one period."""
    if period <= 0.0:
        raise InputError(f"period must be > 0, got {period}")
    return s_i + period


def zero_wait_next(s_i: float, y_i: float) -> float:
    """Sample again the instant the previous sample is delivered."""
    if y_i < 0.0:
        raise InputError(f"service time must be >= 0, got {y_i}")
    return s_i + y_i


def zero_wait_feasible(fmax: float, mean_y: float) -> bool:
    """Zero-wait sustains rate 1/E[Y]; it violates any cap below that."""
    return fmax >= 1.0 / mean_y


class ErrorPathSource:
    """Owns the error-process dynamics and randomness for threshold watches."""

    def __init__(
        self,
        ep: ErrorProcessParams,
        rng: np.random.Generator,
        dt: float | None = None,
        time_cap: float | None = None,
    ):
        self.ep = ep
        self.rng = rng
        self.dt = dt
        self.time_cap = time_cap

    def first_hit_from(self, start: float, threshold: float):
        return first_hit(
            self.ep, start, threshold, dt=self.dt, rng=self.rng, time_cap=self.time_cap
        )


def mse_optimal_next(
    d_i: float, error_at_di: float, v: float, path: ErrorPathSource
) -> float:
    """First time at or after the delivery instant with |error| >= v.

    The server is idle from d_i on, so the watch starts there; a zero
    threshold or an error already beyond v fires immediately.
    """
    if v < 0.0:
        raise InputError(f"threshold v must be >= 0, got {v}")
    if abs(error_at_di) >= v:
        return d_i
    hit = path.first_hit_from(error_at_di, v)
    return d_i + hit.time


def age_optimal_next(
    d_i: float, age_at_di: float, beta: float, m: ModelMetrics, p: OuParams
) -> float:
    """First time at or after d_i when the expected error at the next
    delivery reaches beta.

    The trigger depends only on the age, so the waiting time is the solved
    trigger age minus the age already accrued, clamped at zero.
    """
    if age_at_di < 0.0:
        raise InputError(f"age must be >= 0, got {age_at_di}")
    wait = age_trigger(beta, m, p) - age_at_di
    return d_i + max(0.0, wait)


def wiener_threshold(beta: float, mean_y: float) -> float:
    """Small-reversion limit of the threshold: sqrt(3 (beta - E[Y]))."""
    if beta < mean_y:
        raise DomainError(f"beta must be >= mean service time {mean_y}, got {beta}")
    return math.sqrt(3.0 * (beta - mean_y))
