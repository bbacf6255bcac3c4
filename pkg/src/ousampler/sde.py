"""Exact sampling of mean-reverting Gauss-Markov transitions and hitting times.

The transition law over any step is Gaussian with known mean and variance, so
paths on a grid are exact in distribution regardless of the step size; only
threshold *detection* between grid points is approximate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import DomainError, HitTimeoutError, InputError

__all__ = [
    "OuParams",
    "ErrorProcessParams",
    "HitResult",
    "transition_exact",
    "transition_coeffs",
    "error_variance_at",
    "sample_error_at",
    "first_hit",
]


@dataclass(frozen=True)
class OuParams:
    """Mean-reverting signal model: reversion rate, diffusion, long-run mean."""

    theta: float
    sigma: float
    mu: float = 0.0

    def __post_init__(self):
        for name in ("theta", "sigma", "mu"):
            val = getattr(self, name)
            if not math.isfinite(val):
                raise InputError(f"{name} must be finite, got {val}")
        if self.theta <= 0.0:
            raise InputError(f"theta must be > 0, got {self.theta}")
        if self.sigma <= 0.0:
            raise InputError(f"sigma must be > 0, got {self.sigma}")

    @property
    def stationary_variance(self) -> float:
        return self.sigma * self.sigma / (2.0 * self.theta)


@dataclass(frozen=True)
class ErrorProcessParams:
    """Centred view of an :class:`OuParams`: the estimation-error process.

    Same reversion and diffusion as the parent signal, long-run mean zero.
    """

    theta: float
    sigma: float

    @classmethod
    def from_ou(cls, p: OuParams) -> "ErrorProcessParams":
        return cls(theta=p.theta, sigma=p.sigma)

    def as_ou(self) -> OuParams:
        return OuParams(theta=self.theta, sigma=self.sigma, mu=0.0)

    @property
    def stationary_variance(self) -> float:
        return self.sigma * self.sigma / (2.0 * self.theta)


def transition_coeffs(p, dt: float) -> tuple[float, float]:
    """AR(1) coefficients (a, b) of the exact transition over a step dt.

    x_next = mu + a (x - mu) + b z with z standard normal.
    """
    if dt < 0.0 or not math.isfinite(dt):
        raise InputError(f"dt must be finite and >= 0, got {dt}")
    a = math.exp(-p.theta * dt)
    b = math.sqrt(p.sigma * p.sigma / (2.0 * p.theta) * (1.0 - a * a))
    return a, b


def transition_exact(p: OuParams, x: float, dt: float, z: float) -> float:
    """One exact conditional transition: deterministic given (x, dt, z)."""
    x = float(x)
    z = float(z)
    if not (math.isfinite(x) and math.isfinite(z)):
        raise InputError(f"x and z must be finite, got x={x}, z={z}")
    a, b = transition_coeffs(p, dt)
    mu = getattr(p, "mu", 0.0)
    return mu + a * (x - mu) + b * z


def error_variance_at(ep: ErrorProcessParams, y) -> float | np.ndarray:
    """Variance of the error process at elapsed time y, started from zero."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0.0) or not np.all(np.isfinite(y)):
        raise InputError("y must be finite and >= 0")
    out = ep.stationary_variance * -np.expm1(-2.0 * ep.theta * y)
    return float(out) if out.ndim == 0 else out


def sample_error_at(ep: ErrorProcessParams, y, z) -> float | np.ndarray:
    """Draw the error process at elapsed time y from a standard-normal z."""
    std = np.sqrt(error_variance_at(ep, y))
    out = std * np.asarray(z, dtype=float)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HitResult:
    """Outcome of a grid-detected threshold hit.

    ``value`` is clamped to sign(raw) * threshold when the hit was a crossing
    from inside (the continuous path crosses exactly at the boundary);
    ``raw_value`` keeps the grid overshoot for diagnostics.
    """

    time: float
    value: float
    raw_value: float
    steps: int


def first_hit(
    ep: ErrorProcessParams,
    start: float,
    threshold: float,
    dt: float | None = None,
    rng: np.random.Generator | None = None,
    time_cap: float | None = None,
    block: int = 8192,
) -> HitResult:
    """First grid time at which |error| >= threshold, stepping exactly.

    The grid starts at the current instant with spacing dt (default
    1e-3/theta).  A time cap (default 1e4/theta) turns a threshold parked in
    the stationary tail into a diagnosable error instead of a hang.
    """
    start = float(start)
    if not math.isfinite(start):
        raise InputError(f"start must be finite, got {start}")
    if threshold < 0.0 or not math.isfinite(threshold):
        raise DomainError(f"threshold must be finite and >= 0, got {threshold}")
    if abs(start) >= threshold:
        return HitResult(time=0.0, value=start, raw_value=start, steps=0)
    if dt is None:
        dt = 1e-3 / ep.theta
    if dt <= 0.0:
        raise InputError(f"dt must be > 0, got {dt}")
    if time_cap is None:
        time_cap = 1e4 / ep.theta
    if rng is None:
        raise InputError("first_hit needs an rng when the start is inside the band")

    a, b = transition_coeffs(ep.as_ou(), dt)
    max_steps = int(math.ceil(time_cap / dt))
    e = start
    done = 0
    while done < max_steps:
        m = min(block, max_steps - done)
        z = rng.standard_normal(m)
        path, _ = lfilter([b], [1.0, -a], z, zi=[a * e])
        hits = np.abs(path) >= threshold
        if hits.any():
            idx = int(np.argmax(hits))
            raw = float(path[idx])
            return HitResult(
                time=(done + idx + 1) * dt,
                value=math.copysign(threshold, raw),
                raw_value=raw,
                steps=done + idx + 1,
            )
        e = float(path[-1])
        done += m
    raise HitTimeoutError(
        f"no hit of |error| >= {threshold} within time cap {time_cap}",
        elapsed=max_steps * dt,
    )
