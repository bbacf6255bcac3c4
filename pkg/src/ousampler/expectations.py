"""Monte Carlo renewal-cycle functionals under common random numbers.

One fixed panel of draws backs every evaluation during a root-finding run, so
the per-cycle mean duration f2 and mean accumulated error f1 are deterministic
monotone functions of the candidate objective value beta and bisection/Newton
behave as they would on the noiseless functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .metrics import (
    ModelMetrics,
    ServiceDistribution,
    age_penalty_integral,
    age_trigger,
)
from .rngs import substream
from .sde import ErrorProcessParams, OuParams, error_variance_at
from .specfun import _hyp2f2_vec, g_inv, r1, r2

__all__ = [
    "McEstimate",
    "McPanel",
    "AgePanel",
    "threshold_v",
    "f1_hat",
    "f2_hat",
]


@dataclass(frozen=True)
class McEstimate:
    """A Monte Carlo mean with its standard error and sample count."""

    mean: float
    std_error: float
    n: int


def _estimate(values: np.ndarray) -> McEstimate:
    n = values.size
    return McEstimate(
        mean=float(values.mean()),
        std_error=float(values.std(ddof=1) / math.sqrt(n)),
        n=n,
    )


def threshold_v(beta: float, m: ModelMetrics, p: OuParams) -> float:
    """Optimal error threshold for a given beta.

    v(beta) = sigma/sqrt(theta) * Ginv((mse_inf - mse_y) / (mse_inf - beta)),
    zero at beta = mse_y and diverging as beta approaches mse_inf.
    """
    if not (m.mse_y - 1e-12 * m.mse_inf <= beta < m.mse_inf):
        raise DomainError(
            f"beta must lie in [mse_y, mse_inf) = [{m.mse_y}, {m.mse_inf}), got {beta}"
        )
    ratio = (m.mse_inf - m.mse_y) / (m.mse_inf - beta)
    return p.sigma / math.sqrt(p.theta) * g_inv(max(ratio, 1.0))


class McPanel:
    """Fixed panel of (service time, error at delivery) draws.

    The error functionals of each draw are precomputed once, so evaluating
    f1/f2 at a new beta costs one vector pass.  Identical seeds give
    bit-identical estimates.
    """

    def __init__(
        self,
        params: OuParams,
        dist: ServiceDistribution,
        metrics: ModelMetrics,
        n_draws: int = 1_000_000,
        seed: int = 0,
    ):
        self.params = params
        self.dist = dist
        self.metrics = metrics
        self.seed = seed
        self.n = int(n_draws)

        ep = ErrorProcessParams.from_ou(params)
        y = dist.sample(substream(seed, 0), self.n)
        z = substream(seed, 1).standard_normal(self.n)
        o = np.sqrt(error_variance_at(ep, y)) * z

        scale = params.theta / (params.sigma * params.sigma)
        x = scale * o * o
        f22 = _hyp2f2_vec(x)
        self.y = y
        self.o = o
        self.o_sq = o * o
        self.r1_o = self.o_sq / (params.sigma * params.sigma) * f22
        self.r2_o = self.o_sq / (2.0 * params.theta) * (f22 - 1.0)
        self.mean_y = float(y.mean())

    @property
    def mse_y(self) -> float:
        return self.metrics.mse_y

    @property
    def mse_inf(self) -> float:
        return self.metrics.mse_inf

    def _v(self, beta: float) -> float:
        return threshold_v(beta, self.metrics, self.params)

    def _w2(self, beta: float) -> np.ndarray:
        r1v = r1(self._v(beta), self.params)
        return np.maximum(r1v - self.r1_o, 0.0) + self.y

    def _w1(self, beta: float) -> np.ndarray:
        v = self._v(beta)
        m = self.metrics
        r2v = r2(v, self.params)
        return (
            np.maximum(r2v - self.r2_o, 0.0)
            + m.mse_inf * (self.y - m.gamma)
            + np.maximum(v * v, self.o_sq) * m.gamma
        )

    def f2(self, beta: float) -> McEstimate:
        """Mean inter-delivery time of the threshold policy at beta."""
        return _estimate(self._w2(beta))

    def f1(self, beta: float) -> McEstimate:
        """Mean squared error accumulated over one delivery interval."""
        return _estimate(self._w1(beta))

    def f(self, beta: float) -> float:
        """Root function f1(beta) - beta * f2(beta) (panel mean)."""
        return float(self._w1(beta).mean() - beta * self._w2(beta).mean())

    def f_estimate(self, beta: float) -> McEstimate:
        return _estimate(self._w1(beta) - beta * self._w2(beta))

    def h(self, beta: float) -> float:
        """Fixed-point residual f1/f2 - beta."""
        return float(self._w1(beta).mean() / self._w2(beta).mean()) - beta

    def h_std_error(self, beta: float) -> float:
        """Delta-method standard error of :meth:`h` at this beta."""
        w1 = self._w1(beta)
        w2 = self._w2(beta)
        f2m = float(w2.mean())
        rho = float(w1.mean()) / f2m
        resid = w1 - rho * w2
        return float(resid.std(ddof=1) / (math.sqrt(self.n) * f2m))

    def fprime(self, beta: float, step: float | None = None) -> float:
        """Central finite-difference derivative of f on the same panel."""
        if step is None:
            step = max(1e-4, 1e-3 * (self.mse_inf - self.mse_y))
        lo = max(beta - step, self.mse_y)
        hi = min(beta + step, self.mse_inf - 1e-3 * step)
        return (self.f(hi) - self.f(lo)) / (hi - lo)

    def f2prime(self, beta: float, step: float | None = None) -> float:
        if step is None:
            step = max(1e-4, 1e-3 * (self.mse_inf - self.mse_y))
        lo = max(beta - step, self.mse_y)
        hi = min(beta + step, self.mse_inf - 1e-3 * step)
        return (self.f2(hi).mean - self.f2(lo).mean) / (hi - lo)


def f2_hat(beta: float, panel: McPanel) -> McEstimate:
    """Mean inter-delivery time at beta on a fixed panel."""
    return panel.f2(beta)


def f1_hat(beta: float, panel: McPanel) -> McEstimate:
    """Mean per-interval accumulated squared error at beta on a fixed panel."""
    return panel.f1(beta)


class AgePanel:
    """Renewal functionals of the signal-agnostic (age-triggered) policy.

    The policy waits a deterministic extra age before resampling, so its cycle
    laws depend only on the service draws; two independent service arrays
    realise the current and the next service time.
    """

    def __init__(
        self,
        params: OuParams,
        dist: ServiceDistribution,
        metrics: ModelMetrics,
        n_draws: int = 1_000_000,
        seed: int = 0,
    ):
        self.params = params
        self.dist = dist
        self.metrics = metrics
        self.seed = seed
        self.n = int(n_draws)
        self.y = dist.sample(substream(seed, 2), self.n)
        self.y_next = dist.sample(substream(seed, 3), self.n)
        self.mean_y = float(self.y.mean())
        self._p_of_y = age_penalty_integral(params, self.y)

    @property
    def mse_y(self) -> float:
        return self.metrics.mse_y

    @property
    def mse_inf(self) -> float:
        return self.metrics.mse_inf

    def trigger_age(self, beta: float) -> float:
        return age_trigger(beta, self.metrics, self.params)

    def _cycle(self, beta: float) -> np.ndarray:
        return np.maximum(self.trigger_age(beta), self.y)

    def f2(self, beta: float) -> McEstimate:
        return _estimate(self._cycle(beta))

    def f1(self, beta: float) -> McEstimate:
        t = self._cycle(beta)
        vals = age_penalty_integral(self.params, t + self.y_next) - self._p_of_y
        return _estimate(vals)

    def f(self, beta: float) -> float:
        t = self._cycle(beta)
        f1 = age_penalty_integral(self.params, t + self.y_next) - self._p_of_y
        return float(f1.mean() - beta * t.mean())

    def h(self, beta: float) -> float:
        return self.f1(beta).mean / self.f2(beta).mean - beta

    def fprime(self, beta: float, step: float | None = None) -> float:
        if step is None:
            step = max(1e-4, 1e-3 * (self.mse_inf - self.mse_y))
        lo = max(beta - step, self.mse_y)
        hi = min(beta + step, self.mse_inf - 1e-3 * step)
        return (self.f(hi) - self.f(lo)) / (hi - lo)

    def f2prime(self, beta: float, step: float | None = None) -> float:
        if step is None:
            step = max(1e-4, 1e-3 * (self.mse_inf - self.mse_y))
        lo = max(beta - step, self.mse_y)
        hi = min(beta + step, self.mse_inf - 1e-3 * step)
        return (self.f2(hi).mean - self.f2(lo).mean) / (hi - lo)
