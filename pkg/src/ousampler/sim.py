"""Event-driven simulation of sampler -> FCFS queue -> conditional-mean estimator.

The estimation error relative to the current estimate is itself a centred
mean-reverting process, so the simulator advances that single scalar with
exact transitions on a dt grid, jumps it deterministically at delivery
epochs, and integrates its square by the trapezoid rule.  Threshold policies
are detected by grid crossing; everything else about the paths is exact in
distribution.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .errors import InputError
from .expectations import AgePanel, McPanel
from .metrics import (
    ModelMetrics,
    ServiceDistribution,
    age_penalty_integral,
    age_trigger,
    compute_metrics,
)
from .policies import PolicySpec, zero_wait_feasible
from .rngs import substream
from .sde import OuParams, transition_coeffs
from .solvers import solve_age_policy, solve_policy

__all__ = ["SimConfig", "SimResult", "SweepRow", "run", "sweep"]

_CHUNK = 1 << 16
_DEFAULT_UNIFORM_QUEUE_CAP = 10_000


@dataclass(frozen=True)
class SimConfig:
    """One simulation experiment: model, service law, policy, horizon, seed."""

    params: OuParams
    dist: ServiceDistribution
    policy: PolicySpec
    horizon: float
    dt: float | None = None
    seed: int = 0
    queue_cap: int | None = None
    fmax: float = math.inf
    warmup_frac: float = 0.05
    n_batches: int = 20
    signal_seed: int | None = None

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0.0):
            raise InputError(f"horizon must be finite and > 0, got {self.horizon}")
        dt = self.resolved_dt
        if dt <= 0.0:
            raise InputError(f"dt must be > 0, got {dt}")
        if dt > self.horizon / 100.0:
            raise InputError(f"dt={dt} too coarse for horizon {self.horizon}")
        if not (0.0 <= self.warmup_frac < 0.5):
            raise InputError(f"warmup_frac must lie in [0, 0.5), got {self.warmup_frac}")
        if self.n_batches < 2:
            raise InputError(f"n_batches must be >= 2, got {self.n_batches}")

    @property
    def resolved_dt(self) -> float:
        return self.dt if self.dt is not None else 1e-3 / self.params.theta


@dataclass
class SimResult:
    """Summary statistics of one run; per-batch arrays ride along for tests."""

    time_avg_mse: float
    mse_std_error: float
    avg_rate: float
    avg_inter_delivery: float
    feasible: bool
    queue_overflowed: bool
    time_avg_age_penalty: float
    n_samples: int
    n_deliveries: int
    horizon: float
    warmup: float
    mse_batch_means: np.ndarray = field(repr=False, default=None)
    age_batch_means: np.ndarray = field(repr=False, default=None)
    sample_times: np.ndarray = field(repr=False, default=None)
    deliveries: np.ndarray = field(repr=False, default=None)  # columns s, x, d
    path: Optional[tuple] = field(repr=False, default=None)  # (t, error, xhat)

    def summary_dict(self) -> dict:
        return {
            "time_avg_mse": self.time_avg_mse,
            "mse_std_error": self.mse_std_error,
            "avg_rate": self.avg_rate,
            "avg_inter_delivery": self.avg_inter_delivery,
            "feasible": self.feasible,
            "queue_overflowed": self.queue_overflowed,
            "time_avg_age_penalty": self.time_avg_age_penalty,
            "n_samples": self.n_samples,
            "n_deliveries": self.n_deliveries,
            "horizon": self.horizon,
            "warmup": self.warmup,
        }


class _Sim:
    def __init__(self, cfg: SimConfig, record_path: bool):
        self.cfg = cfg
        self.p = cfg.params
        self.dt = cfg.resolved_dt
        self.a_dt, self.b_dt = transition_coeffs(cfg.params, self.dt)
        seed = cfg.seed
        signal_entropy = cfg.signal_seed if cfg.signal_seed is not None else seed
        self.rng_signal = substream(signal_entropy, 101)
        self.rng_service = substream(seed, 102)

        self.record = record_path
        self.rec_t: list[np.ndarray] = []
        self.rec_e: list[np.ndarray] = []
        self.rec_xhat: list[np.ndarray] = []

        self.warm = cfg.warmup_frac * cfg.horizon
        self.n_batches = cfg.n_batches
        self.bw = (cfg.horizon - self.warm) / cfg.n_batches
        self.edges = np.array(
            [self.warm + k * self.bw for k in range(cfg.n_batches + 1)]
        )
        self.mse_batches = np.zeros(cfg.n_batches)
        self.age_batches = np.zeros(cfg.n_batches)

        # estimator state: error vs current estimate, freshest delivered sample
        self.t = 0.0
        self.e = 0.0
        self.cur_s = 0.0
        self.cur_x = self.p.mu
        self.in_service: tuple[float, float, float] | None = None  # (s, x, delivery)
        self.queue: list[tuple[float, float]] = []
        self.queue_overflowed = False

        self.sample_times: list[float] = []
        self.deliveries: list[tuple[float, float, float]] = []

        pol = cfg.policy
        self.kind = pol.kind
        self.v = pol.v if pol.kind == "mse_optimal" else 0.0
        self.next_sample: float | None = None
        self.watch = False
        self.uniform_count = 0
        if pol.kind == "uniform":
            self.uniform_count = 1
            self.next_sample = pol.period
        elif pol.kind == "zero_wait":
            self.next_sample = 0.0
        elif pol.kind == "age_optimal":
            if pol.trigger_age is not None:
                self.trigger = pol.trigger_age
            else:
                m = compute_metrics(cfg.params, cfg.dist, rng=substream(seed, 103))
                self.trigger = age_trigger(pol.beta, m, cfg.params)
            self.next_sample = self.trigger  # age is zero at start
        elif pol.kind == "mse_optimal":
            self.watch = True
        else:
            raise InputError(f"unknown policy kind {pol.kind!r}")

        cap = cfg.queue_cap
        if cap is None and pol.kind == "uniform":
            cap = _DEFAULT_UNIFORM_QUEUE_CAP
        self.queue_cap = cap

    # -- helpers ---------------------------------------------------------

    def _xhat(self, s: float, x: float, t: float) -> float:
        mu = self.p.mu
        return mu + (x - mu) * math.exp(-self.p.theta * (t - s))

    def _bucket(self, t0: float) -> int:
        if t0 < self.warm:
            return -1
        k = int((t0 - self.warm) / self.bw + 1e-9)
        return min(k, self.n_batches - 1)

    def _next_edge(self, t: float) -> float:
        # strictly greater than t, so a segment ending on an edge advances
        idx = int(np.searchsorted(self.edges, t, side="right"))
        if idx >= self.edges.size:
            return math.inf
        return float(self.edges[idx])

    def _record(self, ts: np.ndarray, es: np.ndarray):
        self.rec_t.append(ts)
        self.rec_e.append(es)
        mu = self.p.mu
        self.rec_xhat.append(
            mu + (self.cur_x - mu) * np.exp(-self.p.theta * (ts - self.cur_s))
        )

    # -- path advancing ---------------------------------------------------

    def _advance_segment(self, seg_end: float, scan: bool) -> bool:
        """Advance within one batch bucket; True when a threshold crossing fired."""
        t0 = self.t
        span = seg_end - t0
        if span <= 0.0:
            self.t = seg_end
            return False
        b = self._bucket(t0)
        n_full = int(span / self.dt + 1e-9)
        if n_full * self.dt > span + 1e-12:
            n_full -= 1
        rem = span - n_full * self.dt

        e = self.e
        mse_acc = 0.0
        steps_done = 0
        crossed = False
        # threshold watches usually fire within a few hundred steps, so start
        # scan chunks small and grow geometrically to avoid wasted draws
        chunk = 512 if scan else _CHUNK
        while steps_done < n_full:
            m = min(chunk, n_full - steps_done)
            chunk = min(chunk * 4, _CHUNK)
            z = self.rng_signal.standard_normal(m)
            path, _ = lfilter([self.b_dt], [1.0, -self.a_dt], z, zi=[self.a_dt * e])
            stop = m
            if scan:
                hits = np.abs(path) >= self.v
                if hits.any():
                    stop = int(np.argmax(hits)) + 1
                    crossed = True
            sq = path[:stop] ** 2
            mse_acc += self.dt * (0.5 * e * e + float(sq[:-1].sum()) + 0.5 * float(sq[-1]))
            if self.record:
                ts = t0 + (steps_done + 1 + np.arange(stop)) * self.dt
                self._record(ts, path[:stop].copy())
            e = float(path[stop - 1])
            steps_done += stop
            if crossed:
                break

        if not crossed and rem > 0.0:
            a_r, b_r = transition_coeffs(self.p, rem)
            e_next = a_r * e + b_r * float(self.rng_signal.standard_normal())
            mse_acc += rem * 0.5 * (e * e + e_next * e_next)
            e = e_next
            if self.record:
                self._record(np.array([seg_end]), np.array([e]))
            t_new = seg_end
        else:
            t_new = t0 + steps_done * self.dt if crossed else seg_end

        if b >= 0:
            self.mse_batches[b] += mse_acc
            self.age_batches[b] += age_penalty_integral(
                self.p, t_new - self.cur_s
            ) - age_penalty_integral(self.p, t0 - self.cur_s)
        self.e = e
        self.t = t_new
        return crossed

    def _advance(self, t_target: float, scan: bool = False) -> bool:
        while self.t < t_target:
            seg_end = min(t_target, self._next_edge(self.t))
            if self._advance_segment(seg_end, scan):
                return True
        return False

    # -- events -----------------------------------------------------------

    def _start_service(self, t: float, s: float, x: float):
        y = float(self.cfg.dist.sample(self.rng_service, 1)[0])
        self.in_service = (s, x, t + y)

    def _handle_sample(self, t: float):
        x_val = self._xhat(self.cur_s, self.cur_x, t) + self.e
        self.sample_times.append(t)
        if self.in_service is not None:
            if self.queue_cap is not None and len(self.queue) >= self.queue_cap:
                self.queue_overflowed = True
            else:
                self.queue.append((t, x_val))
        else:
            self._start_service(t, t, x_val)
        if self.kind == "uniform":
            self.uniform_count += 1
            self.next_sample = self.uniform_count * self.cfg.policy.period
        else:
            self.next_sample = None
            self.watch = False

    def _handle_delivery(self, t: float):
        s_j, x_j, _ = self.in_service
        self.e += self._xhat(self.cur_s, self.cur_x, t) - self._xhat(s_j, x_j, t)
        self.cur_s, self.cur_x = s_j, x_j
        self.deliveries.append((s_j, x_j, t))
        self.in_service = None
        if self.queue:
            s_q, x_q = self.queue.pop(0)
            self._start_service(t, s_q, x_q)
        if self.in_service is None:
            if self.kind == "zero_wait":
                self.next_sample = t
            elif self.kind == "age_optimal":
                wait = max(0.0, self.trigger - (t - self.cur_s))
                self.next_sample = t + wait
            elif self.kind == "mse_optimal":
                self.watch = True

    # -- main loop ---------------------------------------------------------

    def run(self) -> SimResult:
        cfg = self.cfg
        horizon = cfg.horizon
        while self.t < horizon:
            if self.watch and abs(self.e) >= self.v:
                self._handle_sample(self.t)
                continue
            delivery_t = self.in_service[2] if self.in_service is not None else math.inf
            sample_t = self.next_sample if self.next_sample is not None else math.inf
            t_next = min(delivery_t, sample_t, horizon)
            if self.watch:
                if self._advance(t_next, scan=True):
                    continue  # crossing fired; loop top takes the sample
            else:
                self._advance(t_next)
            if t_next >= horizon:
                break
            if delivery_t <= t_next:
                self._handle_delivery(t_next)
            elif sample_t <= t_next:
                self._handle_sample(t_next)
        return self._finish()

    def _finish(self) -> SimResult:
        cfg = self.cfg
        span = cfg.horizon - self.warm
        mse_means = self.mse_batches / self.bw
        age_means = self.age_batches / self.bw
        k = self.n_batches
        time_avg_mse = float(self.mse_batches.sum() / span)
        mse_se = float(mse_means.std(ddof=1) / math.sqrt(k))
        sample_arr = np.asarray(self.sample_times)
        deliver_arr = (
            np.asarray(self.deliveries)
            if self.deliveries
            else np.empty((0, 3))
        )
        post_samples = sample_arr[sample_arr >= self.warm]
        post_deliv = deliver_arr[deliver_arr[:, 2] >= self.warm] if deliver_arr.size else deliver_arr
        avg_rate = post_samples.size / span
        inter = (
            float(np.diff(post_deliv[:, 2]).mean()) if post_deliv.shape[0] > 1 else math.nan
        )
        if math.isinf(cfg.fmax):
            feasible = True
        else:
            feasible = avg_rate <= cfg.fmax * 1.02
        if cfg.policy.kind == "zero_wait" and not zero_wait_feasible(cfg.fmax, cfg.dist.mean()):
            feasible = False
        path = None
        if self.record:
            path = (
                np.concatenate(self.rec_t) if self.rec_t else np.empty(0),
                np.concatenate(self.rec_e) if self.rec_e else np.empty(0),
                np.concatenate(self.rec_xhat) if self.rec_xhat else np.empty(0),
            )
        return SimResult(
            time_avg_mse=time_avg_mse,
            mse_std_error=mse_se,
            avg_rate=float(avg_rate),
            avg_inter_delivery=inter,
            feasible=bool(feasible),
            queue_overflowed=self.queue_overflowed,
            time_avg_age_penalty=float(self.age_batches.sum() / span),
            n_samples=int(post_samples.size),
            n_deliveries=int(post_deliv.shape[0]),
            horizon=cfg.horizon,
            warmup=self.warm,
            mse_batch_means=mse_means,
            age_batch_means=age_means,
            sample_times=sample_arr,
            deliveries=deliver_arr,
            path=path,
        )


def run(cfg: SimConfig, record_path: bool = False) -> SimResult:
    """Simulate one configuration; deterministic given (config, seed)."""
    return _Sim(cfg, record_path).run()


@dataclass
class SweepRow:
    """One (axis value, policy) cell of a sweep."""

    axis_value: float
    policy: str
    time_avg_mse: float = math.nan
    mse_std_error: float = math.nan
    avg_rate: float = math.nan
    feasible: bool = False
    queue_overflowed: bool = False
    beta: float = math.nan
    v: float = math.nan
    error: str | None = None


def _run_cell(cfg: SimConfig) -> SimResult:
    return run(cfg)


def sweep(
    base: SimConfig,
    axis: str,
    values,
    policies=None,
    mc_samples: int = 1_000_000,
    mc_seed: int = 0,
    workers: int = 1,
) -> list[SweepRow]:
    """Re-solve thresholds and simulate each (axis value, policy) cell.

    ``axis`` is "fmax" (rate cap sweep at fixed service law) or "alpha"
    (log-normal scale sweep at the base rate cap).  Zero-wait cells that the
    cap makes infeasible are omitted, matching how such curves are dropped
    from comparisons.  Per-cell failures land in the row's ``error`` column
    and the sweep continues.
    """
    values = [float(v) for v in values]
    if not values:
        raise InputError("sweep needs at least one axis value")
    if sorted(values) != values:
        raise InputError("sweep values must be sorted ascending")
    if axis not in ("fmax", "alpha"):
        raise InputError(f"axis must be 'fmax' or 'alpha', got {axis!r}")
    if policies is None:
        policies = ["uniform", "zero_wait", "mse_optimal", "age_optimal"]
    for kind in policies:
        if kind not in ("uniform", "zero_wait", "mse_optimal", "age_optimal"):
            raise InputError(f"unknown policy kind {kind!r}")

    metrics_cache: dict = {}
    panel_cache: dict = {}

    def model_for(vi: int, value: float):
        if axis == "fmax":
            dist, fmax, key = base.dist, value, "base"
        else:
            dist = ServiceDistribution.lognormal_normalized(value)
            fmax, key = base.fmax, vi
        if key not in metrics_cache:
            metrics_cache[key] = (
                dist,
                compute_metrics(
                    base.params, dist, n_mc=max(mc_samples, 10_000),
                    rng=substream(mc_seed, 7, vi),
                ),
            )
        return metrics_cache[key] + (fmax, key)

    def cell_policy(kind, dist, metrics, fmax, key):
        if kind == "uniform":
            return PolicySpec.uniform(1.0 / fmax), math.nan, math.nan
        if kind == "zero_wait":
            return PolicySpec.zero_wait(), math.nan, math.nan
        cache_key = (kind, key)
        if cache_key not in panel_cache:
            cls = McPanel if kind == "mse_optimal" else AgePanel
            panel_cache[cache_key] = cls(
                base.params, dist, metrics, n_draws=mc_samples, seed=mc_seed
            )
        panel = panel_cache[cache_key]
        if kind == "mse_optimal":
            sol = solve_policy(panel, fmax=fmax)
            return PolicySpec.mse_optimal(sol.beta, sol.v), sol.beta, sol.v
        sol = solve_age_policy(panel, fmax=fmax)
        return PolicySpec.age_optimal(sol.beta, sol.trigger_age), sol.beta, math.nan

    # cells in input order; seeds derived per cell index
    prepared: list[tuple[SweepRow, SimConfig | None]] = []
    cell_index = 0
    for vi, value in enumerate(values):
        dist, metrics, fmax, key = model_for(vi, value)
        for kind in policies:
            row = SweepRow(axis_value=value, policy=kind)
            cfg = None
            if kind == "zero_wait" and not zero_wait_feasible(fmax, dist.mean()):
                cell_index += 1
                continue
            try:
                spec, beta, v = cell_policy(kind, dist, metrics, fmax, key)
                row.beta, row.v = beta, v
                cfg = replace(
                    base,
                    dist=dist,
                    policy=spec,
                    fmax=fmax,
                    seed=base.seed ^ cell_index,
                )
            except Exception as exc:  # per-cell failure: record, keep sweeping
                row.error = f"{type(exc).__name__}: {exc}"
            prepared.append((row, cfg))
            cell_index += 1

    runnable = [(i, cfg) for i, (row, cfg) in enumerate(prepared) if cfg is not None]
    if workers > 1 and len(runnable) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, [cfg for _, cfg in runnable]))
    else:
        results = [_run_cell(cfg) for _, cfg in runnable]
    for (i, _), res in zip(runnable, results):
        row = prepared[i][0]
        row.time_avg_mse = res.time_avg_mse
        row.mse_std_error = res.mse_std_error
        row.avg_rate = res.avg_rate
        row.feasible = res.feasible
        row.queue_overflowed = res.queue_overflowed
    return [row for row, _ in prepared]
