"""Optimal sampling for remote estimation of mean-reverting signals through a queue."""

from .errors import (
    ConfigError,
    DomainError,
    HitTimeoutError,
    InputError,
    OuSamplerError,
    PrecisionError,
    RangeError,
    SolverError,
)
from .expectations import AgePanel, McEstimate, McPanel, f1_hat, f2_hat, threshold_v
from .metrics import (
    ModelMetrics,
    ServiceDistribution,
    age_penalty,
    age_penalty_integral,
    age_trigger,
    compute_metrics,
    expected_error_after_service,
)
from .policies import (
    ErrorPathSource,
    PolicySpec,
    age_optimal_next,
    mse_optimal_next,
    uniform_next,
    wiener_threshold,
    zero_wait_feasible,
    zero_wait_next,
)
from .sde import (
    ErrorProcessParams,
    HitResult,
    OuParams,
    error_variance_at,
    first_hit,
    sample_error_at,
    transition_exact,
)
from .sim import SimConfig, SimResult, SweepRow, run, sweep
from .solvers import (
    AgeSolution,
    SolverReport,
    ThresholdSolution,
    bisect_f,
    bisect_g,
    fixed_point_f,
    newton_f,
    newton_g,
    solve_age_policy,
    solve_policy,
)
from .specfun import (
    SeriesControl,
    erf,
    erfi,
    g_fn,
    g_inv,
    hyp2f2_special,
    r1,
    r1_prime,
    r2,
    value_function_h,
)

__version__ = "0.1.0"
