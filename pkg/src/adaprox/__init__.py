"""Adaptive proximal-gradient toolkit: curvature-driven step engines, baseline
solvers, built-in composite test problems, and a runtime monitor for the
descent inequalities the engines are proven to maintain."""

from .adaptive import (
    CurvaturePair,
    RhoSequence,
    StepState,
    adapgnc_step,
    adgd_step,
    armijo_search,
    bb_step,
    estimate_curvature,
    relaxed_step,
    rho_total,
    rho_value,
)
from .core import (
    CompositeProblem,
    DegenerateStep,
    EvalCounters,
    LineSearchFailed,
    NonconvexDetected,
    NumericalDomainError,
    ProxTerm,
    SmoothOracle,
    UsageError,
    composite_value,
    finite_difference_gradient,
)
from .monitor import MonitorReport, monitor_check
from .prox import (
    L1,
    BoxIndicator,
    L2Squared,
    NonnegIndicator,
    Zero,
    gradient_mapping,
    implied_subgradient,
    make_prox_term,
    prox_apply,
    prox_value,
)
from .solver import (
    IterationRecord,
    RunResult,
    SolverConfig,
    Trace,
    ergodic_average,
    init_first_step,
    run,
)

__all__ = [name for name in dir() if not name.startswith("_")]
