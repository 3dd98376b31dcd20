"""Step-size engines and curvature estimation.

Index convention: at iteration k an engine consumes rho_{k-1}; rho_k is only
generated after lambda_k is known, so the ratio-capped sequence can use
lambda_k / lambda_{k-1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaincc

from .core import (
    DegenerateStep,
    LineSearchFailed,
    NonconvexDetected,
    SmoothOracle,
    UsageError,
    Vector,
)

#: Relative threshold below which ||x_cur - x_prev|| makes the secant
#: estimators meaningless and the run is declared stationary.
DEGENERACY_REL = 1e-15

#: Below this relative magnitude the lower-curvature estimate is pure
#: cancellation noise and is snapped to 0 (the convex branch is the limit).
L_LOWER_SNAP = 1e-12

#: The l_k numerator is a difference of O(|f|) quantities; once it drops below
#: this multiple of their magnitudes it is double-precision round-off, and
#: dividing it by a vanishing ||dx||^2 would fabricate arbitrary curvature.
L_NUMERATOR_SNAP = 1e-13

ARMIJO_BASE = 1e-3
ARMIJO_MAX_HALVINGS = 60


@dataclass(frozen=True)
class CurvaturePair:
    """Local secant estimates: L_k of the Lipschitz constant, l_k of the
    lower curvature (negative where local convexity is strict)."""

    L_k: float
    l_k: float


@dataclass
class StepState:
    """Rolling two-iterate window consumed by the step engines."""

    k: int
    x_prev: Vector
    x_cur: Vector
    grad_prev: Vector
    grad_cur: Vector
    f_prev: float
    f_cur: float
    lambda_prev: float
    lambda_prevprev: float


def estimate_curvature(state: StepState) -> CurvaturePair:
    """Secant curvature estimates from consecutive iterates.

    L_k = ||dg|| / ||dx||;  l_k = 2 (f_cur - f_prev + <grad_cur, -dx>) / ||dx||^2.
    Raises DegenerateStep when ||dx|| is below the stationarity threshold.
    """
    dx = state.x_cur - state.x_prev
    nd = float(np.linalg.norm(dx))
    if nd <= DEGENERACY_REL * (1.0 + float(np.linalg.norm(state.x_cur))):
        raise DegenerateStep(f"||x_cur - x_prev|| = {nd} at k={state.k}")
    L_k = float(np.linalg.norm(state.grad_cur - state.grad_prev)) / nd
    inner = float(np.dot(state.grad_cur, -dx))
    num = state.f_cur - state.f_prev + inner
    cancel_scale = abs(state.f_cur) + abs(state.f_prev) + abs(inner)
    if abs(num) < L_NUMERATOR_SNAP * cancel_scale:
        num = 0.0
    l_k = 2.0 * num / nd**2
    if abs(l_k) < L_LOWER_SNAP * max(1.0, L_k**2 * state.lambda_prev):
        l_k = 0.0
    return CurvaturePair(L_k=L_k, l_k=l_k)


def _check_step_inputs(lambda_prev: float, rho_used: float) -> None:
    if not (lambda_prev > 0.0 and math.isfinite(lambda_prev)):
        raise UsageError(f"lambda_prev must be positive and finite, got {lambda_prev}")
    if not (rho_used >= 0.0 and math.isfinite(rho_used)):
        raise UsageError(f"rho must be nonnegative and finite, got {rho_used}")


def adapgnc_step(lambda_prev: float, rho_used: float, curv: CurvaturePair) -> float:
    """Branching step rule: aggressive 1/L_k where local convexity holds,
    conservative otherwise. c/0 = +inf, so a zero estimate leaves the growth
    cap binding."""
    _check_step_inputs(lambda_prev, rho_used)
    cap = math.sqrt(1.0 + rho_used) * lambda_prev
    if curv.l_k <= 0.0:
        inv_L = math.inf if curv.L_k == 0.0 else 1.0 / curv.L_k
        return min(cap, inv_L)
    inv_sqrt2_L = math.inf if curv.L_k == 0.0 else 1.0 / (math.sqrt(2.0) * curv.L_k)
    return min(cap, inv_sqrt2_L, math.sqrt(lambda_prev / (2.0 * curv.l_k)))


def relaxed_step(lambda_prev: float, rho_used: float, curv: CurvaturePair) -> float:
    """Relaxed rule: lambda = min{cap, ([L_k^2 + l_k/lambda_prev]_+)^(-1/2)}."""
    _check_step_inputs(lambda_prev, rho_used)
    cap = math.sqrt(1.0 + rho_used) * lambda_prev
    u = max(curv.L_k**2 + curv.l_k / lambda_prev, 0.0)
    return min(cap, math.inf if u == 0.0 else 1.0 / math.sqrt(u))


def bb_step(lambda_prev: float, rho_used: float, dx: Vector, dg: Vector) -> float:
    """Short Barzilai-Borwein step under the growth cap. Convex-setting only:
    a nonpositive secant product is reported, not papered over."""
    _check_step_inputs(lambda_prev, rho_used)
    nd = float(np.linalg.norm(dx))
    if nd == 0.0:
        raise UsageError("bb_step requires ||dx|| > 0")
    cap = math.sqrt(1.0 + rho_used) * lambda_prev
    dg_sq = float(np.dot(dg, dg))
    if dg_sq == 0.0:
        return cap
    num = float(np.dot(dg, dx))
    if num <= 0.0:
        raise NonconvexDetected(f"<dg, dx> = {num} <= 0 with ||dg|| > 0")
    return min(cap, num / dg_sq)


def adgd_step(lambda_prev: float, lambda_prevprev: float, curv: CurvaturePair) -> float:
    """Baseline ratio-capped rule: min{sqrt(1 + lam_prev/lam_prevprev) lam_prev, 1/(2 L_k)}."""
    if not (lambda_prev > 0.0 and lambda_prevprev > 0.0):
        raise UsageError("both previous step sizes must be positive")
    theta = lambda_prev / lambda_prevprev
    inv_2L = math.inf if curv.L_k == 0.0 else 1.0 / (2.0 * curv.L_k)
    return min(math.sqrt(1.0 + theta) * lambda_prev, inv_2L)


def armijo_search(oracle: SmoothOracle, x: Vector, grad: Vector, f_x: Optional[float] = None):
    """Backtracking: smallest m >= 0 with
    f(x - 1e-3 2^-m grad) <= f(x) - 1e-3 2^-(m+1) ||grad||^2.

    Returns (step, m). A cap of 60 halvings (step ~1e-21, below the double
    resolution of the decrease test) raises LineSearchFailed.
    """
    g_sq = float(np.dot(grad, grad))
    if g_sq == 0.0:
        raise UsageError("armijo_search requires a nonzero gradient")
    if f_x is None:
        f_x = float(oracle.value(x))
    for m in range(ARMIJO_MAX_HALVINGS + 1):
        step = ARMIJO_BASE * 2.0**-m
        if float(oracle.value(x - step * grad)) <= f_x - 0.5 * step * g_sq:
            return step, m
    raise LineSearchFailed(f"no sufficient decrease within {ARMIJO_MAX_HALVINGS} halvings")


# ---------------------------------------------------------------------------
# Growth-control sequences


@dataclass(frozen=True)
class RhoSequence:
    """Nonnegative summable sequence regulating step growth.

    kind: "rho1" | "rho2" | "zero" | "custom".  rho1/rho2 follow the
    100 (ln(k+1))^4 / (k+1)^1.1 profile for k >= 1, rho1 additionally capped
    by the realized step ratio. "custom" takes its values verbatim from
    ``table`` (zero beyond it), including index 0.
    """

    kind: str
    rho0: float = 1e10
    table: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("rho1", "rho2", "zero", "custom"):
            raise UsageError(f"unknown rho kind {self.kind!r}")
        if self.rho0 < 0.0:
            raise UsageError("rho0 must be nonnegative")
        if self.kind == "custom":
            if self.table is None:
                raise UsageError("custom rho sequence needs a table")
            tab = tuple(float(v) for v in self.table)
            if any(v < 0.0 for v in tab):
                raise UsageError("rho values must be nonnegative")
            object.__setattr__(self, "table", tab)

    @staticmethod
    def rho1(rho0: float = 1e10) -> "RhoSequence":
        return RhoSequence("rho1", rho0=rho0)

    @staticmethod
    def rho2(rho0: float = 1e10) -> "RhoSequence":
        return RhoSequence("rho2", rho0=rho0)

    @staticmethod
    def zero(rho0: float = 0.0) -> "RhoSequence":
        return RhoSequence("zero", rho0=rho0)

    @staticmethod
    def custom(values) -> "RhoSequence":
        values = tuple(float(v) for v in values)
        return RhoSequence("custom", rho0=values[0] if values else 0.0, table=values)


def _rho2_term(k: int) -> float:
    return 100.0 * math.log(k + 1) ** 4 / (k + 1) ** 1.1


def rho_value(seq: RhoSequence, k: int, lambda_ratio: Optional[float] = None) -> float:
    """Value rho_k; rho1 for k >= 1 needs the realized ratio lambda_k/lambda_{k-1}."""
    if k < 0:
        raise UsageError("k must be nonnegative")
    if seq.kind == "custom":
        return seq.table[k] if k < len(seq.table) else 0.0
    if k == 0:
        return seq.rho0
    if seq.kind == "zero":
        return 0.0
    if seq.kind == "rho2":
        return _rho2_term(k)
    if lambda_ratio is None:
        raise UsageError("rho1 requires lambda_ratio = lambda_k / lambda_{k-1} for k >= 1")
    if not lambda_ratio > 0.0:
        raise UsageError("lambda_ratio must be positive")
    return min(lambda_ratio, _rho2_term(k))


_RHO2_PARTIAL_TERMS = 100_000


def _rho2_series_upper() -> float:
    # Partial sum plus an integral tail bound. With u = ln(x+1) the tail
    # integral becomes 1e7 * Integral_{s0}^inf s^4 exp(-s) ds, s0 = 0.1 ln(K+1);
    # the summand is decreasing from k ~ 40 on, so the integral dominates the tail.
    partial = 0.0
    for k in range(_RHO2_PARTIAL_TERMS, 0, -1):  # small-to-large magnitudes
        partial += _rho2_term(k)
    K = _RHO2_PARTIAL_TERMS
    s0 = 0.1 * math.log(K + 1)
    tail = 100.0 * 1e5 * math.gamma(5) * float(gammaincc(5, s0))
    return partial + tail


_RHO2_SERIES_UPPER_CACHE: Optional[float] = None


def rho_total(seq: RhoSequence) -> float:
    """Upper bound on P = sum_k rho_k.

    For rho1 the realized sum is data dependent; the rho2 total bounds it
    from above (each rho1 term is capped by the rho2 term).
    """
    global _RHO2_SERIES_UPPER_CACHE
    if seq.kind == "zero":
        return seq.rho0
    if seq.kind == "custom":
        return float(sum(seq.table))
    if _RHO2_SERIES_UPPER_CACHE is None:
        _RHO2_SERIES_UPPER_CACHE = _rho2_series_upper()
    return seq.rho0 + _RHO2_SERIES_UPPER_CACHE
