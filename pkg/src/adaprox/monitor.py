"""Runtime verification of the descent and step-size inequalities that back
the adaptive engines, replayed over an immutable solver trace.

Checks are named

  (a) fstar_free_descent   weighted objective + displacement decrease
  (b) step_condition       lam^2 L^2 + (lam^2/lam_prev) l <= 1
  (c) step_bounds          min(lam0, 1/(2L)) <= lam_k <= lam0 exp(P/2)
  (d) omega_lower          recursion weights stay above their proven floor
  (e) lyapunov             V_k descent and the 2 V_0/(omega lam k) complexity
                           bound (plus its tighter realized-weight form)
  (f) sum_bound            running sum lam_i^2 ||grad f + h'||^2 <= S

Checks whose inputs are unavailable (no certified L, no reference optimum,
iterates not retained) are reported as skipped, never silently passed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .core import CompositeProblem, UsageError
from .prox import implied_subgradient
from .solver import MONITORED_ENGINES, Trace


@dataclass
class CheckResult:
    name: str
    passed: bool
    n_checked: int
    worst_slack: float  # max over k of lhs - rhs_with_tolerance; <= 0 passes
    first_failure: Optional[Tuple[int, float, float]] = None  # (k, lhs, rhs)

    def observe(self, k: int, lhs: float, rhs: float, tol: float) -> None:
        self.n_checked += 1
        margin = lhs - (rhs + tol)
        if margin > self.worst_slack:
            self.worst_slack = margin
        if margin > 0.0 and self.first_failure is None:
            self.passed = False
            self.first_failure = (k, lhs, rhs)


def _new_check(name: str) -> CheckResult:
    return CheckResult(name=name, passed=True, n_checked=0, worst_slack=-math.inf)


@dataclass
class MonitorReport:
    checks: List[CheckResult] = field(default_factory=list)
    skipped: List[str] = field(default_factory=list)
    P: float = math.nan
    lam_lower: float = math.nan
    lam_upper: float = math.nan
    omega_lower: float = math.nan
    S: float = math.nan

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary_lines(self) -> List[str]:
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            extra = ""
            if c.first_failure is not None:
                k, lhs, rhs = c.first_failure
                extra = f" (k={k}: lhs={lhs:.6e} > rhs={rhs:.6e})"
            lines.append(f"{c.name}: {status} [{c.n_checked} checks, "
                         f"worst slack {c.worst_slack:.3e}]{extra}")
        for name in self.skipped:
            lines.append(f"{name}: skipped (inputs unavailable)")
        return lines


def _safe_exp(z: float) -> float:
    return math.inf if z > 700.0 else math.exp(z)


def monitor_check(trace: Trace, problem: Optional[CompositeProblem] = None,
                  rho_total_value: Optional[float] = None, *,
                  fstar: Optional[float] = None,
                  known_L: Optional[float] = None) -> MonitorReport:
    """Replay every inequality the trace's engine is supposed to maintain.

    Per-iteration tolerance is 1e-9 * (1 + |F(x_{k-1})|). Only traces of the
    branch-rule engines are accepted; other engines carry no such guarantees.
    """
    if trace.engine not in MONITORED_ENGINES:
        raise UsageError(
            f"monitor covers engines {MONITORED_ENGINES}, got {trace.engine!r}")
    if known_L is None and problem is not None:
        known_L = problem.smooth.known_L
    if fstar is None and problem is not None:
        fstar = problem.known_fstar

    recs = trace.records
    K = len(recs)
    lam0 = trace.lambda0
    # Index arrays over k = 0..K.
    lam = np.empty(K + 1)
    F = np.empty(K + 1)
    G = np.empty(K + 1)
    lam[0], F[0], G[0] = lam0, trace.init.F_value, trace.init.gradmap_norm
    for r in recs:
        lam[r.k], F[r.k], G[r.k] = r.lam, r.F_value, r.gradmap_norm

    report = MonitorReport()

    def tol(k: int) -> float:
        return 1e-9 * (1.0 + abs(F[k - 1]))

    # (a) objective-plus-displacement descent, free of F_*.
    ca = _new_check("fstar_free_descent")
    for k in range(1, K + 1):
        w = lam[k - 1] / (2.0 * lam[k] ** 2)
        lhs = F[k] + w * (lam[k] * G[k]) ** 2
        rhs = F[k - 1] + w * (lam[k - 1] * G[k - 1]) ** 2 - 0.5 * lam[k - 1] * G[k - 1] ** 2
        ca.observe(k, lhs, rhs, tol(k))
    report.checks.append(ca)

    # (b) the step condition every emitted lambda must satisfy.
    cb = _new_check("step_condition")
    for r in recs:
        k = r.k
        lhs = r.lam ** 2 * r.L_k ** 2 + (r.lam ** 2 / lam[k - 1]) * r.l_k
        cb.observe(k, lhs, 1.0, tol(k))
    report.checks.append(cb)

    # (c) two-sided step bounds; needs a certified L and the rho total P.
    if known_L is not None and rho_total_value is not None:
        report.P = rho_total_value
        report.lam_lower = min(lam0, 1.0 / (2.0 * known_L))
        report.lam_upper = lam0 * _safe_exp(rho_total_value / 2.0)
        cc = _new_check("step_bounds")
        for k in range(K + 1):
            # lower bound: lam_k >= lam_lower, phrased as lhs <= rhs
            cc.observe(k, report.lam_lower, lam[k], 1e-12 * max(1.0, report.lam_lower))
            cc.observe(k, lam[k], report.lam_upper, 1e-12 * max(1.0, lam0))
        report.checks.append(cc)
    else:
        report.skipped.append("step_bounds")

    # (d) Lyapunov weights by the recursion (the product form over/underflows).
    omega = np.empty(K + 1)
    omega[0] = 1.0
    rho_used = {r.k: r.rho_used for r in recs}
    for k in range(1, K + 1):
        rho_km1 = rho_used[k]                       # consumed by lambda_k
        rho_km2 = rho_used[k - 1] if k >= 2 else 0.0  # rho_{-1} = 0
        omega[k] = omega[k - 1] * lam[k] ** 2 / (
            lam[k - 1] ** 2 * (1.0 + rho_km1) * math.sqrt(1.0 + rho_km2))
    if known_L is not None and rho_total_value is not None:
        report.omega_lower = (report.lam_lower ** 2 / lam0 ** 2) * _safe_exp(
            -1.5 * rho_total_value)
        cd = _new_check("omega_lower")
        for k in range(1, K + 1):
            cd.observe(k, report.omega_lower, omega[k],
                       1e-12 * max(1.0, report.omega_lower))
        report.checks.append(cd)
    else:
        report.skipped.append("omega_lower")

    # (e) Lyapunov descent and the complexity bound; needs a reference optimum.
    if fstar is not None and K >= 1:
        V = np.empty(K + 1)
        V[0] = F[0] - fstar + 0.5 * lam0 * G[0] ** 2
        for k in range(1, K + 1):
            w = lam[k - 1] / (2.0 * lam[k] ** 2)
            V[k] = omega[k] * (F[k] - fstar + w * (lam[k] * G[k]) ** 2)
        ce = _new_check("lyapunov_descent")
        for k in range(1, K + 1):
            ce.observe(k, V[k], V[k - 1] - 0.5 * omega[k] * lam[k - 1] * G[k - 1] ** 2,
                       tol(k))
        report.checks.append(ce)

        cf_thm = _new_check("complexity_bound")
        cf_real = _new_check("complexity_bound_realized")
        have_consts = known_L is not None and rho_total_value is not None
        min_gsq = math.inf
        wsum = 0.0
        for k in range(1, K + 1):
            min_gsq = min(min_gsq, G[k - 1] ** 2)
            wsum += omega[k] * lam[k - 1]
            if have_consts:
                denom = report.omega_lower * report.lam_lower * k
                bound = math.inf if denom == 0.0 else 2.0 * V[0] / denom
                cf_thm.observe(k, min_gsq, bound, tol(k))
            cf_real.observe(k, min_gsq, 2.0 * V[0] / wsum, tol(k))
        if have_consts:
            report.checks.append(cf_thm)
        else:
            report.skipped.append("complexity_bound")
        report.checks.append(cf_real)
    else:
        report.skipped.extend(["lyapunov_descent", "complexity_bound",
                               "complexity_bound_realized"])

    # (f) bound on the running weighted subgradient-residual sum; needs the
    # iterates and gradients retained plus the constants above.
    have_vectors = K >= 1 and all(r.x is not None and r.grad is not None
                                  for r in [trace.init] + recs)
    if (fstar is not None and known_L is not None and rho_total_value is not None
            and have_vectors):
        V0 = F[0] - fstar + 0.5 * lam0 * G[0] ** 2
        Lam, lo, om = report.lam_upper, report.lam_lower, report.omega_lower
        if math.isinf(Lam) or om == 0.0:
            report.S = math.inf
        else:
            report.S = (Lam ** 2 / lo) * (2.0 * Lam ** 2 / (om * lo ** 2) * V0
                                          + 2.0 * (F[0] - fstar))
        cg = _new_check("sum_bound")
        xs = {0: trace.init.x}
        gs = {0: trace.init.grad}
        for r in recs:
            xs[r.k], gs[r.k] = r.x, r.grad
        running = 0.0
        for k in range(1, K + 1):
            hp = implied_subgradient(xs[k - 1], xs[k], gs[k - 1], lam[k - 1])
            running += lam[k] ** 2 * float(np.sum((gs[k] + hp) ** 2))
            cg.observe(k, running, report.S, tol(k))
        report.checks.append(cg)
    else:
        report.skipped.append("sum_bound")

    return report
