import math

import numpy as np
import pytest

from adaprox import (
    CompositeProblem,
    RhoSequence,
    SmoothOracle,
    SolverConfig,
    UsageError,
    ergodic_average,
    make_prox_term,
    monitor_check,
    run,
)
from adaprox.adaptive import rho_total
from adaprox.prox import Zero
from adaprox.problems import lasso_problem, lasso_synthetic, quadratic_problem


def half_sq():
    smooth = SmoothOracle(value=lambda x: 0.5 * float(x @ x), gradient=lambda x: x,
                          known_L=1.0)
    return CompositeProblem(smooth=smooth, nonsmooth=make_prox_term(Zero()),
                            known_fstar=0.0, name="half_sq")


class TestFixedStep:
    def test_geometric_decay(self):
        p = half_sq()
        cfg = SolverConfig(engine="fixed", fixed_step=0.5, lambda0=0.5, max_iters=3)
        res = run(p, np.array([1.0]), cfg)
        # x_{k+1} = x_k - 0.5 x_k, so x_k = 2^-k
        assert res.x_final[0] == 2.0**-4
        assert [r.lam for r in res.trace.records] == [0.5, 0.5, 0.5]
        assert [r.F_value for r in res.trace.records] == [0.5 * 4.0**-k for k in (1, 2, 3)]
        assert res.trace.termination == "max_iters"
        assert res.best_F == 0.5 * 4.0**-3

    def test_fixed_needs_step(self):
        with pytest.raises(UsageError):
            run(half_sq(), np.array([1.0]), SolverConfig(engine="fixed"))

    def test_unknown_engine_rejected(self):
        with pytest.raises(UsageError):
            run(half_sq(), np.array([1.0]), SolverConfig(engine="newton"))


def reference_two_steps(problem, x0, lam0):
    """Independent transcription of two branch-rule iterations, mirroring the
    production operation order so agreement must be bit-exact."""
    prox = problem.nonsmooth.prox
    f0, g0 = problem.smooth.value_and_gradient(x0)
    x1 = prox(x0 - lam0 * g0, lam0)

    def one_step(x_prev, x_cur, g_prev, f_prev, lam_prev, rho_used):
        f_cur, g_cur = problem.smooth.value_and_gradient(x_cur)
        dx = x_cur - x_prev
        nd = float(np.linalg.norm(dx))
        L = float(np.linalg.norm(g_cur - g_prev)) / nd
        l = 2.0 * (f_cur - f_prev + float(np.dot(g_cur, -dx))) / nd**2
        if abs(l) < 1e-12 * max(1.0, L**2 * lam_prev):
            l = 0.0
        cap = math.sqrt(1.0 + rho_used) * lam_prev
        if l <= 0.0:
            lam = min(cap, math.inf if L == 0.0 else 1.0 / L)
        else:
            lam = min(cap, math.inf if L == 0.0 else 1.0 / (math.sqrt(2.0) * L),
                      math.sqrt(lam_prev / (2.0 * l)))
        x_next = prox(x_cur - lam * g_cur, lam)
        return x_next, lam, f_cur, g_cur

    rho_1 = 100.0 * math.log(2.0) ** 4 / 2.0**1.1
    x2, lam1, f1, g1 = one_step(x0, x1, g0, f0, lam0, 1e10)
    x3, lam2, f2, g2 = one_step(x1, x2, g1, f1, lam1, rho_1)
    return x1, x2, x3, (lam1, lam2), (f0, f1, f2)


def test_two_iterations_match_reference_bitwise():
    A, b, w = lasso_synthetic(12, 5, seed=21)
    problem = lasso_problem(A, b, w)
    x0 = np.zeros(5)
    lam0 = 0.01
    x1, x2, x3, lams, fs = reference_two_steps(problem, x0.copy(), lam0)

    res = run(problem, x0, SolverConfig(engine="adapgnc", lambda0=lam0, max_iters=2))
    recs = res.trace.records
    assert len(recs) == 2
    assert np.array_equal(res.x_final, x3)
    assert (recs[0].lam, recs[1].lam) == lams
    assert (res.trace.init.f_value, recs[0].f_value, recs[1].f_value) == fs


def test_determinism_bit_identical_traces():
    A, b, w = lasso_synthetic(10, 4, seed=3)
    args = dict(engine="adapgnc", lambda0=0.01, max_iters=30)
    r1 = run(lasso_problem(A, b, w), np.zeros(4), SolverConfig(**args), seed=0)
    r2 = run(lasso_problem(A, b, w), np.zeros(4), SolverConfig(**args), seed=0)
    for a, c in zip(r1.trace.all_records(), r2.trace.all_records()):
        assert (a.f_value, a.F_value, a.lam, a.gradmap_norm) == \
            (c.f_value, c.F_value, c.lam, c.gradmap_norm)
    assert np.array_equal(r1.x_final, r2.x_final)


class TestTermination:
    def test_tol_at_init(self):
        res = run(half_sq(), np.array([0.0]), SolverConfig(max_iters=50))
        assert res.trace.termination == "tol"
        assert res.trace.records == []
        assert res.trace.min_gradmap() == 0.0

    def test_tol_mid_run(self):
        res = run(half_sq(), np.array([4.0]),
                  SolverConfig(max_iters=500, gradmap_tol=1e-6))
        assert res.trace.termination == "tol"
        assert res.trace.records[-1].gradmap_norm <= 1e-6

    def test_stagnation_near_fixed_point(self):
        a = 1e-20
        smooth = SmoothOracle(value=lambda x: 0.5 * float((x - a) @ (x - a)),
                              gradient=lambda x: x - a)
        p = CompositeProblem(smooth=smooth, nonsmooth=make_prox_term(Zero()))
        res = run(p, np.array([0.0]), SolverConfig(max_iters=10))
        assert res.trace.termination == "stagnation"
        assert res.trace.records == []  # stalled before the first full step

    def test_max_seconds(self):
        import time

        def slow_value(x):
            time.sleep(0.005)
            return 0.5 * float(x @ x)

        p = CompositeProblem(
            smooth=SmoothOracle(value=slow_value, gradient=lambda x: x),
            nonsmooth=make_prox_term(Zero()))
        cfg = SolverConfig(engine="fixed", fixed_step=1e-6, lambda0=1e-6,
                           max_iters=10**8, max_seconds=0.05)
        res = run(p, np.array([1.0]), cfg)
        assert res.trace.termination == "max_seconds"

    def test_max_iters_zero_boundary(self):
        p = half_sq()
        res = run(p, np.array([3.0]), SolverConfig(max_iters=0))
        assert res.trace.termination == "max_iters"
        assert res.trace.records == []
        assert res.best_F == res.trace.init.F_value == 4.5
        assert p.counters.n_gradient == 1


def test_oracle_economy_one_gradient_per_iteration():
    p = quadratic_problem([0.5, 1.0, 2.0], seed=1)
    res = run(p, np.ones(3), SolverConfig(engine="adapgnc", max_iters=25))
    iters = len(res.trace.records)
    assert p.counters.n_gradient == iters + 1
    assert p.counters.n_value == iters + 1
    assert p.counters.n_prox == iters + 1
    last = res.trace.records[-1]
    assert (last.n_value, last.n_gradient, last.n_prox) == \
        (iters + 1, iters + 1, iters + 1)


def test_min_gradmap_matches_independent_scan():
    p = quadratic_problem([0.3, 1.0, 2.5], seed=5)
    res = run(p, np.ones(3), SolverConfig(max_iters=40))
    scan = min(r.gradmap_norm for r in [res.trace.init] + res.trace.records)
    assert res.trace.min_gradmap() == scan
    for r in res.trace.all_records():
        assert res.trace.min_gradmap() <= r.gradmap_norm


class TestErgodicAverage:
    def test_weighted_mean_two_records(self):
        p = half_sq()
        cfg = SolverConfig(engine="fixed", fixed_step=0.5, lambda0=0.5,
                           max_iters=2, keep_iterates=True)
        res = run(p, np.array([1.0]), cfg)
        xs = [r.x for r in res.trace.records]
        # equal weights here, so the plain mean
        assert ergodic_average(res.trace)[0] == (xs[0][0] + xs[1][0]) / 2.0

    def test_unequal_weights(self):
        p = quadratic_problem([1.0, 2.0], seed=2)
        res = run(p, np.ones(2),
                  SolverConfig(engine="adapgnc", max_iters=10, keep_iterates=True))
        recs = res.trace.records
        expect = sum(r.lam * r.x for r in recs) / sum(r.lam for r in recs)
        assert np.allclose(ergodic_average(res.trace), expect, rtol=1e-14)

    def test_requires_retained_iterates(self):
        p = half_sq()
        res = run(p, np.array([1.0]),
                  SolverConfig(engine="fixed", fixed_step=0.5, max_iters=2))
        with pytest.raises(UsageError):
            ergodic_average(res.trace)


class TestMonitorIntegration:
    def test_clean_run_passes_all_checks(self):
        p = quadratic_problem([0.5, 1.0, 2.0], seed=7)
        cfg = SolverConfig(engine="adapgnc", max_iters=60, monitor=True)
        res = run(p, np.ones(3), cfg)
        assert res.report is not None and res.report.passed
        assert res.report.skipped == []
        for c in res.report.checks:
            assert c.n_checked >= 1

    def test_small_rho_makes_bounds_nonvacuous(self):
        p = quadratic_problem([0.5, 1.0, 2.0], seed=7)
        rho = RhoSequence.custom([1.0, 0.5, 0.25])
        cfg = SolverConfig(engine="adapgnc", rho=rho, max_iters=50, monitor=True)
        res = run(p, np.ones(3), cfg)
        rep = res.report
        assert rep.passed
        assert math.isfinite(rep.lam_upper) and rep.lam_upper == 1.0 * math.exp(1.75 / 2)
        assert rep.omega_lower > 0.0
        assert math.isfinite(rep.S)

    def test_unmonitored_engine_rejected(self):
        p = half_sq()
        res = run(p, np.array([1.0]),
                  SolverConfig(engine="fixed", fixed_step=0.5, max_iters=3))
        with pytest.raises(UsageError):
            monitor_check(res.trace, p, 0.0)

    def test_corrupted_trace_flagged(self):
        # rewrite one recorded curvature estimate so the step it certified
        # no longer satisfies the step condition
        p = quadratic_problem([0.5, 1.0, 2.0], seed=7)
        cfg = SolverConfig(engine="adapgnc", max_iters=30, keep_iterates=True)
        res = run(p, np.ones(3), cfg)
        res.trace.records[2].l_k = 2.0
        rep = monitor_check(res.trace, p, rho_total(RhoSequence.rho2()))
        assert not rep.check("step_condition").passed
        assert rep.check("step_condition").first_failure[0] == 3
        assert not rep.passed

    def test_omega_recursion_agrees_with_product_form(self):
        p = quadratic_problem([0.5, 2.0], seed=9)
        rho = RhoSequence.custom([0.5] + [0.01] * 99)
        cfg = SolverConfig(engine="adapgnc", rho=rho, max_iters=100, monitor=True)
        res = run(p, np.ones(2), cfg)
        recs = res.trace.records
        lam = [1.0] + [r.lam for r in recs]
        rhos = [r.rho_used for r in recs]
        # direct product form, numerically fine for these small rho values
        omega = 1.0
        for k in range(1, len(lam)):
            r_km2 = rhos[k - 2] if k >= 2 else 0.0
            omega *= lam[k] ** 2 / (lam[k - 1] ** 2 * (1.0 + rhos[k - 1])
                                    * math.sqrt(1.0 + r_km2))
            assert omega >= res.report.omega_lower * (1 - 1e-12)
        assert res.report.passed


def test_bb_engine_runs_on_convex_quadratic():
    p = quadratic_problem([0.5, 1.0, 3.0], seed=4)
    res = run(p, np.ones(3), SolverConfig(engine="adapgnc-bb", lambda0=0.1,
                                          max_iters=80, gradmap_tol=1e-10))
    assert res.trace.termination in ("tol", "stagnation")
    assert res.best_F <= 1e-12


def test_gd_ls_engine_descends():
    p = quadratic_problem([1.0, 5.0], seed=6)
    res = run(p, np.ones(2), SolverConfig(engine="gd-ls", lambda0=1e-3, max_iters=50))
    Fs = [r.F_value for r in res.trace.all_records()]
    assert all(b <= a + 1e-15 for a, b in zip(Fs, Fs[1:]))


def test_adgd_engine_converges():
    p = quadratic_problem([0.5, 1.0, 2.0], seed=8)
    res = run(p, np.ones(3), SolverConfig(engine="adgd", lambda0=0.1,
                                          max_iters=200, gradmap_tol=1e-9))
    assert res.trace.termination in ("tol", "stagnation")


def test_keep_iterates_retains_vectors():
    p = half_sq()
    on = run(p, np.array([1.0]), SolverConfig(engine="fixed", fixed_step=0.5,
                                              max_iters=2, keep_iterates=True))
    off = run(p, np.array([1.0]), SolverConfig(engine="fixed", fixed_step=0.5,
                                               max_iters=2))
    assert on.trace.init.x is not None and on.trace.records[0].grad is not None
    assert off.trace.init.x is None and off.trace.records[0].x is None
