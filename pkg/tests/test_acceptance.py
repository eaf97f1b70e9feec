"""End-to-end acceptance gate.

Each test prints one summary line (run with ``pytest -s`` to see them inline).
Tolerances are fixed; the suites exercise the closed-form 1-d example, random
SPD problems, and independent brute-force oracles.
"""

import time

import numpy as np
import pytest

from hjchar import (Domain, EpsExample, HopfOptions, Problem, SpdForm,
                    derivative_identity_check, dissipation_check,
                    energy_min_selection, hopf_value, make_slice_window,
                    monotonicity_check, persistence_run, reachable_gradients,
                    trace, two_well_data, two_well_solution)

from oracles import brute_hopf

EPS = 0.1
EX = EpsExample(epsilon=EPS)
FORM1 = SpdForm.identity(1)
PROB1 = EX.problem()


def _report(tag, ok, detail):
    print(f"\n{tag}: {'PASS' if ok else 'FAIL'} ({detail})")


def test_a1_hopf_matches_closed_form():
    t_start = time.monotonic()
    ts = np.linspace(0.1, 2.0, 100)
    xs = np.linspace(-2.0, 2.0, 100)
    worst = 0.0
    for t in ts:
        for x in xs:
            hv = hopf_value(PROB1, FORM1, float(t), [float(x)])
            worst = max(worst, abs(hv.value - float(EX.solution(t, [x]))))
    elapsed = time.monotonic() - t_start
    ok = worst <= 1e-6 and elapsed <= 60.0
    _report("A1 hopf vs closed form", ok,
            f"max_err={worst:.3e}, runtime={elapsed:.1f}s")
    assert worst <= 1e-6
    assert elapsed <= 60.0


def test_a2_energy_minimizing_selection():
    worst = 0.0
    for s in (0.4, 0.9, 1.9):
        verts = reachable_gradients(PROB1, FORM1, s, [0.0])
        sel, _ = energy_min_selection(verts, FORM1)
        tau_ref = -1.0 / (2.0 * (s + EPS) ** 2)
        worst = max(worst, abs(sel.tau - tau_ref), abs(float(sel.p[0])))
    ok = worst <= 1e-6
    _report("A2 selection on the singular line", ok, f"max_err={worst:.3e}")
    assert ok


def test_a3_dissipation_sharpness_and_general_bound():
    arc = trace(PROB1, FORM1, 0.9, [0.0], dt=1e-3, t_max=1.9)
    ratio = ((0.9 + EPS) / (arc.s + EPS)) ** 2
    sharp_err = float(np.max(np.abs(arc.F - ratio * arc.F[0])))
    general = dissipation_check(arc, t_bar=0.0)
    ok = sharp_err <= 1e-4 and general.max_excess <= 1e-5
    _report("A3 dissipation sharpness", ok,
            f"sharp_err={sharp_err:.3e}, general_excess={general.max_excess:.3e}")
    assert sharp_err <= 1e-4
    assert general.max_excess <= 1e-5


def test_a4_persistence_to_t_max():
    rep = persistence_run(PROB1, FORM1, 0.9, [0.0], dt=1e-2, t_max=10.0)
    ok = rep.passed and rep.status == "max_time"
    _report("A4 persistence", ok,
            f"status={rep.status}, duration={rep.singular_duration:.2f}, "
            f"samples={rep.samples}")
    assert rep.passed
    assert rep.status == "max_time"


def test_a5_monotonicity_suite():
    dims = [1, 2, 3, 2, 1]
    worst = -np.inf
    for seed, n in enumerate(dims):
        rng = np.random.default_rng(500 + seed)
        b = rng.standard_normal((n, n))
        form = SpdForm.from_matrix(b @ b.T + n * np.eye(n))
        dom = Domain.box(-2.0 * np.ones(n), 2.0 * np.ones(n))
        wells = rng.uniform(-1.0, 1.0, size=(2, n))
        sharp = 0.4
        prob = Problem(domain=dom, data=two_well_data(dom, form, wells, sharp))

        def u_eval(t, x, form=form, wells=wells):
            return float(two_well_solution(form, wells, sharp, t, np.atleast_1d(x)))

        win = make_slice_window(prob, form, 0.8, np.zeros(n), u_eval=u_eval,
                                rng_seed=seed)

        def u_slice(y, form=form, wells=wells, t_bar=win.t_bar):
            return two_well_solution(form, wells, sharp, t_bar, np.atleast_2d(y))

        opts = HopfOptions(grid_pts=64 if n == 1 else (48 if n == 2 else 24))
        rep = monotonicity_check(prob, form, win, pair_count=500,
                                 rng_seed=1000 + seed, u_on_slice=u_slice,
                                 opts=opts)
        worst = max(worst, rep.max_excess)
    ok = worst <= 1e-7
    _report("A5 joint monotonicity (5 problems x 500 pairs)", ok,
            f"max_excess={worst:.3e}")
    assert ok


def _random_problem(seed):
    rng = np.random.default_rng(9000 + seed)
    n = int(rng.integers(1, 3))
    b = rng.standard_normal((n, n))
    form = SpdForm.from_matrix(b @ b.T + n * np.eye(n))
    wells = rng.uniform(-1.0, 1.0, size=(int(rng.integers(1, 4)), n))
    sharp = float(rng.uniform(0.2, 0.8))
    if seed % 2 == 0:
        dom = Domain.whole_space(n)
    else:
        dom = Domain.box(-2.0 * np.ones(n), 2.0 * np.ones(n))
    prob = Problem(domain=dom, data=two_well_data(dom, form, wells, sharp))
    return prob, form, rng


def test_a6_oracle_equivalence():
    worst_ratio = 0.0
    checks = 0
    for seed in range(10):
        prob, form, rng = _random_problem(seed)
        n = prob.n
        for _ in range(50):
            t = float(rng.uniform(0.2, 1.5))
            x = rng.uniform(-1.5, 1.5, size=n)
            hv = hopf_value(prob, form, t, x)
            ref, h = brute_hopf(prob, form, t, x, total_points=1_000_000)
            tol = 5.0 * h * h * form.lambda_max
            worst_ratio = max(worst_ratio, abs(hv.value - ref) / tol)
            checks += 1
    ok = worst_ratio <= 1.0
    _report("A6 oracle equivalence (10 problems x 50 points)", ok,
            f"worst |err|/tol = {worst_ratio:.3f}, checks={checks}")
    assert ok


def test_a7_derivative_identity_scaling():
    worst = None
    details = []
    # reference arc on the 1-d example plus a two-well arc off the ridge
    form2 = SpdForm.identity(1)
    wells = np.array([[-1.0], [1.0]])
    dom = Domain.box([-2.0], [2.0])
    prob2 = Problem(domain=dom, data=two_well_data(dom, form2, wells, 0.5))
    cases = [(PROB1, FORM1, 0.9, [0.0], 1.4),
             (prob2, form2, 0.5, [0.3], 0.9)]
    ok = True
    for prob, form, t0, x0, t_max in cases:
        e1 = derivative_identity_check(
            trace(prob, form, t0, x0, dt=2e-3, t_max=t_max), prob, form).max_err
        e2 = derivative_identity_check(
            trace(prob, form, t0, x0, dt=1e-3, t_max=t_max), prob, form).max_err
        details.append(f"e(dt)={e1:.2e} -> e(dt/2)={e2:.2e}")
        ok &= e2 <= 0.6 * e1 + 1e-4
    _report("A7 derivative identity dt-scaling", ok, "; ".join(details))
    assert ok
