import numpy as np
import pytest

from hjchar import (BoundaryData, Domain, EpsExample, Problem, SpdForm,
                    derivative_identity_check, dissipation_check,
                    persistence_run, trace, two_well_data, two_well_solution)
from hjchar.characteristics import selection_jumps

EX = EpsExample(epsilon=0.1)
FORM1 = SpdForm.identity(1)
PROB1 = EX.problem()


def _linear_whole_space(b):
    b = np.atleast_1d(np.asarray(b, dtype=float))
    data = BoundaryData(initial=lambda y: np.asarray(y, dtype=float) @ b,
                        lipschitz_bound=float(np.linalg.norm(b)))
    return Problem(domain=Domain.whole_space(b.size), data=data)


def _linear_box(b, lo, hi, form):
    # lateral datum is the exact solution b.x - t H(b), so the box solution
    # coincides with the whole-space one
    b = np.atleast_1d(np.asarray(b, dtype=float))
    hb = form.hamiltonian(b)
    data = BoundaryData(initial=lambda y: np.asarray(y, dtype=float) @ b,
                        lateral=lambda t, y: np.asarray(y, dtype=float) @ b
                        - np.asarray(t, dtype=float) * hb,
                        lipschitz_bound=float(np.linalg.norm(b)) + abs(hb))
    return Problem(domain=Domain.box(lo, hi), data=data)


class TestTrace:
    def test_singular_arc_stays_on_the_ridge(self):
        arc = trace(PROB1, FORM1, 0.9, [0.0], dt=1e-2, t_max=1.9)
        assert arc.status == "max_time"
        assert float(np.max(np.abs(arc.gamma))) <= 1e-6
        ref = -1.0 / (2.0 * (arc.s + 0.1) ** 2)
        assert float(np.max(np.abs(arc.F - ref))) <= 1e-5
        assert float(np.max(np.abs(arc.u - 1.0 / (2.0 * (arc.s + 0.1))))) <= 1e-6

    def test_uniform_time_grid(self):
        arc = trace(PROB1, FORM1, 0.9, [0.0], dt=1e-2, t_max=1.2)
        np.testing.assert_allclose(np.diff(arc.s), 1e-2, atol=1e-12)

    def test_straight_line_through_linear_data(self):
        form = SpdForm.from_matrix([[1.7]])
        prob = _linear_whole_space([0.6])
        arc = trace(prob, form, 0.5, [0.3], dt=1e-2, t_max=1.0)
        assert arc.status == "max_time"
        expected = 0.3 + (arc.s - 0.5) * form.grad_hamiltonian([0.6])[0]
        np.testing.assert_allclose(arc.gamma[:, 0], expected, atol=1e-6)
        np.testing.assert_allclose(arc.p[:, 0], 0.6, atol=1e-6)
        np.testing.assert_allclose(arc.F, 0.0, atol=1e-8)

    def test_outward_velocity_hits_the_boundary(self):
        form = SpdForm.identity(1)
        prob = _linear_box([1.0], [-1.0], [1.0], form)
        arc = trace(prob, form, 0.2, [0.9], dt=1e-2, t_max=2.0)
        assert arc.status == "hit_boundary"
        assert arc.end_s < 0.5
        assert arc.end_gamma[0] >= 1.0 - 1e-9

    def test_rejects_bad_steps(self):
        with pytest.raises(ValueError, match="dt"):
            trace(PROB1, FORM1, 0.9, [0.0], dt=0.0, t_max=1.0)
        with pytest.raises(ValueError, match="t_bar"):
            trace(PROB1, FORM1, 0.9, [0.0], dt=1e-2, t_max=1.0, t_bar=0.9)

    def test_energy_nonpositive_along_arcs(self):
        arc = trace(PROB1, FORM1, 0.9, [0.0], dt=1e-2, t_max=1.5)
        assert np.all(arc.F <= 1e-6)

    def test_lipschitz_steps(self):
        arc = trace(PROB1, FORM1, 0.9, [0.0], dt=1e-2, t_max=1.5)
        steps = np.linalg.norm(np.diff(arc.gamma, axis=0), axis=-1)
        speed_bound = float(np.max(np.abs(arc.p @ FORM1.a)))
        assert np.all(steps <= arc.dt * speed_bound * (1 + 1e-6) + 1e-15)

    def test_gronwall_surrogate_halving_dt(self):
        # smooth start: the two discretizations converge linearly in dt
        def gamma_end(dt):
            arc = trace(PROB1, FORM1, 0.5, [0.5], dt=dt, t_max=0.9)
            return arc.gamma[-1, 0]

        exact_like = gamma_end(1e-3)
        d1 = abs(gamma_end(8e-3) - exact_like)
        d2 = abs(gamma_end(4e-3) - exact_like)
        assert d2 <= 0.75 * d1 + 1e-8


class TestSelectionJumps:
    def test_no_jumps_on_smooth_arc(self):
        arc = trace(PROB1, FORM1, 0.5, [0.5], dt=1e-2, t_max=0.9)
        assert selection_jumps(arc).size == 0

    def test_vertex_count_change_flagged(self):
        form = SpdForm.identity(1)
        wells = np.array([[-1.0], [1.0]])
        data = two_well_data(Domain.whole_space(1), form, wells, 0.5)
        prob = Problem(domain=Domain.whole_space(1), data=data)
        # start slightly off the ridge: the arc is pushed away from x = 0 and
        # the vertex count drops from the initial near-merge
        arc = trace(prob, form, 0.25, [0.02], dt=2e-2, t_max=0.6)
        assert np.all(np.diff(arc.s) > 0)
        jumps = selection_jumps(arc)
        changes = np.nonzero(np.diff(arc.n_vertices))[0] + 1
        assert set(changes).issubset(set(jumps.tolist()))


class TestDerivativeIdentity:
    def test_singular_arc_identity(self):
        # on the ridge u(s, 0) = 1/(2(s+eps)): du/ds = tau + |p_sel|_A^2 exactly
        arc = trace(PROB1, FORM1, 0.9, [0.0], dt=1e-2, t_max=1.9)
        rep = derivative_identity_check(arc, PROB1, FORM1)
        assert rep.n_checked > 50
        assert rep.max_err <= 0.05  # forward-difference error, O(dt)

    def test_constant_solution(self):
        prob = Problem(domain=Domain.whole_space(1),
                       data=BoundaryData(initial=lambda y: np.zeros(np.asarray(y).shape[:-1]),
                                         lower_bound=0.0))
        arc = trace(prob, FORM1, 0.5, [0.0], dt=1e-2, t_max=0.8)
        rep = derivative_identity_check(arc, prob, FORM1)
        assert rep.max_err <= 1e-6

    def test_linear_region_exact(self):
        form = SpdForm.from_matrix([[1.3]])
        prob = _linear_whole_space([0.4])
        arc = trace(prob, form, 0.5, [0.0], dt=1e-2, t_max=0.9)
        rep = derivative_identity_check(arc, prob, form)
        assert rep.max_err <= 1e-6

    def test_linear_scaling_in_dt(self):
        arc1 = trace(PROB1, FORM1, 0.9, [0.0], dt=8e-3, t_max=1.4)
        arc2 = trace(PROB1, FORM1, 0.9, [0.0], dt=4e-3, t_max=1.4)
        e1 = derivative_identity_check(arc1, PROB1, FORM1).max_err
        e2 = derivative_identity_check(arc2, PROB1, FORM1).max_err
        assert e2 <= 0.6 * e1 + 1e-4

    def test_requires_enough_samples(self):
        arc = trace(PROB1, FORM1, 0.9, [0.0], dt=1e-2, t_max=0.905)
        with pytest.raises(ValueError, match="3 samples"):
            derivative_identity_check(arc, PROB1, FORM1)


class TestDissipation:
    def test_sharpness_with_shifted_origin(self):
        # comparing against t_bar = -eps makes the bound an equality
        arc = trace(PROB1, FORM1, 0.9, [0.0], dt=1e-2, t_max=1.9)
        rep = dissipation_check(arc, t_bar=-0.1)
        assert float(np.max(np.abs(rep.per_sample))) <= 1e-4

    def test_general_bound(self):
        arc = trace(PROB1, FORM1, 0.9, [0.0], dt=1e-2, t_max=1.9)
        rep = dissipation_check(arc, t_bar=0.0)
        assert rep.passed
        assert rep.max_excess <= 1e-5

    def test_smooth_start_keeps_energy_nonpositive(self):
        form = SpdForm.from_matrix([[1.3]])
        prob = _linear_whole_space([0.4])
        arc = trace(prob, form, 0.5, [0.0], dt=1e-2, t_max=0.9)
        rep = dissipation_check(arc, t_bar=0.0)
        assert rep.max_excess <= 1e-8

    def test_rescaled_energy_nonincreasing(self):
        arc = trace(PROB1, FORM1, 0.9, [0.0], dt=1e-2, t_max=1.9)
        g = arc.F * arc.s ** 2
        assert np.all(np.diff(g) <= 1e-5 * (1 + np.abs(g[:-1])))

    def test_requires_t_bar_before_start(self):
        arc = trace(PROB1, FORM1, 0.9, [0.0], dt=1e-2, t_max=1.0)
        with pytest.raises(ValueError):
            dissipation_check(arc, t_bar=0.9)

    @pytest.mark.parametrize("seed", range(6))
    def test_random_two_well_arcs(self, seed):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(1, 3))
        b = rng.standard_normal((n, n))
        form = SpdForm.from_matrix(b @ b.T + n * np.eye(n))
        dom = Domain.box(-2.0 * np.ones(n), 2.0 * np.ones(n))
        wells = rng.uniform(-1.2, 1.2, size=(2, n))
        prob = Problem(domain=dom, data=two_well_data(dom, form, wells, 0.4))
        t0 = rng.uniform(0.4, 0.8)
        x0 = rng.uniform(-0.8, 0.8, size=n)
        arc = trace(prob, form, t0, x0, dt=5e-3, t_max=t0 + 0.2)
        rep = dissipation_check(arc, t_bar=0.0)
        assert rep.max_excess <= 1e-5, rep.max_excess


class TestPersistence:
    def test_whole_space_ridge_short_run(self):
        rep = persistence_run(PROB1, FORM1, 0.9, [0.0], dt=1e-2, t_max=1.5)
        assert rep.passed
        assert rep.status == "max_time"
        assert rep.singular_duration == pytest.approx(0.6, abs=1e-9)

    def test_smooth_start_rejected(self):
        with pytest.raises(ValueError, match="not singular"):
            persistence_run(PROB1, FORM1, 0.9, [0.5], dt=1e-2, t_max=1.5)

    def test_box_with_analytic_slices(self):
        form = SpdForm.identity(1)
        dom = Domain.box([-2.0], [2.0])
        wells = np.array([[-1.0], [1.0]])
        prob = Problem(domain=dom, data=two_well_data(dom, form, wells, 0.5))

        def slice_factory(t_bar):
            return lambda y: two_well_solution(form, wells, 0.5, t_bar,
                                               np.atleast_2d(y))

        rep = persistence_run(prob, form, 0.7, [0.0], dt=1e-2, t_max=1.6,
                              slice_factory=slice_factory)
        assert rep.passed
        assert rep.status == "max_time"
        assert rep.rewindow_count >= 1

    def test_box_hopf_backed_smoke(self):
        form = SpdForm.identity(1)
        dom = Domain.box([-2.0], [2.0])
        wells = np.array([[-1.0], [1.0]])
        prob = Problem(domain=dom, data=two_well_data(dom, form, wells, 0.5))
        rep = persistence_run(prob, form, 0.7, [0.0], dt=2e-2, t_max=0.78)
        assert rep.passed
