import numpy as np
import pytest

from hjchar import BoundaryData, Domain, Problem, SpdForm, check_compatibility


@pytest.fixture
def box2():
    return Domain.box([-1.0, -2.0], [1.0, 2.0])


@pytest.fixture
def ball2():
    return Domain.ball([0.5, -0.5], 1.5)


def _zero_data():
    return BoundaryData(initial=lambda y: np.zeros(np.asarray(y).shape[:-1]),
                        lateral=lambda t, y: np.zeros(np.asarray(y).shape[:-1]),
                        lipschitz_bound=0.0)


class TestDomain:
    def test_box_validation(self):
        with pytest.raises(ValueError, match="positive length"):
            Domain.box([0.0, 0.0], [1.0, 0.0])

    def test_ball_validation(self):
        with pytest.raises(ValueError, match="radius"):
            Domain.ball([0.0], 0.0)

    def test_contains(self, box2, ball2):
        assert bool(box2.contains([0.0, 0.0]))
        assert not bool(box2.contains([1.5, 0.0]))
        assert bool(ball2.contains([0.5, 0.9]))
        assert not bool(ball2.contains([2.5, -0.5]))
        assert bool(Domain.whole_space(2).contains([1e9, -1e9]))

    @pytest.mark.parametrize("dom_name", ["box2", "ball2"])
    def test_boundary_distance_zero_on_boundary(self, dom_name, request):
        dom = request.getfixturevalue(dom_name)
        rng = np.random.default_rng(1)
        pts = dom.sample_boundary(rng, 200)
        np.testing.assert_allclose(dom.boundary_distance(pts), 0.0, atol=1e-10)

    @pytest.mark.parametrize("dom_name", ["box2", "ball2"])
    def test_boundary_distance_is_1_lipschitz(self, dom_name, request):
        dom = request.getfixturevalue(dom_name)
        rng = np.random.default_rng(2)
        a = rng.uniform(-3, 3, size=(500, 2))
        b = rng.uniform(-3, 3, size=(500, 2))
        gap = np.abs(dom.boundary_distance(a) - dom.boundary_distance(b))
        assert np.all(gap <= np.linalg.norm(a - b, axis=-1) + 1e-12)

    def test_interior_samples_inside(self, box2, ball2):
        rng = np.random.default_rng(3)
        assert bool(np.all(box2.contains(box2.sample_interior(rng, 100))))
        assert bool(np.all(ball2.contains(ball2.sample_interior(rng, 100))))

    def test_whole_space_has_no_lateral_boundary(self):
        with pytest.raises(ValueError):
            Domain.whole_space(2).sample_boundary(np.random.default_rng(0), 5)

    def test_whole_space_boundary_distance_infinite(self):
        assert Domain.whole_space(1).boundary_distance([0.3]) == np.inf


class TestProblem:
    def test_bounded_requires_lateral(self, box2):
        with pytest.raises(ValueError, match="lateral"):
            Problem(domain=box2, data=BoundaryData(initial=lambda y: 0.0 * y[..., 0]))

    def test_phi_dispatches_on_time(self, box2):
        data = BoundaryData(initial=lambda y: np.ones(np.asarray(y).shape[:-1]),
                            lateral=lambda t, y: np.full(np.asarray(y).shape[:-1], 7.0))
        prob = Problem(domain=box2, data=data)
        t = np.array([0.0, 0.5])
        x = np.zeros((2, 2))
        np.testing.assert_allclose(prob.phi(t, x), [1.0, 7.0])

    def test_corner_agreement_detects_mismatch(self, box2):
        data = BoundaryData(initial=lambda y: np.zeros(np.asarray(y).shape[:-1]),
                            lateral=lambda t, y: np.ones(np.asarray(y).shape[:-1]))
        prob = Problem(domain=box2, data=data)
        with pytest.raises(ValueError, match="disagree"):
            prob.validate_corner_agreement(np.random.default_rng(0))

    def test_corner_agreement_passes_when_consistent(self, box2):
        prob = Problem(domain=box2, data=_zero_data())
        assert prob.validate_corner_agreement(np.random.default_rng(0)) <= 1e-12


class TestCompatibility:
    def test_zero_data_compatible(self, box2):
        form = SpdForm.identity(2)
        rep = check_compatibility(Problem(domain=box2, data=_zero_data()),
                                  form, sample_count=1000, rng_seed=0)
        assert rep.max_excess <= 0.0
        assert rep.violations == []
        assert rep.compatible and not rep.vacuous

    def test_linear_in_time_data_violates(self, box2):
        # phi = c t gains value faster than any transport cost for nearby pairs
        c = 50.0
        data = BoundaryData(initial=lambda y: np.zeros(np.asarray(y).shape[:-1]),
                            lateral=lambda t, y: c * np.asarray(t, dtype=float))
        rep = check_compatibility(Problem(domain=box2, data=data),
                                  SpdForm.identity(2), sample_count=1000, rng_seed=0)
        assert rep.max_excess > 0.0
        assert len(rep.violations) > 0
        assert not rep.compatible

    def test_whole_space_vacuous(self):
        prob = Problem(domain=Domain.whole_space(1),
                       data=BoundaryData(initial=lambda y: np.abs(y[..., 0])))
        rep = check_compatibility(prob, SpdForm.identity(1), sample_count=100, rng_seed=0)
        assert rep.vacuous and rep.compatible

    def test_sample_count_validated(self, box2):
        with pytest.raises(ValueError):
            check_compatibility(Problem(domain=box2, data=_zero_data()),
                                SpdForm.identity(2), sample_count=0, rng_seed=0)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_cone_family_compatible_by_construction(self, box2, seed):
        # phi(s, y) = min_i (s + s0) L((y - z_i)/(s + s0)) + c_i obeys the cone
        # condition: each shifted cone does, and a min of compatible data is compatible
        form = SpdForm.from_matrix([[2.0, 0.3], [0.3, 1.0]])
        rng = np.random.default_rng(100 + seed)
        zs = rng.uniform(-1.0, 1.0, size=(4, 2))
        cs = rng.uniform(-0.5, 0.5, size=4)
        s0 = 0.5

        def phi(t, y):
            t = np.asarray(t, dtype=float)[..., None]
            y = np.asarray(y, dtype=float)
            vals = (t + s0) * np.stack(
                [form.lagrangian((y - z) / (t + s0)) for z in zs], axis=-1) + cs
            return np.min(vals, axis=-1)

        data = BoundaryData(initial=lambda y: phi(np.zeros(np.asarray(y).shape[:-1]), y),
                            lateral=phi)
        rep = check_compatibility(Problem(domain=box2, data=data), form,
                                  sample_count=2000, rng_seed=seed)
        assert rep.max_excess <= 1e-9
        assert rep.violations == []
