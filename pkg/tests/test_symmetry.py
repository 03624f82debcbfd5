import numpy as np
import pytest

from symscene.agents import Car, Quadrotor, biased_controller, make_agent
from symscene.automaton import build_automaton, workspace_indices
from symscene.geometry import AffineMap, SingularMapError
from symscene.plans import scenario_from_doc, uniform_chain, zigzag_points, polyline_doc
from symscene.symmetry import (SymmetryError, TiltRotation, canonical_rows, input_map, make_virtual_map,
                               segment_map, symmetrize_controller, transform_rows, validate_symmetry,
                               wrap_angle)

from conftest import load_automaton


def chain(agent="car", n=6):
    return build_automaton(scenario_from_doc(uniform_chain(n, agent=agent)), make_agent(agent))[0]


class TestSegmentMap:
    def test_tr_hand_computed(self):
        # segment pointing north: rotate by -pi/2, then translate dest to the origin
        g = segment_map(Car(), "TR", [0.0, 0.0], [0.0, 5.0])
        assert np.allclose(g([0.0, 5.0, np.pi / 2]), [0, 0, 0])
        assert np.allclose(g([0.0, 0.0, np.pi / 2]), [-5, 0, 0])
        assert np.allclose(g([1.0, 5.0, 0.0]), [0, -1, -np.pi / 2])

    def test_t(self):
        g = segment_map(Car(), "T", [1.0, 1.0], [4.0, 5.0])
        assert np.allclose(g([4.0, 5.0, 0.3]), [0, 0, 0.3])

    def test_quad_velocity_rotates(self):
        g = segment_map(Quadrotor(), "TR", [0, 0, 0], [0, 3, 2])
        assert np.allclose(g([0, 3, 2, 0, 1, 0.5]), [0, 0, 0, 1, 0, 0.5])

    def test_heading_flagged_angular(self):
        assert segment_map(Car(), "TR", [0, 0], [1, 0]).angular.tolist() == [False, False, True]

    def test_unknown_kind(self):
        with pytest.raises(SymmetryError):
            segment_map(Car(), "mirror", [0, 0], [1, 0])

    @pytest.mark.parametrize("kind", ["identity", "T", "TR"])
    def test_rows_match_matrix(self, kind, rng):
        for agent in (Car(), Quadrotor()):
            d = agent.workspace_dim
            src, dest = rng.normal(size=d) * 5, rng.normal(size=d) * 5
            x = rng.normal(size=(7, agent.state_dim))
            g = segment_map(agent, kind, src, dest)
            assert np.allclose(transform_rows(agent, kind, x, src, dest), g(x))
            cs, cd = canonical_rows(agent, kind, src, dest)
            if kind != "identity":
                # gamma carries the segment onto its canonical copy
                ws = list(workspace_indices(agent))
                at_src = np.zeros(agent.state_dim)
                at_src[ws] = src
                assert np.allclose(g(at_src)[ws], cs)
                assert np.allclose(cd, 0)

    def test_wrap(self):
        assert np.allclose(wrap_angle(np.array([3 * np.pi, -np.pi, np.pi])), [np.pi, np.pi, np.pi])


class TestGrouping:
    def test_uniform_chain_single_group(self):
        vm = make_virtual_map("TR", chain())
        assert len(set(vm.rv.values())) == 1

    def test_t_groups_by_direction(self):
        # the zigzag alternates between two directions
        vm = make_virtual_map("T", chain())
        assert len(set(vm.rv.values())) == 2

    def test_identity_is_singletons(self):
        h = chain()
        vm = make_virtual_map("identity", h)
        assert all(vm.rv[m] == m for m in h.modes)

    def test_tolerance(self):
        pts = zigzag_points(2)
        pts[2] = pts[1] + (pts[2] - pts[1]) * (1 + 1e-8)
        h = build_automaton(scenario_from_doc(polyline_doc(pts)), Car())[0]
        assert len(set(make_virtual_map("TR", h).rv.values())) == 1
        assert len(set(make_virtual_map("TR", h, tau=1e-12).rv.values())) == 2

    def test_vid_names(self):
        vm = make_virtual_map("TR", chain())
        assert set(vm.rv.values()) == {"TR(5)"}


class TestValidate:
    @pytest.mark.parametrize("agent", ["car", "quadrotor"])
    @pytest.mark.parametrize("kind", ["T", "TR"])
    def test_pd_passes(self, agent, kind):
        h = chain(agent)
        res = validate_symmetry(make_virtual_map(kind, h), h, n_samples=100, horizon=2.0)
        assert res.passed and res.max_deviation <= 1e-6

    @pytest.mark.parametrize("agent", ["car", "quadrotor"])
    def test_biased_fails_then_symmetrized_passes(self, agent):
        h = chain(agent)
        vm = make_virtual_map("TR", h)
        ag = h.agent
        biased = ag.with_controller(biased_controller(ag))
        bad = validate_symmetry(vm, h, n_samples=100, horizon=2.0, agent=biased)
        assert not bad.passed and bad.max_deviation >= 1e-2
        fixed = ag.with_controller(symmetrize_controller(biased_controller(ag), "TR", ag, input_map(ag, "TR")))
        good = validate_symmetry(vm, h, n_samples=100, horizon=2.0, agent=fixed, tol=1e-9)
        assert good.passed

    def test_reports_worst(self):
        h = chain()
        res = validate_symmetry(make_virtual_map("TR", h), h, n_samples=20, horizon=0.5)
        assert res.worst_mode in h.modes and res.worst_state.shape == (3,)


class TestSymmetrize:
    def test_tilt_rotation_inverse(self, rng):
        b = TiltRotation()
        u = np.c_[rng.uniform(-0.1, 0.1, (10, 2)), rng.uniform(8, 11, 10)]
        src, dest = np.zeros(3), np.array([1.0, 2.0, 0.0])
        assert np.allclose(b(b(u, src, dest), src, dest, inverse=True), u)

    def test_singular_beta(self):
        with pytest.raises(SingularMapError):
            symmetrize_controller(Car().pd_controller, "TR", Car(), AffineMap(np.zeros((2, 2)), np.zeros(2)))

    def test_bad_beta(self):
        with pytest.raises(SymmetryError):
            symmetrize_controller(Car().pd_controller, "TR", Car(), beta=3)

    def test_already_symmetric_unchanged(self, rng):
        car = Car()
        h = symmetrize_controller(car.pd_controller, "TR", car)
        x = rng.normal(size=(20, 3))
        src, dest = np.array([1.0, 2.0]), np.array([4.0, -1.0])
        assert np.allclose(h(x, src, dest), car.pd_controller(x, src, dest))

    def test_on_fixture(self):
        h, _ = load_automaton("s1")
        vm = make_virtual_map("TR", h)
        assert validate_symmetry(vm, h, n_samples=50, horizon=1.0).passed
