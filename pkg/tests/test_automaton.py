import json

import numpy as np
import pytest

from symscene.agents import make_agent
from symscene.automaton import AutomatonError, build_automaton, children, sample_executions
from symscene.geometry import LARGE
from symscene.scenario_io import parse_scenario

from conftest import load_automaton


def scenario(**over):
    doc = {
        "initial_segment": "a",
        "initial_set": {"lo": [-0.1, -0.1, -0.05], "hi": [0.1, 0.1, 0.05]},
        "segments": [{"id": "a", "src": [0, 0], "dest": [5, 0]},
                     {"id": "b", "src": [5, 0], "dest": [10, 0]}],
        "guard_radius": [0.5, 0.5],
        "default_tbound": 8.0,
    }
    doc.update(over)
    return parse_scenario(json.dumps(doc))


class TestBuild:
    def test_lifting(self):
        h, unsafe = build_automaton(scenario(), make_agent("car"))
        g = h.guard[("a", "b")]
        assert g.lo[:2].tolist() == [4.5, -0.5] and g.lo[2] == -LARGE and g.hi[2] == LARGE
        assert children(h, "a") == ["b"] and children(h, "b") == []
        assert unsafe == {"a": (), "b": ()}
        assert np.allclose(h.reset(("a", "b")).M, np.eye(3))

    def test_quad_lifts_planar_plan(self):
        sc = scenario(initial_set={"lo": [0] * 6, "hi": [0.1] * 6})
        h, _ = build_automaton(sc, make_agent("quadrotor"))
        assert h.segments["a"][1].tolist() == [5, 0, 0]
        assert h.guard[("a", "b")].unbounded.tolist() == [False, False, True, True, True, True]

    def test_dimension_mismatch(self):
        with pytest.raises(AutomatonError):
            build_automaton(scenario(), make_agent("quadrotor"))

    def test_heading_guard_rejected(self):
        with pytest.raises(AutomatonError, match="heading"):
            build_automaton(scenario(guard_radius=[0.5, 0.5, 0.1]), make_agent("car"))

    def test_heading_unsafe_rejected(self):
        sc = scenario(unsafe={"a": [{"A": [[0, 0, 1]], "b": [0]}]})
        with pytest.raises(AutomatonError, match="heading"):
            build_automaton(sc, make_agent("car"))

    def test_unknown_mode(self):
        h, _ = build_automaton(scenario(), make_agent("car"))
        with pytest.raises(KeyError):
            children(h, "zz")


class TestSampler:
    def test_reaches_last_mode(self):
        h, unsafe = build_automaton(scenario(), make_agent("car"))
        out = sample_executions(h, unsafe, n=200, dt=0.02)
        # switching inside the guard is optional; runs that drive through it end at the tbound
        assert out.safe and 0 < out.mode_visits["b"] == out.transitions <= 200

    def test_detects_violation(self):
        sc = scenario(unsafe={"a": [{"box": [[2, -1], [3, 1]]}]})
        h, unsafe = build_automaton(sc, make_agent("car"))
        out = sample_executions(h, unsafe, n=100, dt=0.02)
        assert out.n_violations == 100
        assert out.violations[0][1] == "a"

    def test_forced_switch_or_end(self):
        # tbound too short to reach the guard: executions end in mode a
        h, unsafe = build_automaton(scenario(default_tbound=2.0), make_agent("car"))
        out = sample_executions(h, unsafe, n=50, dt=0.02)
        assert out.transitions == 0

    def test_seeded(self):
        h, unsafe = load_automaton("s1")
        a = sample_executions(h, unsafe, n=50, dt=0.05, seed=7, keep_states=64)
        b = sample_executions(h, unsafe, n=50, dt=0.05, seed=7, keep_states=64)
        assert a.transitions == b.transitions
        assert all(np.array_equal(a.states[m], b.states[m]) for m in a.states)

    def test_cycle_capped(self):
        h, unsafe = load_automaton("hexagon_loop_car")
        out = sample_executions(h, unsafe, n=20, dt=0.05, max_transitions=12)
        assert out.transitions <= 20 * 12
