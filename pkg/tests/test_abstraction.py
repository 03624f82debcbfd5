from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symscene.abstraction import abstract, split_mode
from symscene.agents import make_agent
from symscene.automaton import build_automaton
from symscene.plans import k_length_plan, random_graph_doc, scenario_from_doc, uniform_chain
from symscene.symmetry import make_virtual_map

from conftest import load_automaton


def build(doc, agent="car"):
    return build_automaton(scenario_from_doc(doc), make_agent(agent))


def exhaust(a):
    """Split every splittable mode until none is left."""
    while True:
        wide = [v for v in a.vmodes if len(a.members[v]) > 1]
        if not wide:
            return a
        for v in wide:
            a = split_mode(v, a).abstraction


def check_bijection(a, h):
    assert a.n_modes == len(h.modes)
    assert sorted(m for v in a.vmodes for m in a.members[v]) == sorted(h.modes)
    got = Counter(p.edge for ps in a.pieces.values() for p in ps)
    assert got == Counter(h.edges)
    for (u, w), ps in a.pieces.items():
        for p in ps:
            assert a.rv[p.edge[0]] == u and a.rv[p.edge[1]] == w


class TestTransport:
    @pytest.mark.parametrize("name,agent", [("s1", "car"), ("graph_branch_car", "car"), ("s1_quad", "quadrotor")])
    def test_guard_and_reset(self, name, agent, rng):
        h, unsafe = load_automaton(name)
        vm = make_virtual_map("TR", h)
        a = abstract(vm, h, unsafe)
        for e, piece in a.edge_pieces.items():
            g = h.guard[e]
            lo = np.where(g.unbounded, -3.0, g.lo)
            hi = np.where(g.unbounded, 3.0, g.hi)
            x = lo + rng.random((50, h.agent.state_dim)) * (hi - lo)
            y = vm.gamma[e[0]](x)
            assert np.all(piece.guard.contains(y, tol=1e-9))
            assert np.allclose(piece.reset(y), vm.gamma[e[1]](x))

    def test_unsafe_and_initial(self, rng):
        h, unsafe = load_automaton("s1")
        vm = make_virtual_map("TR", h)
        a = abstract(vm, h, unsafe)
        (poly,) = unsafe["s004"]
        bb = poly.bbox
        x = np.c_[bb.lo[:2] + rng.random((50, 2)) * bb.width[:2], rng.uniform(-3, 3, 50)]
        v = a.rv["s004"]
        assert any(np.all(p.contains(vm.gamma["s004"](x), tol=1e-9)) for p in a.unsafe[v])
        theta = h.initial[1]
        assert np.all(a.initial[1].contains(vm.gamma[h.initial[0]](theta.vertices()), tol=1e-9))

    def test_tbound_is_max(self):
        h, unsafe = load_automaton("three_lengths_car")
        a = abstract(make_virtual_map("TR", h), h, unsafe)
        for v in a.vmodes:
            assert a.tbound[v] == max(h.tbound[m] for m in a.members[v])


class TestSizes:
    def test_uniform_chain_collapses(self):
        h, unsafe = build(uniform_chain(40))
        a = abstract(make_virtual_map("TR", h), h, unsafe)
        assert (a.n_modes, a.n_edges) == (1, 1)
        assert a.children(a.vmodes[0]) == [a.vmodes[0]]

    def test_identity_matches_concrete(self):
        h, unsafe = load_automaton("graph_branch_car")
        a = abstract(make_virtual_map("identity", h), h, unsafe)
        assert a.n_modes == len(h.modes) and a.n_edges == len(h.edges)

    @pytest.mark.parametrize("k", [1, 3, 7])
    def test_k_lengths(self, k, rng):
        h, unsafe = build(k_length_plan(k, 25, rng))
        assert abstract(make_virtual_map("TR", h), h, unsafe).n_modes == k


class TestSplit:
    def test_halves(self):
        h, unsafe = build(uniform_chain(5))
        a = abstract(make_virtual_map("TR", h), h, unsafe)
        v = a.vmodes[0]
        out = split_mode(v, a)
        c1, c2 = out.children
        assert (c1, c2) == (v + "/1", v + "/2")
        assert out.abstraction.members[c1] == h.modes[:3] and out.abstraction.members[c2] == h.modes[3:]
        assert v not in out.abstraction.vmodes
        assert out.abstraction.initial[0] == c1

    def test_singleton_not_split(self):
        h, unsafe = load_automaton("single_segment")
        a = abstract(make_virtual_map("TR", h), h, unsafe)
        assert split_mode(a.vmodes[0], a) is None

    def test_unknown(self):
        h, unsafe = load_automaton("single_segment")
        a = abstract(make_virtual_map("TR", h), h, unsafe)
        with pytest.raises(KeyError):
            split_mode("nope", a)

    def test_original_untouched(self):
        h, unsafe = build(uniform_chain(4))
        a = abstract(make_virtual_map("TR", h), h, unsafe)
        before = dict(a.members)
        split_mode(a.vmodes[0], a)
        assert a.members == before


class TestExhaustion:
    @settings(max_examples=15, deadline=None)
    @given(st.integers(2, 60), st.integers(0, 2 ** 31 - 1), st.sampled_from(["T", "TR"]))
    def test_bijection(self, n, seed, kind):
        h, unsafe = build(random_graph_doc(n, np.random.default_rng(seed)))
        check_bijection(exhaust(abstract(make_virtual_map(kind, h), h, unsafe)), h)


class TestConcretize:
    def test_identity_roundtrip(self, rng):
        h, unsafe = load_automaton("s1")
        a = abstract(make_virtual_map("identity", h), h, unsafe)
        lo = rng.normal(size=(4, 3))
        out = a.concretize_flowpipe("s002", lo, lo + 1)
        assert np.allclose(out["s002"][0], lo) and np.allclose(out["s002"][1], lo + 1)

    def test_tr_covers_preimages(self, rng):
        h, unsafe = build(uniform_chain(4))
        vm = make_virtual_map("TR", h)
        a = abstract(vm, h, unsafe)
        v = a.vmodes[0]
        lo, hi = np.array([[-2.0, -0.5, -0.2]]), np.array([[0.0, 0.5, 0.2]])
        y = lo + rng.random((100, 3)) * (hi - lo)
        for m, (clo, chi) in a.concretize_flowpipe(v, lo, hi).items():
            x = vm.gamma[m].inverse()(y)
            assert np.all((x >= clo - 1e-12) & (x <= chi + 1e-12))
