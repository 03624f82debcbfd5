import json

import numpy as np
import pytest

from symscene.geometry import Box
from symscene.reachability import Flowpipe
from symscene.scenario_io import (INPUT_ERROR_EXIT, Report, ScenarioError, dump_header, dump_reachsets,
                                  emit_report, emit_scenario, load_scenario, parse_scenario, read_dump)

from conftest import all_fixtures


def minimal(**over):
    doc = {
        "initial_segment": "a",
        "initial_set": {"lo": [-0.1, -0.1, 0.0], "hi": [0.1, 0.1, 0.0]},
        "segments": [{"id": "a", "src": [0, 0], "dest": [5, 0]},
                     {"id": "b", "src": [5, 0], "dest": [5, 5]}],
        "guard_radius": [0.5, 0.5],
        "default_tbound": 7.0,
    }
    doc.update(over)
    return doc


def parse(doc):
    return parse_scenario(json.dumps(doc))


class TestParse:
    def test_minimal_defaults(self):
        sc = parse(minimal())
        assert sc.edges == (("a", "b"),)
        assert sc.guards[("a", "b")] == Box([4.5, -0.5], [5.5, 0.5])
        assert sc.tbounds == {"a": 7.0, "b": 7.0}
        assert sc.unsafe == {}

    def test_bytes_input(self):
        assert parse_scenario(json.dumps(minimal()).encode()).initial_segment == "a"

    def test_explicit_edges_and_guards(self):
        sc = parse(minimal(edges=[["a", "b"]], guards={"a->b": {"lo": [4, -1], "hi": [6, 1]}}))
        assert sc.guards[("a", "b")] == Box([4, -1], [6, 1])

    def test_unsafe_forms(self):
        sc = parse(minimal(unsafe={"a": [{"box": [[1, 1], [2, 2]]}, {"A": [[1, 0]], "b": [-3]}]}))
        box, half = sc.unsafe["a"]
        assert box.contains([1.5, 1.5]) and not half.contains([0, 0])

    def test_infinite_bounds(self):
        sc = parse(minimal(guards={"a->b": {"lo": [4, "-inf"], "hi": [6, "inf"]}}))
        assert sc.guards[("a", "b")].unbounded[1]


class TestErrors:
    @pytest.mark.parametrize("doc,path", [
        (minimal(initial_segment="zz"), "$.initial_segment"),
        (minimal(segments=[]), "$.segments"),
        (minimal(segments=[{"id": "a", "src": [0, 0], "dest": [0, 0]}]), "$.segments[0]"),
        (minimal(segments=[{"id": "a", "src": [0, "x"], "dest": [1, 0]}]), "$.segments[0].src[1]"),
        (minimal(edges=[["a", "q"]]), "$.edges[0]"),
        (minimal(edges=[["b", "a"]]), "$.edges[0]"),
        (minimal(tbounds={"a": -1}), "$.tbounds['a']"),
        (minimal(unsafe={"a": [{"A": [[1, 0], [1]], "b": [0, 0]}]}), "$.unsafe['a'][0].A[1]"),
        (minimal(initial_set={"lo": [0, 0, 0], "hi": [-1, 0, 0]}), "$.initial_set"),
        (minimal(schema="other/2"), "$.schema"),
    ])
    def test_json_path_named(self, doc, path):
        with pytest.raises(ScenarioError) as info:
            parse(doc)
        assert info.value.path == path
        assert path in str(info.value)

    def test_missing_tbound(self):
        doc = minimal()
        del doc["default_tbound"]
        with pytest.raises(ScenarioError, match="tbound"):
            parse(doc)

    def test_missing_guard(self):
        doc = minimal()
        del doc["guard_radius"]
        with pytest.raises(ScenarioError, match="guard"):
            parse(doc)

    def test_malformed_json(self):
        with pytest.raises(ScenarioError):
            parse_scenario("{not json")

    def test_exit_code_constant(self):
        assert INPUT_ERROR_EXIT == 3


class TestRoundTrip:
    @pytest.mark.parametrize("path", all_fixtures())
    def test_fixture_roundtrip(self, path):
        sc = load_scenario(path)
        text = emit_scenario(sc)
        sc2 = parse_scenario(text)
        assert emit_scenario(sc2) == text
        assert sc2.edges == sc.edges and sc2.initial_set == sc.initial_set
        for e in sc.edges:
            assert sc2.guards[e] == sc.guards[e]
        for m, polys in sc.unsafe.items():
            assert all(p == q for p, q in zip(polys, sc2.unsafe[m]))


class TestReport:
    def rep(self, **kw):
        return Report(verdict="safe", nrefs=1, rc=5, rt=30.0, tt=90.0, sv_i=1, ev_i=1, sv_f=2, ev_f=3, **kw)

    def test_json_fields(self):
        row = json.loads(emit_report(self.rep()))
        assert row["rt_min"] == 0.5 and row["tt_min"] == 1.5
        assert row["verdict"] == "safe" and row["nrefs"] == 1

    def test_omit_timings(self):
        row = json.loads(emit_report(self.rep(), timings=False))
        assert "rt_min" not in row and "tt_seconds" not in row

    def test_csv(self):
        lines = emit_report(self.rep(diagnostics=["a", "b"]), fmt="csv").splitlines()
        assert lines[0].startswith("verdict,nrefs,rc")
        assert lines[1].startswith("safe,1,5") and "a|b" in lines[1]

    @pytest.mark.parametrize("v,code", [("safe", 0), ("unknown", 1), ("timeout", 2)])
    def test_exit_codes(self, v, code):
        assert Report(verdict=v).exit_code == code

    def test_bad_format(self):
        with pytest.raises(ValueError):
            emit_report(self.rep(), fmt="xml")


class TestDump:
    def test_header_only(self):
        assert dump_reachsets([], dim=3) == dump_header(3)
        assert read_dump(dump_header(3)) == {}

    def test_roundtrip(self, rng):
        lo = rng.normal(size=(4, 3))
        p = Flowpipe(np.arange(4.0), np.arange(1.0, 5.0), lo, lo + 1)
        back = read_dump(dump_reachsets([("m1", p)]))
        t_lo, t_hi, blo, bhi = back["m1"]
        assert np.array_equal(blo, p.lo) and np.array_equal(bhi, p.hi) and np.array_equal(t_hi, p.t_hi)
