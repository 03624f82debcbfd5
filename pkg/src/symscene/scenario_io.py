"""Scenario JSON (schema ``symscene-scenario/1``), run reports, and reachset dumps.

Scenario layout::

    {
      "schema": "symscene-scenario/1",
      "workspace_dim": 2,
      "initial_set": {"lo": [...], "hi": [...]},      # agent state space
      "initial_segment": "s0",
      "segments": [{"id": "s0", "src": [0, 0], "dest": [5, 0]}, ...],
      "edges": [["s0", "s1"], ...],                   # optional
      "guard_radius": [1, 1],                         # optional default
      "guards": {"s0->s1": {"lo": [...], "hi": [...]}},
      "tbounds": {"s0": 8.0, ...},                    # or "default_tbound"
      "unsafe": {"s0": [{"box": [lo, hi]}, {"A": [[...]], "b": [...]}]}
    }

Without ``edges`` every pair of segments sharing a waypoint (``s.dest ==
s'.src``) is an edge. Guards and unsafe sets may be written over workspace
coordinates or over the full agent state. The field names are this
package's own design.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Tuple

import numpy as np

from .geometry import Box, GeometryError, HPolytope, LARGE

SCHEMA = "symscene-scenario/1"
VERDICT_EXIT = {"safe": 0, "unknown": 1, "timeout": 2}
INPUT_ERROR_EXIT = 3


class ScenarioError(ValueError):
    """Validation failure; ``path`` is a JSON path into the offending document."""

    def __init__(self, path: str, msg: str):
        self.path = path
        super().__init__(f"{path}: {msg}")


@dataclass(frozen=True)
class Segment:
    id: str
    src: Tuple[float, ...]
    dest: Tuple[float, ...]

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.subtract(self.dest, self.src)))


@dataclass(frozen=True)
class Scenario:
    initial_set: Box
    initial_segment: str
    segments: Tuple[Segment, ...]
    edges: Tuple[Tuple[str, str], ...]
    guards: Dict[Tuple[str, str], Box]
    tbounds: Dict[str, float]
    unsafe: Dict[str, Tuple[HPolytope, ...]]
    workspace_dim: int = 2
    name: str = ""

    def segment(self, sid: str) -> Segment:
        for s in self.segments:
            if s.id == sid:
                return s
        raise KeyError(sid)


def edge_key(e) -> str:
    return f"{e[0]}->{e[1]}"


def _num(x, path):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ScenarioError(path, f"expected a number, got {type(x).__name__}")
    if not np.isfinite(x):
        raise ScenarioError(path, "number must be finite")
    return float(x)


def _bound(x, path):
    # JSON has no infinity; large magnitudes and null-like strings mean unbounded
    if isinstance(x, str) and x in ("inf", "+inf", "-inf"):
        return LARGE if not x.startswith("-") else -LARGE
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ScenarioError(path, f"expected a number, got {type(x).__name__}")
    return float(x)


def _vec(x, path, dim=None, bound=False):
    if not isinstance(x, list) or not x:
        raise ScenarioError(path, "expected a non-empty list of numbers")
    conv = _bound if bound else _num
    v = tuple(conv(val, f"{path}[{i}]") for i, val in enumerate(x))
    if dim is not None and len(v) != dim:
        raise ScenarioError(path, f"expected {dim} entries, got {len(v)}")
    return v


def _box(obj, path, dim=None):
    if isinstance(obj, dict) and "lo" in obj and "hi" in obj:
        lo, hi = obj["lo"], obj["hi"]
        lp, hp = f"{path}.lo", f"{path}.hi"
    elif isinstance(obj, list) and len(obj) == 2:
        lo, hi = obj
        lp, hp = f"{path}[0]", f"{path}[1]"
    else:
        raise ScenarioError(path, "expected {\"lo\": [...], \"hi\": [...]} or [lo, hi]")
    lo = _vec(lo, lp, dim, bound=True)
    hi = _vec(hi, hp, len(lo), bound=True)
    for i, (a, b) in enumerate(zip(lo, hi)):
        if a > b:
            raise ScenarioError(f"{path}", f"lo > hi in dimension {i} ({a} > {b})")
    return Box(lo, hi)


def _polytope(obj, path):
    if not isinstance(obj, dict):
        raise ScenarioError(path, "expected an object with 'box' or 'A'/'b'")
    if "box" in obj:
        bx = _box(obj["box"], f"{path}.box")
        if np.any(bx.unbounded):
            raise ScenarioError(f"{path}.box", "unsafe boxes must be bounded")
        return bx.to_hpoly()
    if "A" in obj and "b" in obj:
        A = obj["A"]
        if not isinstance(A, list) or not A:
            raise ScenarioError(f"{path}.A", "expected a non-empty matrix")
        rows = [_vec(r, f"{path}.A[{i}]") for i, r in enumerate(A)]
        n = len(rows[0])
        for i, r in enumerate(rows):
            if len(r) != n:
                raise ScenarioError(f"{path}.A[{i}]", "ragged matrix")
        b = _vec(obj["b"], f"{path}.b", len(rows))
        return HPolytope(np.array(rows), np.array(b))
    raise ScenarioError(path, "expected 'box' or 'A'/'b'")


def parse_scenario(text) -> Scenario:
    """Parse and validate scenario JSON (str or bytes)."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ScenarioError("$", f"not UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("$", f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("$", "top level must be an object")
    schema = doc.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ScenarioError("$.schema", f"unsupported schema {schema!r}")

    wdim = doc.get("workspace_dim", 2)
    if wdim not in (2, 3):
        raise ScenarioError("$.workspace_dim", "must be 2 or 3")

    if "segments" not in doc or not isinstance(doc["segments"], list) or not doc["segments"]:
        raise ScenarioError("$.segments", "expected a non-empty list")
    segments = []
    seen = set()
    for i, s in enumerate(doc["segments"]):
        p = f"$.segments[{i}]"
        if not isinstance(s, dict):
            raise ScenarioError(p, "expected an object")
        sid = s.get("id")
        if not isinstance(sid, str) or not sid:
            raise ScenarioError(f"{p}.id", "expected a non-empty string")
        if sid in seen:
            raise ScenarioError(f"{p}.id", f"duplicate segment id {sid!r}")
        if "->" in sid:
            raise ScenarioError(f"{p}.id", "segment ids may not contain '->'")
        seen.add(sid)
        src = _vec(s.get("src"), f"{p}.src", wdim)
        dest = _vec(s.get("dest"), f"{p}.dest", wdim)
        if src == dest:
            raise ScenarioError(p, f"segment {sid!r} has zero length")
        segments.append(Segment(sid, src, dest))
    by_id = {s.id: s for s in segments}

    init_seg = doc.get("initial_segment")
    if init_seg not in by_id:
        raise ScenarioError("$.initial_segment", f"unknown segment {init_seg!r}")
    if "initial_set" not in doc:
        raise ScenarioError("$.initial_set", "missing")
    init = _box(doc["initial_set"], "$.initial_set")
    if np.any(init.unbounded):
        raise ScenarioError("$.initial_set", "initial set must be bounded")

    def check_edge(a, b, path):
        for x in (a, b):
            if x not in by_id:
                raise ScenarioError(path, f"edge {a}->{b} references unknown segment {x!r}")
        if by_id[a].dest != by_id[b].src:
            raise ScenarioError(path, f"edge {a}->{b} joins segments that do not share a waypoint")

    if "edges" in doc:
        if not isinstance(doc["edges"], list):
            raise ScenarioError("$.edges", "expected a list")
        edges = []
        for i, e in enumerate(doc["edges"]):
            p = f"$.edges[{i}]"
            if not (isinstance(e, list) and len(e) == 2 and all(isinstance(v, str) for v in e)):
                raise ScenarioError(p, "expected [src_id, dst_id]")
            check_edge(e[0], e[1], p)
            edges.append((e[0], e[1]))
    else:
        edges = [(a.id, b.id) for a in segments for b in segments if a.dest == b.src]
    if len(set(edges)) != len(edges):
        raise ScenarioError("$.edges", "duplicate edge")

    radius = None
    if "guard_radius" in doc:
        radius = _vec(doc["guard_radius"], "$.guard_radius", bound=True)
        if any(r < 0 for r in radius):
            raise ScenarioError("$.guard_radius", "radius must be non-negative")
    guards = {}
    raw_guards = doc.get("guards", {})
    if not isinstance(raw_guards, dict):
        raise ScenarioError("$.guards", "expected an object keyed by 'src->dst'")
    edge_set = set(edges)
    for key, g in raw_guards.items():
        p = f"$.guards[{key!r}]"
        parts = key.split("->")
        if len(parts) != 2:
            raise ScenarioError(p, "guard key must look like 'src->dst'")
        a, b = parts
        check_edge(a, b, p)
        if (a, b) not in edge_set:
            raise ScenarioError(p, f"guard for {key} but no such edge")
        guards[(a, b)] = _box(g, p)
    for e in edges:
        if e in guards:
            continue
        if radius is None:
            raise ScenarioError("$.guards", f"edge {edge_key(e)} has no guard and no guard_radius is set")
        wp = np.array(by_id[e[0]].dest)
        r = np.array(radius, dtype=float)
        if r.size < wdim:
            raise ScenarioError("$.guard_radius", f"needs at least {wdim} entries")
        c = np.concatenate([wp, np.zeros(r.size - wdim)])
        guards[e] = Box(np.where(r >= LARGE, -LARGE, c - r), np.where(r >= LARGE, LARGE, c + r))

    tbounds = {}
    raw_tb = doc.get("tbounds", {})
    if not isinstance(raw_tb, dict):
        raise ScenarioError("$.tbounds", "expected an object keyed by segment id")
    for sid, v in raw_tb.items():
        if sid not in by_id:
            raise ScenarioError(f"$.tbounds[{sid!r}]", f"unknown segment {sid!r}")
        v = _num(v, f"$.tbounds[{sid!r}]")
        if v <= 0:
            raise ScenarioError(f"$.tbounds[{sid!r}]", "tbound must be positive")
        tbounds[sid] = v
    if "default_tbound" in doc:
        d = _num(doc["default_tbound"], "$.default_tbound")
        if d <= 0:
            raise ScenarioError("$.default_tbound", "tbound must be positive")
        for s in segments:
            tbounds.setdefault(s.id, d)
    for s in segments:
        if s.id not in tbounds:
            raise ScenarioError("$.tbounds", f"segment {s.id!r} has no tbound")

    unsafe = {}
    raw_unsafe = doc.get("unsafe", {})
    if not isinstance(raw_unsafe, dict):
        raise ScenarioError("$.unsafe", "expected an object keyed by segment id")
    for sid, polys in raw_unsafe.items():
        p = f"$.unsafe[{sid!r}]"
        if sid not in by_id:
            raise ScenarioError(p, f"unknown segment {sid!r}")
        if not isinstance(polys, list):
            raise ScenarioError(p, "expected a list of polytopes")
        unsafe[sid] = tuple(_polytope(q, f"{p}[{i}]") for i, q in enumerate(polys))

    return Scenario(
        initial_set=init,
        initial_segment=init_seg,
        segments=tuple(segments),
        edges=tuple(edges),
        guards=guards,
        tbounds=tbounds,
        unsafe=unsafe,
        workspace_dim=wdim,
        name=str(doc.get("name", "")),
    )


def load_scenario(path) -> Scenario:
    with open(path, "rb") as fh:
        return parse_scenario(fh.read())


def _bound_out(v):
    return float(v)


def _poly_out(p: HPolytope):
    if p.generator is not None and p.generator[0].is_identity:
        bx = p.generator[1]
        return {"box": [bx.lo.tolist(), bx.hi.tolist()]}
    return {"A": p.A.tolist(), "b": p.b.tolist()}


def scenario_to_dict(sc: Scenario) -> dict:
    doc = {
        "schema": SCHEMA,
        "workspace_dim": sc.workspace_dim,
        "initial_set": sc.initial_set.to_dict(),
        "initial_segment": sc.initial_segment,
        "segments": [{"id": s.id, "src": list(s.src), "dest": list(s.dest)} for s in sc.segments],
        "edges": [list(e) for e in sc.edges],
        "guards": {edge_key(e): sc.guards[e].to_dict() for e in sc.edges},
        "tbounds": {s.id: sc.tbounds[s.id] for s in sc.segments},
        "unsafe": {sid: [_poly_out(p) for p in polys] for sid, polys in sc.unsafe.items()},
    }
    if sc.name:
        doc["name"] = sc.name
    return doc


def emit_scenario(sc: Scenario) -> str:
    return json.dumps(scenario_to_dict(sc), indent=1)


def save_scenario(sc: Scenario, path):
    with open(path, "w") as fh:
        fh.write(emit_scenario(sc))


@dataclass
class Report:
    verdict: str
    nrefs: int = 0
    rc: int = 0
    rt: float = 0.0
    tt: float = 0.0
    sv_i: int = 0
    ev_i: int = 0
    sv_f: int = 0
    ev_f: int = 0
    reachset_dump_path: Optional[str] = None
    scenario: str = ""
    agent: str = ""
    symmetry: str = ""
    engine: str = ""
    probabilistic_engine: bool = False
    seed: int = 0
    dt: float = 0.01
    delta_cache: float = 1e-3
    tau_lp: float = 1e-9
    diagnostics: List[str] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return VERDICT_EXIT[self.verdict]


REPORT_FIELDS = ("verdict", "nrefs", "rc", "rt_min", "tt_min", "rt_seconds", "tt_seconds",
                 "sv_i", "ev_i", "sv_f", "ev_f", "scenario", "agent", "symmetry", "engine",
                 "probabilistic_engine", "seed", "dt", "delta_cache", "tau_lp",
                 "reachset_dump_path", "diagnostics")
TIMING_FIELDS = ("rt_min", "tt_min", "rt_seconds", "tt_seconds")


def _report_row(r: Report, timings=True):
    row = {
        "verdict": r.verdict, "nrefs": r.nrefs, "rc": r.rc,
        "rt_min": round(r.rt / 60.0, 2), "tt_min": round(r.tt / 60.0, 2),
        "rt_seconds": r.rt, "tt_seconds": r.tt,
        "sv_i": r.sv_i, "ev_i": r.ev_i, "sv_f": r.sv_f, "ev_f": r.ev_f,
        "scenario": r.scenario, "agent": r.agent, "symmetry": r.symmetry, "engine": r.engine,
        "probabilistic_engine": r.probabilistic_engine, "seed": r.seed, "dt": r.dt,
        "delta_cache": r.delta_cache, "tau_lp": r.tau_lp,
        "reachset_dump_path": r.reachset_dump_path, "diagnostics": list(r.diagnostics),
    }
    if not timings:
        for k in TIMING_FIELDS:
            row.pop(k)
    return row


def emit_report(r: Report, fmt: str = "json", timings: bool = True) -> str:
    """Serialize a report with a fixed field order.

    Times appear in minutes (two decimals) and raw seconds. ``timings=False``
    omits them, which makes repeated runs byte-identical.
    """
    row = _report_row(r, timings)
    if fmt == "json":
        return json.dumps(row, indent=1) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(row))
        w.writerow(["|".join(v) if isinstance(v, list) else ("" if v is None else v) for v in row.values()])
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}")


def dump_header(dim: int) -> str:
    cols = ["mode", "t_lo", "t_hi"] + [f"lo{i}" for i in range(dim)] + [f"hi{i}" for i in range(dim)]
    return ",".join(cols) + "\n"


def dump_reachsets(flowpipes, concretize=None, dim: Optional[int] = None) -> str:
    """CSV of ``(mode, t_lo, t_hi, lo..., hi...)`` records.

    ``flowpipes`` is a sequence of ``(mode_id, Flowpipe)``. With
    ``concretize`` (an abstract automaton) each abstract box is pulled back
    through every represented concrete mode's inverse symmetry and re-boxed.
    """
    flowpipes = list(flowpipes)
    if dim is None:
        dim = flowpipes[0][1].dim if flowpipes else 0
    out = io.StringIO()
    out.write(dump_header(dim))
    for mode, pipe in flowpipes:
        if concretize is None:
            groups = [(mode, pipe.lo, pipe.hi)]
        else:
            groups = [(m, lo, hi) for m, (lo, hi) in concretize.concretize_flowpipe(mode, pipe.lo, pipe.hi).items()]
        for m, lo, hi in groups:
            for k in range(lo.shape[0]):
                vals = [pipe.t_lo[k], pipe.t_hi[k], *lo[k], *hi[k]]
                out.write(str(m) + "," + ",".join(repr(float(v)) for v in vals) + "\n")
    return out.getvalue()


def read_dump(text: str):
    """Parse a dump back into ``{mode: (t_lo, t_hi, lo, hi)}`` arrays."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return {}
    dim = (len(rows[0]) - 3) // 2
    acc: Dict[str, list] = {}
    for r in rows[1:]:
        acc.setdefault(r[0], []).append([float(v) for v in r[1:]])
    out = {}
    for m, recs in acc.items():
        a = np.array(recs)
        out[m] = (a[:, 0], a[:, 1], a[:, 2:2 + dim], a[:, 2 + dim:])
    return out
