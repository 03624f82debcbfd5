"""Hybrid automaton induced by a scenario, plus a Monte-Carlo execution sampler.

Modes are segments, edges are consecutive segment pairs, guards are boxes
around the shared waypoint, and resets are the identity.

Execution semantics used by :func:`sample_executions`: while the state is
inside an outgoing guard the execution may switch at any step (a per-run
hazard rate spreads switch times across the guard window). When the time
bound of the current mode expires it must switch if it is inside a guard,
and otherwise it ends. An agent may linger in a guard and switch late.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .agents import rk4_step
from .geometry import Box, HPolytope, LARGE, AffineMap
from .scenario_io import Scenario


class AutomatonError(ValueError):
    pass


@dataclass(frozen=True)
class HybridAutomaton:
    modes: Tuple[str, ...]
    edges: Tuple[Tuple[str, str], ...]
    guard: Dict[Tuple[str, str], Box]
    tbound: Dict[str, float]
    initial: Tuple[str, Box]
    segments: Dict[str, Tuple[np.ndarray, np.ndarray]]
    agent: object
    _children: Dict[str, Tuple[str, ...]] = field(default_factory=dict, repr=False, compare=False)

    @property
    def dynamics_id(self) -> str:
        return self.agent.name

    def reset(self, e) -> AffineMap:
        return AffineMap.identity(self.agent.state_dim)

    def segment(self, m):
        return self.segments[m]


def children(h: HybridAutomaton, m: str) -> List[str]:
    """Successor modes of ``m`` in sorted order."""
    if m not in h.segments:
        raise KeyError(f"unknown mode {m!r}")
    return list(h._children.get(m, ()))


def workspace_indices(agent) -> Tuple[int, ...]:
    lay = agent.layout
    idx = tuple(lay.position)
    if agent.workspace_dim == 3:
        idx = idx + (lay.altitude,)
    return idx


def _lift_point(p, wdim):
    p = np.asarray(p, dtype=float)
    return np.pad(p, (0, wdim - p.size))


def _lift_box(bx: Box, agent, path):
    n = agent.state_dim
    if bx.dim == n:
        h = agent.layout.heading
        if h is not None and not bx.unbounded[h]:
            raise AutomatonError(f"{path}: guards may not constrain the heading angle")
        return bx
    ws = workspace_indices(agent)
    if bx.dim > len(ws):
        raise AutomatonError(f"{path}: box of dimension {bx.dim} fits neither workspace nor state")
    lo = np.full(n, -LARGE)
    hi = np.full(n, LARGE)
    lo[list(ws[:bx.dim])] = bx.lo
    hi[list(ws[:bx.dim])] = bx.hi
    return Box(lo, hi)


def _lift_poly(p: HPolytope, agent, path):
    n = agent.state_dim
    if p.dim == n:
        out = p
    else:
        ws = workspace_indices(agent)
        if p.dim > len(ws):
            raise AutomatonError(f"{path}: polytope of dimension {p.dim} fits neither workspace nor state")
        out = p.lift(n, ws[:p.dim])
    h = agent.layout.heading
    if h is not None and np.any(out.A[:, h] != 0.0):
        raise AutomatonError(f"{path}: unsafe sets may not constrain the heading angle")
    return out


def build_automaton(sc: Scenario, agent):
    """Return ``(H, unsafe)`` for the scenario executed by ``agent``."""
    if sc.workspace_dim > agent.workspace_dim:
        raise AutomatonError(
            f"{sc.workspace_dim}-D scenario cannot be executed by {agent.name} "
            f"(workspace dimension {agent.workspace_dim})")
    if sc.initial_set.dim != agent.state_dim:
        raise AutomatonError(
            f"initial set has dimension {sc.initial_set.dim}, {agent.name} state has {agent.state_dim}")
    wdim = agent.workspace_dim
    segments = {s.id: (_lift_point(s.src, wdim), _lift_point(s.dest, wdim)) for s in sc.segments}
    modes = tuple(sorted(segments))
    edges = tuple(sorted(sc.edges))
    guard = {e: _lift_box(sc.guards[e], agent, f"guard {e[0]}->{e[1]}") for e in edges}
    kids: Dict[str, list] = {}
    for a, b in edges:
        kids.setdefault(a, []).append(b)
    kids = {a: tuple(sorted(v)) for a, v in kids.items()}
    unsafe = {m: tuple(_lift_poly(p, agent, f"unsafe {m}[{i}]") for i, p in enumerate(sc.unsafe.get(m, ())))
              for m in modes}
    h = HybridAutomaton(
        modes=modes,
        edges=edges,
        guard=guard,
        tbound={m: float(sc.tbounds[m]) for m in modes},
        initial=(sc.initial_segment, sc.initial_set),
        segments=segments,
        agent=agent,
        _children=kids,
    )
    return h, unsafe


@dataclass
class ExecutionSample:
    n_executions: int
    n_violations: int
    violations: List[Tuple[int, str, np.ndarray]]
    transitions: int
    mode_visits: Dict[str, int]
    states: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def safe(self) -> bool:
        return self.n_violations == 0


def sample_executions(h: HybridAutomaton, unsafe, n: int = 10_000, dt: float = 0.01, seed: int = 0,
                      hazard=(0.005, 1.0), max_transitions: int = 1000, keep_states: int = 0,
                      initial_states=None) -> ExecutionSample:
    """Simulate ``n`` random executions of ``h`` and count unsafe contacts.

    All executions advance together with a shared fixed step; rows in
    different modes use their own segment. ``keep_states`` > 0 stores up to
    that many visited states per mode (for containment checks).
    """
    rng = np.random.default_rng(seed)
    agent = h.agent
    modes = list(h.modes)
    index = {m: i for i, m in enumerate(modes)}
    nm = len(modes)
    src = np.array([h.segments[m][0] for m in modes])
    dst = np.array([h.segments[m][1] for m in modes])
    tb = np.array([h.tbound[m] for m in modes])
    deg = max([len(h._children.get(m, ())) for m in modes] + [1])
    child = -np.ones((nm, deg), dtype=int)
    glo = np.zeros((nm, deg, agent.state_dim))
    ghi = np.zeros((nm, deg, agent.state_dim))
    for m in modes:
        for k, c in enumerate(h._children.get(m, ())):
            child[index[m], k] = index[c]
            g = h.guard[(m, c)]
            glo[index[m], k] = g.lo
            ghi[index[m], k] = g.hi
    unsafe_idx = [(index[m], p) for m in modes for p in unsafe.get(m, ())]

    m0, theta = h.initial
    if initial_states is None:
        x = theta.lo + rng.random((n, agent.state_dim)) * theta.width
    else:
        x = np.array(initial_states, dtype=float)
        n = x.shape[0]
    mode = np.full(n, index[m0])
    tin = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    ntrans = np.zeros(n, dtype=int)
    lo_h, hi_h = np.log(hazard[0]), np.log(hazard[1])
    rate = np.exp(lo_h + rng.random(n) * (hi_h - lo_h))
    violated = np.zeros(n, dtype=bool)
    violations = []
    visits = {m: 0 for m in modes}
    visits[m0] = n
    kept: Dict[str, list] = {m: [] for m in modes}
    transitions = 0

    def check_unsafe(rows):
        for mi, p in unsafe_idx:
            sel = rows[mode[rows] == mi]
            if sel.size == 0:
                continue
            hit = sel[p.contains(x[sel], tol=0.0)]
            new = hit[~violated[hit]]
            violated[new] = True
            for r in new[:10]:
                violations.append((int(r), modes[mi], x[r].copy()))

    def keep(rows):
        if keep_states <= 0:
            return
        for mi in np.unique(mode[rows]):
            m = modes[mi]
            if len(kept[m]) * 64 >= keep_states:
                continue
            sel = rows[mode[rows] == mi]
            kept[m].append(x[sel[rng.permutation(sel.size)[:64]]].copy())

    check_unsafe(np.arange(n))
    keep(np.arange(n))
    while alive.any():
        rows = np.flatnonzero(alive)
        s, d = src[mode[rows]], dst[mode[rows]]
        xr = rk4_step(lambda z: agent.flow(z, s, d), x[rows], dt)
        if not np.all(np.isfinite(xr)):
            raise FloatingPointError("simulation diverged")
        x[rows] = xr
        tin[rows] += dt
        check_unsafe(rows)
        keep(rows)

        mr = mode[rows]
        ch = child[mr]                                   # (R, deg)
        inside = np.all((x[rows, None, :] >= glo[mr]) & (x[rows, None, :] <= ghi[mr]), axis=2) & (ch >= 0)
        any_in = inside.any(axis=1)
        expired = tin[rows] + 0.5 * dt > tb[mr]
        go = any_in & (expired | (rng.random(rows.size) < rate[rows]))
        go &= ntrans[rows] < max_transitions
        if go.any():
            pick_rows = np.flatnonzero(go)
            w = inside[pick_rows] * rng.random((pick_rows.size, deg))
            slot = np.argmax(w, axis=1)
            new_mode = ch[pick_rows, slot]
            r = rows[pick_rows]
            mode[r] = new_mode
            tin[r] = 0.0
            ntrans[r] += 1
            transitions += r.size
            for mi, cnt in zip(*np.unique(new_mode, return_counts=True)):
                visits[modes[mi]] += int(cnt)
        alive[rows[expired & ~go]] = False
    states = {m: np.concatenate(v) for m, v in kept.items() if v}
    return ExecutionSample(n, int(violated.sum()), violations, transitions, visits, states)
