"""Abstract (virtual) automaton built from a concrete one and a symmetry map.

Each concrete edge ``(s, s')`` contributes one piece to the virtual edge
``(rv(s), rv(s'))``: its guard transported into the source's canonical frame,
``gamma_s(guard)``, and the reset ``gamma_s' o gamma_s^-1``. Pieces depend
only on the concrete edge, so they are built once and splitting just
regroups them.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .geometry import AffineMap, Box, HPolytope, affine_box_bbox, apply_affine_box, apply_affine_poly
from .symmetry import VirtualMap


@dataclass(frozen=True)
class EdgePiece:
    edge: Tuple[str, str]
    guard: HPolytope
    reset: AffineMap


@dataclass(frozen=True)
class AbstractAutomaton:
    vmodes: Tuple[str, ...]
    vedges: Tuple[Tuple[str, str], ...]
    pieces: Dict[Tuple[str, str], Tuple[EdgePiece, ...]]
    tbound: Dict[str, float]
    initial: Tuple[str, Box]
    unsafe: Dict[str, Tuple[HPolytope, ...]]
    rv: Dict[str, str]
    members: Dict[str, Tuple[str, ...]]
    canonical: Dict[str, Tuple[np.ndarray, np.ndarray]]
    vm: VirtualMap = field(repr=False, compare=False)
    h: object = field(repr=False, compare=False)
    edge_pieces: Dict[Tuple[str, str], EdgePiece] = field(repr=False, compare=False, default_factory=dict)
    mode_unsafe: Dict[str, Tuple[HPolytope, ...]] = field(repr=False, compare=False, default_factory=dict)
    _children: Dict[str, Tuple[str, ...]] = field(repr=False, compare=False, default_factory=dict)

    @property
    def n_modes(self) -> int:
        return len(self.vmodes)

    @property
    def n_edges(self) -> int:
        return len(self.vedges)

    def children(self, v: str) -> List[str]:
        return list(self._children.get(v, ()))

    def concretize_flowpipe(self, v: str, lo, hi) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
        """Pull boxes ``(K, n)`` of virtual mode ``v`` back into each member's frame."""
        lo = np.atleast_2d(lo)
        hi = np.atleast_2d(hi)
        c = 0.5 * (lo + hi)
        r = 0.5 * (hi - lo)
        out = {}
        for m in self.members[v]:
            inv = self.vm.gamma[m].inverse()
            if inv.is_identity:
                out[m] = (lo.copy(), hi.copy())
                continue
            cc = c @ inv.M.T + inv.c
            rr = r @ np.abs(inv.M).T
            out[m] = (cc - rr, cc + rr)
        return out


def _assemble(vm, h, rv, members, canonical, edge_pieces, mode_unsafe, initial_box):
    vmodes = tuple(sorted(members))
    pieces: Dict[Tuple[str, str], list] = {}
    for e in h.edges:
        pieces.setdefault((rv[e[0]], rv[e[1]]), []).append(edge_pieces[e])
    pieces = {k: tuple(sorted(v, key=lambda p: p.edge)) for k, v in pieces.items()}
    vedges = tuple(sorted(pieces))
    kids: Dict[str, list] = {}
    for a, b in vedges:
        kids.setdefault(a, []).append(b)
    tbound = {v: max(h.tbound[m] for m in members[v]) for v in vmodes}
    unsafe = {v: tuple(p for m in members[v] for p in mode_unsafe[m]) for v in vmodes}
    m0 = h.initial[0]
    return AbstractAutomaton(
        vmodes=vmodes, vedges=vedges, pieces=pieces, tbound=tbound,
        initial=(rv[m0], initial_box), unsafe=unsafe, rv=dict(rv),
        members={v: members[v] for v in vmodes}, canonical={v: canonical[v] for v in vmodes},
        vm=vm, h=h, edge_pieces=edge_pieces, mode_unsafe=mode_unsafe,
        _children={a: tuple(sorted(b)) for a, b in kids.items()},
    )


def abstract(vm: VirtualMap, h, unsafe) -> AbstractAutomaton:
    """Initial abstraction ``H_v`` of ``h`` under ``vm``."""
    edge_pieces = {}
    for e in h.edges:
        g_src = vm.gamma[e[0]]
        edge_pieces[e] = EdgePiece(e, apply_affine_box(g_src, h.guard[e]),
                                   vm.gamma[e[1]].compose(g_src.inverse()))
    mode_unsafe = {m: tuple(apply_affine_poly(vm.gamma[m], p) for p in unsafe.get(m, ())) for m in h.modes}
    m0, theta = h.initial
    init = affine_box_bbox(vm.gamma[m0], theta)
    return _assemble(vm, h, vm.rv, vm.members, vm.canonical, edge_pieces, mode_unsafe, init)


@dataclass(frozen=True)
class SplitOutcome:
    abstraction: AbstractAutomaton
    parent: str
    children: Tuple[str, str]


def split_mode(v: str, a: AbstractAutomaton, h=None, unsafe=None) -> Optional[SplitOutcome]:
    """Split ``v`` into ``v/1`` (first half of its sorted members) and ``v/2``.

    Returns ``None`` when ``v`` represents fewer than two concrete modes.
    ``h`` and ``unsafe`` are accepted for interface symmetry; the pieces
    already carry everything the split needs.
    """
    if v not in a.members:
        raise KeyError(f"unknown virtual mode {v!r}")
    mem = a.members[v]
    if len(mem) < 2:
        return None
    k = (len(mem) + 1) // 2
    c1, c2 = f"{v}/1", f"{v}/2"
    members = {u: ms for u, ms in a.members.items() if u != v}
    members[c1] = mem[:k]
    members[c2] = mem[k:]
    rv = dict(a.rv)
    for m in mem[:k]:
        rv[m] = c1
    for m in mem[k:]:
        rv[m] = c2
    canonical = {u: c for u, c in a.canonical.items() if u != v}
    canonical[c1] = canonical[c2] = a.canonical[v]
    out = _assemble(a.vm, a.h, rv, members, canonical, a.edge_pieces, a.mode_unsafe, a.initial[1])
    return SplitOutcome(out, v, (c1, c2))
