"""Abstraction-refinement loop and the cached depth-first verify procedure.

``scene_check`` builds the abstraction once, then repeatedly runs
``verify`` from the abstract initial set with a fresh cache. A ``refine``
answer splits the named virtual mode and starts over; ``safe`` and
``unknown`` are final.

Initial sets are rounded outward to a grid of pitch ``delta_cache`` so that
each mode sees finitely many distinct cache entries. A mode's initial set is
entered in the cache when its reachset is requested (not only once its
subtree is verified). With self-loops in the abstraction this is what makes
the search terminate; it is sound because any verdict other than ``safe``
aborts the whole iteration.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .abstraction import AbstractAutomaton, abstract, split_mode
from .agents import ReachDivergence
from .geometry import (Box, affine_box_bbox, box_subtract, boxes_poly_overlap, intersect_box_poly)
from .lp import LinearProgram, OPTIMAL

log = logging.getLogger("symscene.verifier")

DELTA_CACHE = 1e-3
DEFAULT_TIMEOUT_S = 120 * 60.0


@dataclass
class Limits:
    timeout_s: float = DEFAULT_TIMEOUT_S
    max_refines: Optional[int] = None
    delta_cache: float = DELTA_CACHE


class Cache:
    """Per virtual mode, the initial sets reachsets were computed from.

    Coverage is judged modulo 2*pi in ``angular`` dimensions: the dynamics
    are periodic there and neither guards nor unsafe sets may constrain them.
    """

    def __init__(self, modes=(), angular=None):
        self.boxes: Dict[str, List[Box]] = {m: [] for m in modes}
        self.angular = None if angular is None else np.asarray(angular, dtype=bool)

    def add(self, mode: str, bx: Box):
        self.boxes.setdefault(mode, []).append(bx)

    def get(self, mode: str) -> List[Box]:
        return self.boxes.get(mode, [])

    def uncovered(self, mode: str, bx: Box) -> List[Box]:
        cover = self.get(mode)
        if self.angular is not None and self.angular.any() and cover:
            shift = np.where(self.angular, 2 * np.pi, 0.0)
            cover = [Box(c.lo + k * shift, c.hi + k * shift) for c in cover for k in (0, -1, 1)]
        return box_subtract(bx, cover)

    def __len__(self):
        return sum(len(v) for v in self.boxes.values())


@dataclass
class VerifyResult:
    verdict: str                      # safe | unknown | refine
    refine_target: Optional[str] = None
    chain: Tuple[str, ...] = ()
    diagnostics: List[str] = field(default_factory=list)
    violating: List[Box] = field(default_factory=list)


@dataclass
class RunMetrics:
    nrefs: int = 0
    rc: int = 0
    rt_seconds: float = 0.0
    tt_seconds: float = 0.0
    sv_i: int = 0
    ev_i: int = 0
    sv_f: int = 0
    ev_f: int = 0
    iterations: List[dict] = field(default_factory=list)


@dataclass
class CheckOutcome:
    verdict: str                      # safe | unknown | timeout
    metrics: RunMetrics
    flowpipes: List[Tuple[str, object]]
    abstraction: AbstractAutomaton
    diagnostics: List[str] = field(default_factory=list)
    violating: List[Box] = field(default_factory=list)


class _Timeout(Exception):
    pass


def grid_round(bx: Box, delta: float) -> Box:
    """Smallest box on the ``delta`` grid containing ``bx``."""
    if delta <= 0:
        return bx
    lo = np.floor(bx.lo / delta) * delta
    hi = np.ceil(bx.hi / delta) * delta
    lo = np.where(lo > bx.lo, lo - delta, lo)
    hi = np.where(hi < bx.hi, hi + delta, hi)
    ub = bx.unbounded
    return Box(np.where(ub, bx.lo, lo), np.where(ub, bx.hi, hi))


def normalize_angles(bx: Box, angular) -> Box:
    """Shift angular coordinates by multiples of 2*pi so each center lies in (-pi, pi]."""
    angular = np.asarray(angular, dtype=bool)
    if not angular.any():
        return bx
    full = angular & (bx.width >= 2 * np.pi)
    if full.any():
        # one full period covers every heading
        bx = Box(np.where(full, -np.pi, bx.lo), np.where(full, np.pi, bx.hi))
    c = bx.center
    k = np.where(angular, np.ceil((c - np.pi) / (2 * np.pi)), 0.0)
    if not np.any(k):
        return bx
    shift = 2 * np.pi * k
    return Box(bx.lo - shift, bx.hi - shift)


def _piece_image(piece, lo, hi) -> Optional[Box]:
    """Bounding box of ``reset(guard ∩ hull(boxes))`` for one edge piece."""
    gb = piece.guard.bbox
    lo = np.maximum(lo, gb.lo)
    hi = np.minimum(hi, gb.hi)
    H = Box(lo.min(axis=0), hi.max(axis=0))
    gmap = piece.guard.generator[0] if piece.guard.generator is not None else None
    if gmap is not None and gmap.is_axis_aligned:
        # the guard piece is itself a box, so the intersection is exact
        return affine_box_bbox(piece.reset, H)
    q = intersect_box_poly(H, piece.guard)
    lp = LinearProgram(q.A, q.b)
    if not lp.feasible:
        return None
    M, c = piece.reset.M, piece.reset.c
    n = M.shape[0]
    out_lo = np.empty(n)
    out_hi = np.empty(n)
    for i in range(n):
        st, vmin, _ = lp.minimize(M[i])
        st2, vmax, _ = lp.minimize(-M[i])
        if st != OPTIMAL or st2 != OPTIMAL:
            # bounded by construction (H is bounded); fall back to the box image
            return affine_box_bbox(piece.reset, H)
        out_lo[i] = vmin + c[i]
        out_hi[i] = -vmax + c[i]
    return Box(out_lo, np.maximum(out_hi, out_lo))


def child_initsets(a: AbstractAutomaton, v: str, pipe, child: str,
                   delta: float = DELTA_CACHE) -> List[Box]:
    """One box per edge piece of ``(v, child)`` that the flowpipe reaches."""
    out = []
    for piece in a.pieces.get((v, child), ()):
        mask = boxes_poly_overlap(pipe.lo, pipe.hi, piece.guard)
        if not mask.any():
            continue
        img = _piece_image(piece, pipe.lo[mask], pipe.hi[mask])
        if img is None:
            continue
        img = normalize_angles(img, piece.reset.angular)
        out.append(grid_round(img, delta))
    return out


def unsafe_hits(a: AbstractAutomaton, v: str, pipe) -> np.ndarray:
    """Indices of flowpipe slices meeting any unsafe polytope of ``v``."""
    hit = np.zeros(len(pipe), dtype=bool)
    for p in a.unsafe.get(v, ()):
        hit |= boxes_poly_overlap(pipe.lo, pipe.hi, p)
    return np.flatnonzero(hit)


class _Run:
    def __init__(self, engine, limits: Limits, metrics: RunMetrics, t0: float):
        self.engine = engine
        self.limits = limits
        self.metrics = metrics
        self.t0 = t0
        self.flowpipes: List[Tuple[str, object]] = []

    def reach(self, a: AbstractAutomaton, v: str, init: Box):
        if time.perf_counter() - self.t0 > self.limits.timeout_s:
            raise _Timeout()
        seg = a.canonical[v]
        t = time.perf_counter()
        try:
            pipe = self.engine.compute_reachset(a.h.agent, init, seg, a.tbound[v], mode=v)
        finally:
            self.metrics.rc += 1
            self.metrics.rt_seconds += time.perf_counter() - t
        self.flowpipes.append((v, pipe))
        return pipe


def verify(v: str, initset: Box, cache: Cache, a: AbstractAutomaton, run: _Run) -> VerifyResult:
    """Depth-first search over the abstraction with an explicit stack.

    Each frame holds a mode, its reachset and a cursor over its sorted
    children. A ``refine`` answer unwinds everything; an ``unknown`` answer
    makes the parent refine itself if it represents several modes, and
    otherwise passes ``unknown`` further up.
    """
    delta = run.limits.delta_cache

    def enter(mode, init):
        cache.add(mode, init)
        pipe = run.reach(a, mode, init)
        bad = unsafe_hits(a, mode, pipe)
        return pipe, bad

    def fail(stack, mode, reason, boxes):
        # walk up from `mode` until some ancestor can be split
        chain = tuple(f[0] for f in stack) + (mode,)
        diags = [reason]
        for depth in range(len(chain) - 1, -1, -1):
            m = chain[depth]
            if len(a.members[m]) > 1:
                return VerifyResult("refine", m, chain, diags, boxes)
        diags.append("no mode on the chain can be split: " + " -> ".join(chain))
        return VerifyResult("unknown", None, chain, diags, boxes)

    stack = []
    try:
        pipe, bad = enter(v, initset)
    except ReachDivergence as exc:
        return VerifyResult("unknown", None, (v,), [f"reachability diverged: {exc}"])
    if bad.size:
        return fail(stack, v, f"reachset of {v} meets its unsafe set", [pipe.box(k) for k in bad[:20]])
    stack.append([v, pipe, a.children(v), 0])
    while stack:
        frame = stack[-1]
        mode, pipe, kids, i = frame
        if i >= len(kids):
            stack.pop()
            continue
        frame[3] = i + 1
        child = kids[i]
        cands = child_initsets(a, mode, pipe, child, delta)
        if not cands:
            continue
        cand = Box.hull(cands)
        if cache.angular is not None:
            cand = grid_round(normalize_angles(cand, cache.angular), delta)
        rem = cache.uncovered(child, cand)
        if not rem:
            continue
        init = grid_round(Box.hull(rem), delta)
        try:
            cpipe, bad = enter(child, init)
        except ReachDivergence as exc:
            return fail(stack, child, f"reachability diverged: {exc}", [])
        if bad.size:
            return fail(stack, child, f"reachset of {child} meets its unsafe set",
                        [cpipe.box(k) for k in bad[:20]])
        stack.append([child, cpipe, a.children(child), 0])
    return VerifyResult("safe")


def scene_check(vm, h, unsafe, engine, limits: Optional[Limits] = None) -> CheckOutcome:
    """Verify ``h`` against ``unsafe`` through the abstraction induced by ``vm``."""
    limits = limits or Limits()
    t0 = time.perf_counter()
    metrics = RunMetrics()
    a = abstract(vm, h, unsafe)
    metrics.sv_i, metrics.ev_i = a.n_modes, a.n_edges
    run = _Run(engine, limits, metrics, t0)
    verdict, diags, violating = "safe", [], []
    m0, theta = a.initial
    while True:
        cache = Cache(a.vmodes, vm.gamma[h.initial[0]].angular)
        run.flowpipes = []
        rc0 = metrics.rc
        init = grid_round(normalize_angles(theta, vm.gamma[h.initial[0]].angular), limits.delta_cache)
        try:
            res = verify(a.initial[0], init, cache, a, run)
        except _Timeout:
            verdict = "timeout"
            diags.append(f"timed out after {limits.timeout_s:.0f} s")
            break
        metrics.iterations.append({
            "iteration": len(metrics.iterations), "rc": metrics.rc - rc0, "result": res.verdict,
            "target": res.refine_target, "sv": a.n_modes, "ev": a.n_edges,
        })
        log.info("iteration %d: %s %s (rc %d)", len(metrics.iterations) - 1, res.verdict,
                 res.refine_target or "", metrics.rc - rc0)
        if res.verdict != "refine":
            verdict = res.verdict
            diags.extend(res.diagnostics)
            violating = res.violating
            break
        if limits.max_refines is not None and metrics.nrefs >= limits.max_refines:
            verdict = "unknown"
            diags.extend(res.diagnostics)
            diags.append(f"refinement budget of {limits.max_refines} exhausted")
            violating = res.violating
            break
        out = split_mode(res.refine_target, a)
        a = out.abstraction
        theta = a.initial[1]
        metrics.nrefs += 1
    metrics.sv_f, metrics.ev_f = a.n_modes, a.n_edges
    metrics.tt_seconds = time.perf_counter() - t0
    return CheckOutcome(verdict, metrics, run.flowpipes, a, diags, violating)
