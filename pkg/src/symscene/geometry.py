"""Boxes, H-polytopes and affine maps.

Every set the verifier touches lives here. Unbounded box dimensions are
stored as the ``+-LARGE`` sentinel; converting such a box to constraints
drops the sentinel rows, so polytopes never carry 1e12 offsets into the LP.
"""

from __future__ import annotations

from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from .lp import TAU_LP, LinearProgram, UNBOUNDED

LARGE = 1e12


class GeometryError(ValueError):
    pass


class DimensionError(GeometryError):
    pass


class SingularMapError(GeometryError):
    pass


class EmptySetError(GeometryError):
    pass


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _clip_sentinel(lo, hi):
    lo = np.where(lo <= -LARGE, -LARGE, lo)
    hi = np.where(hi >= LARGE, LARGE, hi)
    return lo, hi


class Box:
    """Axis-aligned hyperrectangle ``[lo, hi]``; lo == hi is a legal point set."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        lo = np.asarray(lo, dtype=float).reshape(-1)
        hi = np.asarray(hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise DimensionError(f"box bounds have shapes {lo.shape} and {hi.shape}")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise GeometryError("box bounds contain NaN")
        if np.any(lo > hi):
            raise GeometryError(f"box has lo > hi: lo={lo.tolist()} hi={hi.tolist()}")
        lo, hi = _clip_sentinel(lo, hi)
        object.__setattr__(self, "lo", _frozen(lo))
        object.__setattr__(self, "hi", _frozen(hi))

    def __setattr__(self, name, value):
        raise AttributeError("Box is immutable")

    @classmethod
    def from_center_radius(cls, center, radius):
        center = np.asarray(center, dtype=float)
        radius = np.broadcast_to(np.asarray(radius, dtype=float), center.shape)
        return cls(center - radius, center + radius)

    @classmethod
    def point(cls, x):
        return cls(x, x)

    @classmethod
    def hull(cls, boxes: Iterable["Box"]) -> "Box":
        boxes = list(boxes)
        if not boxes:
            raise EmptySetError("hull of no boxes")
        lo = np.min([b.lo for b in boxes], axis=0)
        hi = np.max([b.hi for b in boxes], axis=0)
        return cls(lo, hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def radius(self):
        return 0.5 * (self.hi - self.lo)

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def unbounded(self):
        """Per-dimension flag: True where either bound is the sentinel."""
        return (self.lo <= -LARGE) | (self.hi >= LARGE)

    @property
    def volume(self) -> float:
        return float(np.prod(self.width))

    def contains(self, pts, tol=0.0):
        pts = np.asarray(pts, dtype=float)
        ok = (pts >= self.lo - tol) & (pts <= self.hi + tol)
        return ok.all(axis=-1)

    def contains_box(self, other: "Box", tol=0.0) -> bool:
        return bool(np.all(other.lo >= self.lo - tol) and np.all(other.hi <= self.hi + tol))

    def vertices(self):
        """All 2^n corners (small n only)."""
        n = self.dim
        idx = (np.arange(2 ** n)[:, None] >> np.arange(n)) & 1
        return np.where(idx == 1, self.hi, self.lo)

    def inflate(self, scale=1.0, pad=0.0) -> "Box":
        c, r = self.center, self.radius
        r = r * scale + pad
        lo, hi = c - r, c + r
        ub = self.unbounded
        return Box(np.where(ub, self.lo, lo), np.where(ub, self.hi, hi))

    def to_hpoly(self) -> "HPolytope":
        return apply_affine_box(AffineMap.identity(self.dim), self)

    def to_dict(self):
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    def almost_equal(self, other: "Box", tol=1e-12) -> bool:
        return self.dim == other.dim and bool(
            np.all(np.abs(self.lo - other.lo) <= tol) and np.all(np.abs(self.hi - other.hi) <= tol))

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


class AffineMap:
    """``x -> M x + c`` with its inverse cached.

    ``angular`` flags state dimensions that are angles; the map is affine on
    the real line there and callers wrap modulo 2*pi where it matters.
    """

    def __init__(self, M, c, angular=None):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        c = np.asarray(c, dtype=float).reshape(-1)
        if M.shape != (c.size, c.size):
            raise DimensionError(f"affine map with M {M.shape} and c {c.shape}")
        self.M = _frozen(M)
        self.c = _frozen(c)
        ang = np.zeros(c.size, dtype=bool) if angular is None else np.asarray(angular, dtype=bool)
        ang = ang.copy()
        ang.setflags(write=False)
        self.angular = ang
        self._inv = None

    @classmethod
    def identity(cls, n, angular=None):
        return cls(np.eye(n), np.zeros(n), angular)

    @classmethod
    def translation(cls, c, angular=None):
        c = np.asarray(c, dtype=float)
        return cls(np.eye(c.size), c, angular)

    @property
    def dim(self) -> int:
        return self.c.size

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.M.T + self.c

    def inverse(self) -> "AffineMap":
        if self._inv is None:
            if self.is_axis_aligned:
                d = np.diag(self.M)
                if np.any(d == 0.0):
                    raise SingularMapError("affine map is singular")
                Minv = np.diag(1.0 / d)
            else:
                try:
                    Minv = np.linalg.inv(self.M)
                except np.linalg.LinAlgError as exc:
                    raise SingularMapError("affine map is singular") from exc
                if not np.all(np.isfinite(Minv)) or abs(np.linalg.det(self.M)) < 1e-300:
                    raise SingularMapError("affine map is singular")
            inv = AffineMap(Minv, -Minv @ self.c, self.angular)
            inv._inv = self
            self._inv = inv
        return self._inv

    def compose(self, other: "AffineMap") -> "AffineMap":
        """``self o other`` (apply ``other`` first)."""
        return AffineMap(self.M @ other.M, self.M @ other.c + self.c, self.angular | other.angular)

    @cached_property
    def is_axis_aligned(self) -> bool:
        off = self.M - np.diag(np.diag(self.M))
        return not np.any(off)

    @cached_property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.M, np.eye(self.dim)) and not np.any(self.c))

    @cached_property
    def small_blocks(self) -> bool:
        """True when M decouples into blocks of at most two coordinates."""
        return _small_blocks(self.M)

    def __repr__(self):
        return f"AffineMap(M={self.M.tolist()}, c={self.c.tolist()})"


def _small_blocks(M):
    nz = M != 0.0
    link = nz | nz.T
    n = M.shape[0]
    seen = np.zeros(n, dtype=bool)
    for i in range(n):
        if seen[i]:
            continue
        comp, stack = {i}, [i]
        while stack:
            j = stack.pop()
            for k in np.flatnonzero(link[j]):
                k = int(k)
                if k not in comp:
                    comp.add(k)
                    stack.append(k)
        if len(comp) > 2:
            return False
        seen[list(comp)] = True
    return True



class HPolytope:
    """``{x : A x <= b}``.

    ``generator`` is an optional ``(AffineMap, Box)`` pair recording that the
    polytope is exactly the image of that box. It unlocks closed-form bounding
    boxes and exact separating-axis intersection tests.
    """

    def __init__(self, A, b, generator: Optional[tuple] = None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != b.size:
            raise DimensionError(f"polytope with A {A.shape} and b {b.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise GeometryError("polytope rows must be finite")
        self.A = _frozen(A)
        self.b = _frozen(b)
        self.generator = generator

    @classmethod
    def from_box(cls, bx: Box) -> "HPolytope":
        return bx.to_hpoly()

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def contains(self, pts, tol=1e-9):
        pts = np.asarray(pts, dtype=float)
        return np.all(pts @ self.A.T <= self.b + tol, axis=-1)

    @cached_property
    def bbox(self) -> Box:
        return bounding_box(self)

    @cached_property
    def _sat_exact(self) -> bool:
        return self.generator is not None and self.generator[0].small_blocks

    def lift(self, n: int, dims: Sequence[int]) -> "HPolytope":
        """Embed a polytope over the coordinates ``dims`` of an ``n``-dim space."""
        A = np.zeros((self.A.shape[0], n))
        A[:, list(dims)] = self.A
        return HPolytope(A, self.b)

    def to_dict(self):
        return {"A": self.A.tolist(), "b": self.b.tolist()}

    def __eq__(self, other):
        if not isinstance(other, HPolytope):
            return NotImplemented
        return np.array_equal(self.A, other.A) and np.array_equal(self.b, other.b)

    __hash__ = None

    def __repr__(self):
        return f"HPolytope(m={self.A.shape[0]}, n={self.dim})"


def _check_dim(n1, n2):
    if n1 != n2:
        raise DimensionError(f"dimension mismatch: {n1} vs {n2}")


def apply_affine_box(m: AffineMap, bx: Box) -> HPolytope:
    """Exact image of ``bx`` under ``m`` as an H-polytope."""
    _check_dim(m.dim, bx.dim)
    inv = m.inverse()
    keep_lo = bx.lo > -LARGE
    keep_hi = bx.hi < LARGE
    A = np.vstack([inv.M[keep_hi], -inv.M[keep_lo]])
    # x = inv(y) = inv.M y + inv.c must satisfy lo <= x <= hi
    b = np.concatenate([bx.hi[keep_hi] - inv.c[keep_hi], -(bx.lo[keep_lo] - inv.c[keep_lo])])
    if A.shape[0] == 0:
        A = np.zeros((1, bx.dim))
        b = np.zeros(1)
    return HPolytope(A, b, generator=(m, bx))


def apply_affine_poly(m: AffineMap, p: HPolytope) -> HPolytope:
    """Exact image ``{M x + c : A x <= b}`` = ``{y : A M^-1 y <= b + A M^-1 c}``."""
    _check_dim(m.dim, p.dim)
    inv = m.inverse()
    AMinv = p.A @ inv.M
    gen = None
    if p.generator is not None:
        gen = (m.compose(p.generator[0]), p.generator[1])
    return HPolytope(AMinv, p.b - p.A @ inv.c, generator=gen)


def affine_box_bbox(m: AffineMap, bx: Box) -> Box:
    """Tight bounding box of ``m(bx)`` in closed form."""
    _check_dim(m.dim, bx.dim)
    absM = np.abs(m.M)
    ub = bx.unbounded
    c = np.where(ub, 0.0, bx.center)
    r = np.where(ub, 0.0, bx.radius)
    center = m.M @ c + m.c
    rad = absM @ r
    hit = (absM[:, ub] != 0.0).any(axis=1) if ub.any() else np.zeros(m.dim, dtype=bool)
    lo = np.where(hit, -LARGE, center - rad)
    hi = np.where(hit, LARGE, center + rad)
    return Box(lo, hi)


def poly_empty(p: HPolytope, tol=TAU_LP) -> bool:
    """True iff ``{x : A x <= b}`` has no point (phase-1 simplex)."""
    if p.generator is not None:
        return False
    return not LinearProgram(p.A, p.b, tol).feasible


def _box_rows(bx: Box):
    n = bx.dim
    I = np.eye(n)
    keep_hi = bx.hi < LARGE
    keep_lo = bx.lo > -LARGE
    return np.vstack([I[keep_hi], -I[keep_lo]]), np.concatenate([bx.hi[keep_hi], -bx.lo[keep_lo]])


def intersect_box_poly(bx: Box, p: HPolytope) -> HPolytope:
    _check_dim(bx.dim, p.dim)
    A2, b2 = _box_rows(bx)
    return HPolytope(np.vstack([p.A, A2]), np.concatenate([p.b, b2]))


def boxes_poly_overlap(lo, hi, p: HPolytope, tol=TAU_LP):
    """Vectorized ``box ∩ p != ∅`` for K boxes given as (K, n) bound arrays.

    Separating-axis prefilter along the box axes and the polytope's facet
    normals; it is decisive when ``p`` is the image of a box under a map with
    blocks of size <= 2. Otherwise undecided pairs go to the LP.
    """
    lo = np.atleast_2d(lo)
    hi = np.atleast_2d(hi)
    K = lo.shape[0]
    if K == 0:
        return np.zeros(0, dtype=bool)
    _check_dim(lo.shape[1], p.dim)
    try:
        pb = p.bbox
    except EmptySetError:
        return np.zeros(K, dtype=bool)
    cand = np.all((lo <= pb.hi + tol) & (hi >= pb.lo - tol), axis=1)
    if not cand.any():
        return cand
    idx = np.flatnonzero(cand)
    Apos = np.clip(p.A, 0.0, None)
    Aneg = np.clip(p.A, None, 0.0)
    # min over the box of each facet functional
    mins = lo[idx] @ Apos.T + hi[idx] @ Aneg.T
    scale = np.maximum(1.0, np.abs(p.b))
    sep = np.any(mins > p.b + tol * scale, axis=1)
    cand[idx[sep]] = False
    if p._sat_exact:
        return cand
    for k in np.flatnonzero(cand):
        q = intersect_box_poly(Box(lo[k], hi[k]), p)
        cand[k] = LinearProgram(q.A, q.b, tol).feasible
    return cand


def box_poly_intersect_empty(bx: Box, p: HPolytope) -> bool:
    """True iff ``bx ∩ p = ∅``."""
    _check_dim(bx.dim, p.dim)
    return not bool(boxes_poly_overlap(bx.lo[None], bx.hi[None], p)[0])


def box_intersect(a: Box, b: Box) -> Optional[Box]:
    _check_dim(a.dim, b.dim)
    lo = np.maximum(a.lo, b.lo)
    hi = np.minimum(a.hi, b.hi)
    if np.any(lo > hi):
        return None
    return Box(lo, hi)


def _overlaps_open(a: Box, b: Box) -> bool:
    return bool(np.all(np.maximum(a.lo, b.lo) < np.minimum(a.hi, b.hi)))


def box_subtract(a: Box, cover: Sequence[Box]) -> list:
    """Disjoint boxes whose union is ``a`` minus the union of ``cover``.

    Pieces are split slab-by-slab against each cover box in turn. Boundaries
    are closed, so the result may share faces with the cover (measure zero).
    """
    pieces = [a]
    for c in cover:
        _check_dim(a.dim, c.dim)
        nxt = []
        for r in pieces:
            if not _overlaps_open(r, c):
                if not c.contains_box(r):
                    nxt.append(r)
                continue
            lo, hi = r.lo.copy(), r.hi.copy()
            for d in range(a.dim):
                if c.lo[d] > lo[d]:
                    plo, phi = lo.copy(), hi.copy()
                    phi[d] = c.lo[d]
                    nxt.append(Box(plo, phi))
                    lo[d] = c.lo[d]
                if c.hi[d] < hi[d]:
                    plo, phi = lo.copy(), hi.copy()
                    plo[d] = c.hi[d]
                    nxt.append(Box(plo, phi))
                    hi[d] = c.hi[d]
        pieces = nxt
    return pieces


def bounding_box(p: HPolytope) -> Box:
    """Tightest axis-aligned box around ``p`` via 2n LPs (sentinel where unbounded)."""
    if p.generator is not None:
        return affine_box_bbox(*p.generator)
    lp = LinearProgram(p.A, p.b)
    if not lp.feasible:
        raise EmptySetError("bounding box of an empty polytope")
    n = p.dim
    lo = np.empty(n)
    hi = np.empty(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        st, val, _ = lp.minimize(e)
        lo[i] = -LARGE if st == UNBOUNDED else max(val, -LARGE)
        st, val, _ = lp.minimize(-e)
        hi[i] = LARGE if st == UNBOUNDED else min(-val, LARGE)
    hi = np.maximum(hi, lo)
    return Box(lo, hi)


def hull_lohi(lo, hi) -> Box:
    return Box(np.min(lo, axis=0), np.max(hi, axis=0))
