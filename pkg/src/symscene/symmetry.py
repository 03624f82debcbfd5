"""Symmetry maps that send every segment to a canonical virtual segment.

Three families:

* ``identity``: every segment is its own virtual segment.
* ``T``: translate so the segment's destination sits at the origin.
* ``TR``: translate, then rotate the planar position (and planar velocity)
  by minus the segment's planar heading; headings shift by the same angle.
  The canonical segment runs from ``(-L, 0[, -dz])`` to the origin.

Segments whose canonical forms agree within ``TAU_CANON`` share a virtual
mode. Grouping is greedy against the first member of each group, in sorted
mode order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .agents import simulate
from .geometry import AffineMap, Box, HPolytope, SingularMapError, apply_affine_box, apply_affine_poly

TAU_CANON = 1e-6
SYMMETRY_KINDS = ("identity", "T", "TR")


class SymmetryError(ValueError):
    pass


def wrap_angle(a):
    """Map angles into ``(-pi, pi]``."""
    a = np.asarray(a, dtype=float)
    w = np.mod(a + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


def _frame_angle(src, dest):
    d = np.asarray(dest, dtype=float)[..., :2] - np.asarray(src, dtype=float)[..., :2]
    return np.arctan2(d[..., 1], d[..., 0])


def segment_map(agent, kind: str, src, dest) -> AffineMap:
    """``gamma`` for one segment as an affine map on the agent state."""
    n = agent.state_dim
    lay = agent.layout
    ang = np.zeros(n, dtype=bool)
    if lay.heading is not None:
        ang[lay.heading] = True
    if kind == "identity":
        return AffineMap.identity(n, ang)
    src = np.asarray(src, dtype=float)
    dest = np.asarray(dest, dtype=float)
    M = np.eye(n)
    c = np.zeros(n)
    pos = list(lay.position)
    if kind == "T":
        c[pos] = -dest[:2]
    elif kind == "TR":
        th = float(_frame_angle(src, dest))
        co, si = np.cos(th), np.sin(th)
        R = np.array([[co, si], [-si, co]])
        M[np.ix_(pos, pos)] = R
        c[pos] = -R @ dest[:2]
        if lay.velocity is not None:
            vel = list(lay.velocity)
            M[np.ix_(vel, vel)] = R
        if lay.heading is not None:
            c[lay.heading] = -th
    else:
        raise SymmetryError(f"unknown symmetry {kind!r}; expected one of {SYMMETRY_KINDS}")
    if lay.altitude is not None and dest.size > 2:
        c[lay.altitude] = -dest[2]
    return AffineMap(M, c, ang)


def canonical_key(kind: str, src, dest) -> np.ndarray:
    src = np.asarray(src, dtype=float)
    dest = np.asarray(dest, dtype=float)
    if kind == "T":
        return src - dest
    if kind == "TR":
        L = np.linalg.norm(dest[:2] - src[:2])
        return np.concatenate([[L], src[2:] - dest[2:]])
    raise SymmetryError(f"no canonical key for {kind!r}")


def canonical_segment(kind: str, key) -> Tuple[np.ndarray, np.ndarray]:
    key = np.asarray(key, dtype=float)
    if kind == "T":
        return key.copy(), np.zeros_like(key)
    src = np.concatenate([[-key[0], 0.0], key[1:]])
    return src, np.zeros_like(src)


def _fmt(v):
    return ",".join(f"{float(x):.9g}" for x in np.atleast_1d(v))


@dataclass(frozen=True)
class VirtualMap:
    kind: str
    agent: object
    gamma: Dict[str, AffineMap]
    rv: Dict[str, str]
    canonical: Dict[str, Tuple[np.ndarray, np.ndarray]]
    members: Dict[str, Tuple[str, ...]]

    def mode_vir(self, m: str) -> str:
        return self.rv[m]

    def box_vir(self, bx: Box, m: str) -> HPolytope:
        return apply_affine_box(self.gamma[m], bx)

    def poly_vir(self, p: HPolytope, m: str) -> HPolytope:
        return apply_affine_poly(self.gamma[m], p)

    def vir_poly(self, p: HPolytope, m: str) -> HPolytope:
        return apply_affine_poly(self.gamma[m].inverse(), p)

    def transform_rows(self, x, src, dest):
        """Per-row ``gamma`` computed from segment geometry (vectorized)."""
        return transform_rows(self.agent, self.kind, x, src, dest)

    def canonical_rows(self, src, dest):
        return canonical_rows(self.agent, self.kind, src, dest)


def transform_rows(agent, kind, x, src, dest):
    x = np.array(x, dtype=float)
    if kind == "identity":
        return x
    src = np.broadcast_to(np.asarray(src, dtype=float), x.shape[:-1] + (np.shape(src)[-1],))
    dest = np.broadcast_to(np.asarray(dest, dtype=float), src.shape)
    lay = agent.layout
    pos = list(lay.position)
    rel = x[..., pos] - dest[..., :2]
    if kind == "TR":
        th = _frame_angle(src, dest)
        co, si = np.cos(th), np.sin(th)
        x[..., pos[0]] = co * rel[..., 0] + si * rel[..., 1]
        x[..., pos[1]] = -si * rel[..., 0] + co * rel[..., 1]
        if lay.velocity is not None:
            vx, vy = lay.velocity
            v = x[..., [vx, vy]].copy()
            x[..., vx] = co * v[..., 0] + si * v[..., 1]
            x[..., vy] = -si * v[..., 0] + co * v[..., 1]
        if lay.heading is not None:
            x[..., lay.heading] -= th
    elif kind == "T":
        x[..., pos] = rel
    else:
        raise SymmetryError(f"unknown symmetry {kind!r}")
    if lay.altitude is not None and dest.shape[-1] > 2:
        x[..., lay.altitude] -= dest[..., 2]
    return x


def canonical_rows(agent, kind, src, dest):
    src = np.asarray(src, dtype=float)
    dest = np.asarray(dest, dtype=float)
    if kind == "identity":
        return src, dest
    if kind == "T":
        return src - dest, np.zeros_like(dest)
    L = np.linalg.norm(dest[..., :2] - src[..., :2], axis=-1)
    csrc = np.concatenate([np.stack([-L, np.zeros_like(L)], axis=-1), src[..., 2:] - dest[..., 2:]], axis=-1)
    return csrc, np.zeros_like(csrc)


def make_virtual_map(kind: str, h, tau: float = TAU_CANON) -> VirtualMap:
    """Build ``(gamma, rv)`` for every mode of the automaton ``h``."""
    if kind not in SYMMETRY_KINDS:
        raise SymmetryError(f"unknown symmetry {kind!r}; expected one of {SYMMETRY_KINDS}")
    agent = h.agent
    if kind == "TR" and agent.layout.position is None:
        raise SymmetryError(f"agent {agent.name} has no planar position to rotate")
    gamma, rv, canonical, members = {}, {}, {}, {}
    if kind == "identity":
        for m in h.modes:
            gamma[m] = segment_map(agent, kind, *h.segments[m])
            rv[m] = m
            canonical[m] = tuple(np.array(v) for v in h.segments[m])
            members[m] = (m,)
        return VirtualMap(kind, agent, gamma, rv, canonical, members)

    reps = []      # (key, vid)
    groups: Dict[str, list] = {}
    for m in h.modes:
        src, dest = h.segments[m]
        gamma[m] = segment_map(agent, kind, src, dest)
        key = canonical_key(kind, src, dest)
        vid = None
        for rk, rvid in reps:
            if np.max(np.abs(rk - key)) <= tau:
                vid = rvid
                break
        if vid is None:
            vid = f"{kind}({_fmt(key)})"
            while vid in groups:
                vid = vid + "'"
            reps.append((key, vid))
            groups[vid] = []
            canonical[vid] = canonical_segment(kind, key)
        groups[vid].append(m)
        rv[m] = vid
    members = {v: tuple(sorted(ms)) for v, ms in groups.items()}
    return VirtualMap(kind, agent, gamma, rv, canonical, members)


@dataclass
class SymmetryCheck:
    passed: bool
    max_deviation: float
    worst_mode: Optional[str]
    worst_state: Optional[np.ndarray]
    n_samples: int
    tol: float


def sample_states(agent, h, modes, rng, spread=2.0):
    """States near each sampled mode's source waypoint, heading roughly along it."""
    n = len(modes)
    lay = agent.layout
    x = np.zeros((n, agent.state_dim))
    src = np.array([h.segments[m][0] for m in modes])
    dest = np.array([h.segments[m][1] for m in modes])
    x[:, list(lay.position)] = src[:, :2] + rng.uniform(-spread, spread, (n, 2))
    if lay.altitude is not None:
        x[:, lay.altitude] = src[:, 2] + rng.uniform(-0.5 * spread, 0.5 * spread, n)
    if lay.heading is not None:
        x[:, lay.heading] = _frame_angle(src, dest) + rng.uniform(-0.6, 0.6, n)
    if lay.velocity is not None:
        x[:, list(lay.velocity)] = rng.uniform(-0.5, 0.5, (n, 2))
    if lay.vertical_velocity is not None:
        x[:, lay.vertical_velocity] = rng.uniform(-0.3, 0.3, n)
    return x


def validate_symmetry(vm: VirtualMap, h, n_samples: int = 1000, horizon: float = 5.0,
                      tol: float = 1e-6, dt: float = 0.01, seed: int = 0, agent=None) -> SymmetryCheck:
    """Check ``gamma_s(xi(x0, s)(t)) == xi(gamma_s(x0), rv(s))(t)`` on random samples.

    ``agent`` defaults to the automaton's agent; pass another (for example
    one with a modified controller) to test it against the same maps.
    """
    agent = h.agent if agent is None else agent
    rng = np.random.default_rng(seed)
    modes = [h.modes[i] for i in rng.integers(0, len(h.modes), n_samples)]
    x0 = sample_states(agent, h, modes, rng)
    src = np.array([h.segments[m][0] for m in modes])
    dest = np.array([h.segments[m][1] for m in modes])
    Ms = np.array([vm.gamma[m].M for m in modes])
    cs = np.array([vm.gamma[m].c for m in modes])
    csrc = np.array([vm.canonical[vm.rv[m]][0] for m in modes])
    cdest = np.array([vm.canonical[vm.rv[m]][1] for m in modes])

    _, lhs = simulate(agent, x0, (src, dest), horizon, dt)
    lhs = np.einsum("kij,tkj->tki", Ms, lhs) + cs
    _, rhs = simulate(agent, np.einsum("kij,kj->ki", Ms, x0) + cs, (csrc, cdest), horizon, dt)
    diff = np.abs(lhs - rhs)
    hd = agent.layout.heading
    if hd is not None:
        diff[..., hd] = np.abs(wrap_angle(lhs[..., hd] - rhs[..., hd]))
    per = diff.max(axis=(0, 2))
    k = int(np.argmax(per))
    worst = float(per[k])
    return SymmetryCheck(worst <= tol, worst, modes[k], x0[k], n_samples, tol)


class TiltRotation:
    """Input map for tilt-controlled agents under ``TR``.

    Pitch and roll set the planar acceleration ``(g tan pitch, -g tan roll)``;
    rotating the frame rotates that vector, which is nonlinear in the tilt
    angles. Thrust is unchanged.
    """

    def __init__(self, g=9.81):
        self.g = g

    def __call__(self, u, src, dest, inverse=False):
        u = np.array(u, dtype=float)
        th = _frame_angle(src, dest)
        if inverse:
            th = -th
        ax = self.g * np.tan(u[..., 0])
        ay = -self.g * np.tan(u[..., 1])
        co, si = np.cos(th), np.sin(th)
        rx = co * ax + si * ay
        ry = -si * ax + co * ay
        u[..., 0] = np.arctan(rx / self.g)
        u[..., 1] = -np.arctan(ry / self.g)
        return u


def input_map(agent, kind):
    """Natural ``beta`` for the agent under ``kind`` (``None`` means identity)."""
    if kind == "TR" and agent.layout.velocity is not None:
        return TiltRotation()
    return None


def symmetrize_controller(controller: Callable, kind: str, agent, beta=None) -> Callable:
    """``h'(x, s) = beta_s^-1(h(gamma_s(x), rv(s)))``.

    ``beta`` is ``None`` (identity), a constant invertible :class:`AffineMap`
    on inputs, or a callable ``beta(u, src, dest, inverse=False)``.
    The result is a controller that satisfies the equivariance condition for
    ``kind`` by construction.
    """
    if isinstance(beta, AffineMap):
        inv = beta.inverse()   # raises SingularMapError when beta is singular
        beta_inv = lambda u, s, d: inv(u)
    elif beta is None:
        beta_inv = None
    elif callable(beta):
        beta_inv = lambda u, s, d: beta(u, s, d, inverse=True)
    else:
        raise SymmetryError("beta must be None, an AffineMap or a callable")

    def h_sym(x, src, dest):
        x = np.asarray(x, dtype=float)
        src = np.asarray(src, dtype=float)
        dest = np.asarray(dest, dtype=float)
        xs = transform_rows(agent, kind, x, src, dest)
        cs, cd = canonical_rows(agent, kind, src, dest)
        u = controller(xs, cs, cd)
        if beta_inv is not None and kind != "identity":
            u = beta_inv(u, src, dest)
        return u

    return h_sym


__all__ = ["TAU_CANON", "SYMMETRY_KINDS", "SymmetryError", "SingularMapError", "VirtualMap",
           "make_virtual_map", "segment_map", "validate_symmetry", "symmetrize_controller",
           "TiltRotation", "input_map", "wrap_angle", "transform_rows", "canonical_rows"]
