"""Pluggable reachset computation.

An engine is anything with ``compute_reachset(agent, initset, segment,
horizon, mode=None) -> Flowpipe``. Two engines are built in:

* ``IntervalLipschitzEngine``: center trajectory plus a radius grown by
  ``exp(L * t)``; sound whenever ``L`` bounds the closed-loop Lipschitz
  constant in the infinity norm.
* ``SampleBloatEngine``: hull of simulated samples (center, face centers,
  corners, random interior points), bloated. Coverage is probabilistic.

Both apply the same final bloat to the raw per-step hull, so the interval
engine's boxes contain the sample engine's boxes on identical queries.

``SubprocessEngine`` talks to an external tool over stdin/stdout; see
:mod:`symscene.reach_server` for the protocol.
"""

from __future__ import annotations

import io
import json
import subprocess
import zlib
from dataclasses import dataclass

import numpy as np

from .agents import DIVERGENCE_NORM, ReachDivergence, _lift_segment, rk4_step, time_grid
from .geometry import Box

ENGINE_KINDS = ("interval-lipschitz", "sample-bloat")


@dataclass(frozen=True)
class Flowpipe:
    """Time-sliced boxes: slice k covers ``[t_lo[k], t_hi[k]]`` with ``[lo[k], hi[k]]``."""

    t_lo: np.ndarray
    t_hi: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __len__(self):
        return self.t_lo.size

    @property
    def dim(self):
        return self.lo.shape[1]

    @property
    def horizon(self):
        return float(self.t_hi[-1]) if len(self) else 0.0

    @property
    def steps(self):
        return [(float(a), float(b), Box(l, h)) for a, b, l, h in zip(self.t_lo, self.t_hi, self.lo, self.hi)]

    def box(self, k) -> Box:
        return Box(self.lo[k], self.hi[k])

    def hull(self) -> Box:
        return Box(self.lo.min(axis=0), self.hi.max(axis=0))

    def slices_at(self, t):
        return np.flatnonzero((self.t_lo <= t + 1e-12) & (self.t_hi >= t - 1e-12))

    def to_csv(self) -> str:
        buf = io.StringIO()
        for a, b, l, h in zip(self.t_lo, self.t_hi, self.lo, self.hi):
            buf.write(",".join(repr(float(v)) for v in (a, b, *l, *h)) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, dim: int) -> "Flowpipe":
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("t_lo"):
                continue
            vals = [float(v) for v in line.split(",")]
            if len(vals) != 2 + 2 * dim:
                raise ValueError(f"flowpipe record has {len(vals)} fields, expected {2 + 2 * dim}")
            rows.append(vals)
        if not rows:
            raise ValueError("empty flowpipe")
        arr = np.array(rows)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2:2 + dim], arr[:, 2 + dim:])

    def equals(self, other: "Flowpipe") -> bool:
        return all(np.array_equal(a, b) for a, b in
                   ((self.t_lo, other.t_lo), (self.t_hi, other.t_hi), (self.lo, other.lo), (self.hi, other.hi)))


def _bloat(lo, hi, scale, pad):
    c = 0.5 * (lo + hi)
    r = 0.5 * (hi - lo) * scale + pad
    return c - r, c + r


def _slice_pipe(t, lo_pts, hi_pts, scale, pad):
    """Per-slice hull of the grid bounds at both slice endpoints, then bloat."""
    lo = np.minimum(lo_pts[:-1], lo_pts[1:])
    hi = np.maximum(hi_pts[:-1], hi_pts[1:])
    lo, hi = _bloat(lo, hi, scale, pad)
    return Flowpipe(t[:-1].copy(), t[1:].copy(), lo, hi)


def _integrate(agent, x, src, dest, t, mode):
    out = np.empty((t.size,) + x.shape)
    out[0] = x
    f = lambda z: agent.flow(z, src, dest)
    for i in range(1, t.size):
        x = rk4_step(f, x, t[i] - t[i - 1])
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > DIVERGENCE_NORM:
            raise ReachDivergence(mode)
        out[i] = x
    return out


class ReachEngine:
    kind = "abstract"
    probabilistic = False

    def __init__(self, dt=0.01, scale=1.2, pad=1e-3):
        self.dt = float(dt)
        self.scale = float(scale)
        self.pad = float(pad)

    def compute_reachset(self, agent, initset: Box, segment, horizon: float, mode=None) -> Flowpipe:
        raise NotImplementedError

    def describe(self):
        return {"kind": self.kind, "dt": self.dt, "scale": self.scale, "pad": self.pad}

    @staticmethod
    def _check(agent, initset, horizon):
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        if initset.dim != agent.state_dim:
            raise ValueError(f"initial set has dimension {initset.dim}, agent state is {agent.state_dim}")
        if np.any(initset.unbounded):
            raise ValueError("initial set must be bounded")


class IntervalLipschitzEngine(ReachEngine):
    kind = "interval-lipschitz"

    def __init__(self, dt=0.01, lipschitz=None, scale=1.2, pad=1e-3):
        super().__init__(dt, scale, pad)
        self.lipschitz = lipschitz

    def describe(self):
        d = super().describe()
        d["lipschitz"] = self.lipschitz
        return d

    def compute_reachset(self, agent, initset, segment, horizon, mode=None):
        self._check(agent, initset, horizon)
        L = agent.lipschitz if self.lipschitz is None else self.lipschitz
        src, dest = _lift_segment(agent, *segment)
        t = time_grid(horizon, self.dt)
        centers = _integrate(agent, initset.center, src, dest, t, mode)
        rho = float(np.max(initset.radius)) * np.exp(L * t)
        rho = rho[:, None]
        return _slice_pipe(t, centers - rho, centers + rho, self.scale, self.pad)


class SampleBloatEngine(ReachEngine):
    kind = "sample-bloat"
    probabilistic = True

    def __init__(self, dt=0.01, scale=1.2, pad=1e-3, n_random=32, max_corners=64, seed=0):
        super().__init__(dt, scale, pad)
        self.n_random = int(n_random)
        self.max_corners = int(max_corners)
        self.seed = int(seed)

    def describe(self):
        d = super().describe()
        d.update(n_random=self.n_random, max_corners=self.max_corners, seed=self.seed)
        return d

    def _rng(self, initset, src, dest, horizon):
        key = b"".join(np.ascontiguousarray(a, dtype=float).tobytes()
                       for a in (initset.lo, initset.hi, src, dest, [horizon]))
        return np.random.default_rng([self.seed, zlib.crc32(key)])

    def samples(self, initset: Box, rng) -> np.ndarray:
        n = initset.dim
        c, r = initset.center, initset.radius
        faces = np.concatenate([c + np.diag(r), c - np.diag(r)])
        if 2 ** n <= self.max_corners:
            corners = initset.vertices()
        else:
            bits = rng.integers(0, 2, size=(self.max_corners, n))
            corners = np.where(bits == 1, initset.hi, initset.lo)
        interior = initset.lo + rng.random((self.n_random, n)) * initset.width
        return np.vstack([c[None], faces, corners, interior])

    def compute_reachset(self, agent, initset, segment, horizon, mode=None):
        self._check(agent, initset, horizon)
        src, dest = _lift_segment(agent, *segment)
        rng = self._rng(initset, src, dest, horizon)
        pts = self.samples(initset, rng)
        t = time_grid(horizon, self.dt)
        traj = _integrate(agent, pts, src, dest, t, mode)
        return _slice_pipe(t, traj.min(axis=1), traj.max(axis=1), self.scale, self.pad)


class SubprocessEngine(ReachEngine):
    """Delegates each query to an external command.

    Request (stdin, JSON): ``{"agent", "initset": {"lo", "hi"}, "segment":
    {"src", "dest"}, "horizon", "dt"}``. Response (stdout): one CSV record
    per slice, ``t_lo,t_hi,lo...,hi...``. A nonzero exit status is an engine
    failure.
    """

    kind = "subprocess"

    def __init__(self, command, dt=0.01, timeout=None, probabilistic=True):
        super().__init__(dt, 1.0, 0.0)
        self.command = list(command)
        self.timeout = timeout
        self.probabilistic = probabilistic

    def describe(self):
        return {"kind": self.kind, "dt": self.dt, "command": self.command}

    def compute_reachset(self, agent, initset, segment, horizon, mode=None):
        self._check(agent, initset, horizon)
        src, dest = _lift_segment(agent, *segment)
        req = {
            "agent": agent.name,
            "initset": initset.to_dict(),
            "segment": {"src": src.tolist(), "dest": dest.tolist()},
            "horizon": float(horizon),
            "dt": self.dt,
        }
        proc = subprocess.run(self.command, input=json.dumps(req), capture_output=True,
                              text=True, timeout=self.timeout)
        if proc.returncode != 0:
            if "diverged" in proc.stderr:
                raise ReachDivergence(mode)
            raise RuntimeError(f"reachability subprocess failed ({proc.returncode}): {proc.stderr.strip()}")
        return Flowpipe.from_csv(proc.stdout, agent.state_dim)


def make_engine(kind: str, dt=0.01, seed=0, **params) -> ReachEngine:
    if kind == "interval-lipschitz":
        return IntervalLipschitzEngine(dt=dt, **params)
    if kind == "sample-bloat":
        return SampleBloatEngine(dt=dt, seed=seed, **params)
    raise ValueError(f"unknown engine {kind!r}; expected one of {ENGINE_KINDS}")


def compute_reachset(engine: ReachEngine, agent, initset: Box, segment, horizon, mode=None) -> Flowpipe:
    return engine.compute_reachset(agent, initset, segment, horizon, mode)
