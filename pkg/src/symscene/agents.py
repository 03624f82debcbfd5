"""Vehicle models with PD segment-tracking controllers, and a fixed-step RK4 simulator.

All flows are vectorized: ``x`` may be ``(n,)`` or ``(N, n)`` and the segment
endpoints broadcast against it, so one call can advance executions that are
following different segments.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

G = 9.81
DIVERGENCE_NORM = 1e9


class ReachDivergence(RuntimeError):
    """Simulation left the finite working domain (state norm above 1e9)."""

    def __init__(self, mode=None, msg="ODE solution diverged"):
        self.mode = mode
        super().__init__(f"{msg} (mode {mode})" if mode is not None else msg)


@dataclass(frozen=True)
class StateLayout:
    """Which state coordinates the symmetry maps act on."""

    position: tuple                    # planar (x, y)
    velocity: Optional[tuple] = None   # planar (vx, vy)
    heading: Optional[int] = None
    altitude: Optional[int] = None
    vertical_velocity: Optional[int] = None


@dataclass(frozen=True)
class Car:
    """Kinematic bicycle, state (x, y, heading), inputs (speed, steering).

    The controller drives at constant speed and steers on cross-track error
    and the sine of the heading error, which keeps the closed loop smooth and
    2*pi-periodic in heading.
    """

    speed: float = 1.0
    wheelbase: float = 1.0
    k_cross: float = 0.3
    k_heading: float = 1.2
    max_steer: float = 0.6
    lipschitz: float = 3.0
    controller_override: Optional[Callable] = field(default=None, compare=False)

    name = "car"
    state_dim = 3
    workspace_dim = 2
    input_dim = 2
    variables = ("x", "y", "theta")
    layout = StateLayout(position=(0, 1), heading=2)

    def _steer(self, x, c, s, src, dest):
        src = np.asarray(src, dtype=float)
        dest = np.asarray(dest, dtype=float)
        dx = dest[..., 0] - src[..., 0]
        dy = dest[..., 1] - src[..., 1]
        n = np.sqrt(dx * dx + dy * dy)
        n = np.where(n > 0.0, n, 1.0)
        tx, ty = dx / n, dy / n
        cross = tx * (x[..., 1] - src[..., 1]) - ty * (x[..., 0] - src[..., 0])
        err = s * tx - c * ty            # sin(theta - segment heading)
        return np.clip(-self.k_cross * cross - self.k_heading * err, -self.max_steer, self.max_steer)

    def pd_controller(self, x, src, dest):
        x = np.asarray(x, dtype=float)
        th = x[..., 2]
        steer = self._steer(x, np.cos(th), np.sin(th), src, dest)
        return np.stack([np.broadcast_to(self.speed, steer.shape), steer], axis=-1)

    def controller(self, x, src, dest):
        if self.controller_override is not None:
            return self.controller_override(x, src, dest)
        return self.pd_controller(x, src, dest)

    def open_loop(self, x, u):
        th = x[..., 2]
        v = u[..., 0]
        return np.stack([v * np.cos(th), v * np.sin(th), v / self.wheelbase * np.tan(u[..., 1])], axis=-1)

    def flow(self, x, src, dest):
        x = np.asarray(x, dtype=float)
        if self.controller_override is not None:
            return self.open_loop(x, self.controller_override(x, src, dest))
        th = x[..., 2]
        c, s = np.cos(th), np.sin(th)
        steer = self._steer(x, c, s, src, dest)
        v = self.speed
        out = np.empty(np.broadcast_shapes(x.shape, steer.shape + (3,)))
        out[..., 0] = v * c
        out[..., 1] = v * s
        out[..., 2] = v / self.wheelbase * np.tan(steer)
        return out

    def with_controller(self, h):
        return replace(self, controller_override=h)


@dataclass(frozen=True)
class Quadrotor:
    """Point-mass quadrotor with tilt/thrust inputs (pitch, roll, thrust).

    The PD controller tracks a reference that slides along the segment at
    ``speed``: reference position is the projection onto the segment line,
    reference velocity is ``speed`` along it. Planar acceleration is
    saturated by vector norm to ``g*tan(max_tilt)`` so each tilt stays in
    ``[-max_tilt, max_tilt]``; thrust is clipped to its interval.
    """

    speed: float = 1.0
    kp: float = 0.2
    kd: float = 1.0
    max_tilt: float = 0.1
    thrust_range: tuple = (7.81, 11.81)
    lipschitz: float = 4.0
    controller_override: Optional[Callable] = field(default=None, compare=False)

    name = "quadrotor"
    state_dim = 6
    workspace_dim = 3
    input_dim = 3
    variables = ("px", "py", "pz", "vx", "vy", "vz")
    layout = StateLayout(position=(0, 1), velocity=(3, 4), altitude=2, vertical_velocity=5)

    def desired_accel(self, x, src, dest):
        x = np.asarray(x, dtype=float)
        src = np.asarray(src, dtype=float)
        dest = np.asarray(dest, dtype=float)
        d = dest - src
        t = d / np.linalg.norm(d, axis=-1, keepdims=True)
        rel = x[..., :3] - src
        along = np.sum(rel * t, axis=-1, keepdims=True)
        perp = rel - along * t
        return -self.kp * perp - self.kd * (x[..., 3:6] - self.speed * t)

    def pd_controller(self, x, src, dest):
        a = self.desired_accel(x, src, dest)
        amax = G * np.tan(self.max_tilt)
        pn = np.linalg.norm(a[..., :2], axis=-1, keepdims=True)
        scale = np.minimum(1.0, amax / np.maximum(pn, 1e-300))
        axy = a[..., :2] * scale
        pitch = np.arctan(axy[..., 0] / G)
        roll = -np.arctan(axy[..., 1] / G)
        thrust = np.clip(G + a[..., 2], *self.thrust_range)
        return np.stack([pitch, roll, thrust], axis=-1)

    def controller(self, x, src, dest):
        if self.controller_override is not None:
            return self.controller_override(x, src, dest)
        return self.pd_controller(x, src, dest)

    def open_loop(self, x, u):
        return np.concatenate(
            [x[..., 3:6],
             np.stack([G * np.tan(u[..., 0]), -G * np.tan(u[..., 1]), u[..., 2] - G], axis=-1)],
            axis=-1)

    def flow(self, x, src, dest):
        x = np.asarray(x, dtype=float)
        return self.open_loop(x, self.controller(x, src, dest))

    def with_controller(self, h):
        return replace(self, controller_override=h)


AGENTS = {"car": Car, "quadrotor": Quadrotor, "quad": Quadrotor}


def make_agent(name: str, **params):
    try:
        cls = AGENTS[name]
    except KeyError:
        raise ValueError(f"unknown agent {name!r}; expected one of {sorted(set(AGENTS))}") from None
    return cls(**params)


def time_grid(horizon: float, dt: float):
    """``0, dt, 2dt, ..., horizon`` with a shortened final step if needed."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if dt <= 0:
        raise ValueError("step size must be positive")
    k = max(1, int(np.ceil(horizon / dt - 1e-9)))
    t = np.arange(k + 1) * dt
    t[-1] = horizon
    return t


def rk4_step(f, x, h):
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _lift_segment(agent, src, dest):
    src = np.asarray(src, dtype=float)
    dest = np.asarray(dest, dtype=float)
    d = agent.workspace_dim
    if src.shape[-1] < d:
        pad = [(0, 0)] * (src.ndim - 1) + [(0, d - src.shape[-1])]
        src = np.pad(src, pad)
        dest = np.pad(dest, pad)
    return src, dest


def simulate(agent, x0, segment, horizon: float, dt: float = 0.01, mode=None):
    """Fixed-step RK4 trajectory (or batch of trajectories).

    ``x0`` is ``(n,)`` or ``(N, n)``; returns ``(t, states)`` with states of
    shape ``(K+1, n)`` or ``(K+1, N, n)``. Deterministic.
    """
    src, dest = _lift_segment(agent, *segment)
    x = np.array(x0, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("initial state must be finite")
    t = time_grid(horizon, dt)
    out = np.empty((t.size,) + x.shape)
    out[0] = x
    f = lambda z: agent.flow(z, src, dest)
    for i in range(1, t.size):
        x = rk4_step(f, x, t[i] - t[i - 1])
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > DIVERGENCE_NORM:
            raise ReachDivergence(mode)
        out[i] = x
    return t, out


def biased_controller(agent, bias: float = 0.1):
    """The agent's PD controller plus a world-frame bias.

    The bias depends on absolute heading and position, so the closed loop is
    neither translation nor rotation invariant. Used to exercise the
    symmetry validator and controller symmetrization.
    """
    base = agent.pd_controller

    def h(x, src, dest):
        x = np.asarray(x, dtype=float)
        u = np.array(base(x, src, dest), dtype=float)
        drift = np.tanh(0.2 * x[..., 0])
        if agent.layout.heading is not None:
            u[..., 1] += bias * (np.cos(x[..., agent.layout.heading]) + drift)
        else:
            u[..., 0] += bias * (0.5 + drift)
        return u

    return h
