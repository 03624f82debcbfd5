"""Scenario generators used by the fixtures, tests and demos.

Every generator returns a plain scenario document (a dict in the JSON
schema of :mod:`symscene.scenario_io`); pass it through
:func:`scenario_from_doc` to get a validated :class:`Scenario`.
"""

from __future__ import annotations

import json

import numpy as np

from .scenario_io import SCHEMA, Scenario, parse_scenario


def scenario_from_doc(doc: dict) -> Scenario:
    return parse_scenario(json.dumps(doc))


def initial_box(agent: str, start, heading: float, pos_radius: float, heading_radius: float,
                speed: float = 1.0, vel_radius: float = 0.3):
    """Initial set around ``start`` for the named agent."""
    x, y = float(start[0]), float(start[1])
    if agent == "car":
        return {"lo": [x - pos_radius, y - pos_radius, heading - heading_radius],
                "hi": [x + pos_radius, y + pos_radius, heading + heading_radius]}
    z = float(start[2]) if len(start) > 2 else 0.0
    vx, vy = speed * np.cos(heading), speed * np.sin(heading)
    return {"lo": [x - pos_radius, y - pos_radius, z - pos_radius, vx - vel_radius, vy - vel_radius, -vel_radius],
            "hi": [x + pos_radius, y + pos_radius, z + pos_radius, vx + vel_radius, vy + vel_radius, vel_radius]}


def polyline_doc(points, agent="car", guard_radius=0.5, tbound=None, pos_radius=1.0, heading_radius=0.6,
                 unsafe=None, name="", ids=None, workspace_dim=None):
    """Single-path plan through ``points``; segment ``i`` joins points ``i`` and ``i+1``.

    ``tbound`` defaults to 1.6 times the segment length (unit speed).
    """
    pts = [list(map(float, p)) for p in points]
    wdim = workspace_dim or len(pts[0])
    n = len(pts) - 1
    ids = ids or [f"s{i:03d}" for i in range(n)]
    segs = [{"id": ids[i], "src": pts[i], "dest": pts[i + 1]} for i in range(n)]
    lengths = [float(np.linalg.norm(np.subtract(pts[i + 1], pts[i]))) for i in range(n)]
    tb = {ids[i]: (1.6 * lengths[i] if tbound is None else float(tbound)) for i in range(n)}
    d0 = np.subtract(pts[1], pts[0])
    heading = float(np.arctan2(d0[1], d0[0]))
    r = [guard_radius] * wdim
    doc = {
        "schema": SCHEMA,
        "workspace_dim": wdim,
        "initial_segment": ids[0],
        "initial_set": initial_box(agent, pts[0], heading, pos_radius, heading_radius),
        "segments": segs,
        "guard_radius": r,
        "tbounds": tb,
        "unsafe": unsafe or {},
    }
    if name:
        doc["name"] = name
    return doc


def zigzag_points(n, length=5.0, turn=0.2, start=(0.0, 0.0), heading=0.0):
    """Waypoints of an ``n``-segment zigzag whose direction alternates by ``turn``."""
    pts = [np.array(start, dtype=float)]
    for i in range(n):
        a = heading + (turn / 2 if i % 2 == 0 else -turn / 2)
        pts.append(pts[-1] + length * np.array([np.cos(a), np.sin(a)]))
    return pts


def uniform_chain(n, agent="car", length=5.0, turn=0.2, guard_radius=0.5, **kw):
    """Uniform-length zigzag chain; the initial set covers the guard-reset states."""
    pts = zigzag_points(n, length, turn)
    if agent != "car":
        pts = [np.append(p, 0.0) for p in pts]
    kw.setdefault("name", f"uniform-chain-{n}")
    return polyline_doc(pts, agent=agent, guard_radius=guard_radius, **kw)


def lengths_plan(lengths, rng, agent="car", max_turn=0.6):
    """Single path with the given segment lengths and random bounded turns."""
    h = 0.0
    pts = [np.zeros(2)]
    for L in lengths:
        h += rng.uniform(-max_turn, max_turn)
        pts.append(pts[-1] + L * np.array([np.cos(h), np.sin(h)]))
    return polyline_doc(pts, agent=agent)


def k_length_plan(k, n_segments, rng, base=3.0, step=0.75):
    """Plan with exactly ``k`` distinct segment lengths among ``n_segments >= k`` segments."""
    values = base + step * np.arange(k)
    lengths = np.concatenate([values, rng.choice(values, n_segments - k)])
    rng.shuffle(lengths)
    return lengths_plan(lengths, rng)


def random_graph_doc(n_segments, rng, lengths=(4.0, 5.0, 6.0), agent="car"):
    """Random plan graph: a path plus back-edges and branches reusing waypoints.

    Waypoints are placed by walking; extra segments join existing waypoints
    whose distance equals one of ``lengths`` only when generated that way, so
    the graph is general (branching, cycles) while lengths stay in a small set.
    """
    pts = [np.zeros(2)]
    segs = []
    h = 0.0
    cur = 0
    while len(segs) < n_segments:
        if len(pts) > 2 and rng.random() < 0.2:
            # branch from a random earlier waypoint
            cur = int(rng.integers(0, len(pts)))
        h = rng.uniform(-np.pi, np.pi)
        L = float(rng.choice(lengths))
        pts.append(pts[cur] + L * np.array([np.cos(h), np.sin(h)]))
        segs.append((cur, len(pts) - 1))
        cur = len(pts) - 1
        if rng.random() < 0.15 and len(segs) < n_segments:
            # return along the same segment (a reverse edge gives a cycle)
            segs.append((cur, segs[-1][0]))
            cur = segs[-1][1]
    ids = [f"e{i:03d}" for i in range(len(segs))]
    doc = {
        "schema": SCHEMA,
        "workspace_dim": 2,
        "initial_segment": ids[0],
        "initial_set": initial_box(agent, pts[segs[0][0]], 0.0, 0.2, 0.2),
        "segments": [{"id": ids[i], "src": pts[a].tolist(), "dest": pts[b].tolist()}
                     for i, (a, b) in enumerate(segs)],
        "guard_radius": [0.5, 0.5],
        "default_tbound": 10.0,
    }
    return doc


def box_obstacle(center, half):
    c = np.asarray(center, dtype=float)
    h = np.asarray(half, dtype=float)
    return {"box": [(c - h).tolist(), (c + h).tolist()]}


def segment_frame_point(src, dest, along, lateral):
    """World point ``along`` metres from ``src`` and ``lateral`` metres to the left."""
    src = np.asarray(src, dtype=float)[:2]
    d = np.asarray(dest, dtype=float)[:2] - src
    t = d / np.linalg.norm(d)
    nrm = np.array([-t[1], t[0]])
    return src + along * t + lateral * nrm
