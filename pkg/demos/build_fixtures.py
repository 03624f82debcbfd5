"""Regenerate the scenario fixtures in ../fixtures.

Run from anywhere: ``python demos/build_fixtures.py``. Each fixture's name
says what it exercises; ``*_unsafe_*`` fixtures put an obstacle where the
vehicle provably drives, so no verifier may call them safe.
"""

import json
import os

import numpy as np

from symscene.plans import (box_obstacle, k_length_plan, polyline_doc, random_graph_doc,
                            segment_frame_point, uniform_chain, zigzag_points)

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "fixtures")


def lift(pts, z=0.0):
    return [np.append(p, z) for p in pts]


def merged_corridor(agent="car"):
    # six equal-length segments; one obstacle beside s004 only. Under TR all
    # six share a virtual mode whose early, wide reachset (from the large
    # initial set) touches the transported obstacle, so one split is needed.
    pts = zigzag_points(6)
    c = segment_frame_point(pts[4], pts[5], 2.5, 1.35)
    if agent == "car":
        return polyline_doc(pts, unsafe={"s004": [box_obstacle(c, [0.25, 0.25])]}, name="s1-merged-corridor")
    return polyline_doc(lift(pts), agent=agent, name="s1-merged-corridor-quad",
                        unsafe={"s004": [box_obstacle(np.append(c, 0.0), [0.25, 0.25, 1.0])]})


def fixtures():
    fx = {}
    fx["s1"] = merged_corridor()
    fx["s1_quad"] = merged_corridor("quadrotor")
    fx["single_segment"] = polyline_doc([[0, 0], [8, 0]], pos_radius=0.3, heading_radius=0.2, name="single")
    fx["chain_car_4"] = uniform_chain(4)
    fx["chain_quad_4"] = uniform_chain(4, agent="quadrotor")
    fx["chain_car_120"] = uniform_chain(120)
    fx["chain_quad_120"] = uniform_chain(120, agent="quadrotor")

    pts = zigzag_points(5, turn=0.4)
    obs = {"s001": [box_obstacle(segment_frame_point(pts[1], pts[2], 2.5, -2.0), [0.4, 0.3])],
           "s003": [box_obstacle(segment_frame_point(pts[3], pts[4], 2.0, 2.2), [0.5, 0.5])]}
    fx["zigzag_obstacles_car"] = polyline_doc(pts, unsafe=obs, name="zigzag-obstacles")
    obs_q = {k: [{"box": [v[0]["box"][0] + [-1.0], v[0]["box"][1] + [1.0]]}] for k, v in obs.items()}
    fx["zigzag_obstacles_quad"] = polyline_doc(lift(pts), agent="quadrotor", unsafe=obs_q,
                                               name="zigzag-obstacles-quad")

    # obstacle straddling the path of the first segment
    pts = zigzag_points(3)
    fx["unsafe_on_path_car"] = polyline_doc(
        pts, unsafe={"s000": [box_obstacle(segment_frame_point(pts[0], pts[1], 3.0, 0.0), [0.3, 0.3])]},
        name="unsafe-on-path")
    fx["unsafe_on_path_quad"] = polyline_doc(
        lift(pts), agent="quadrotor",
        unsafe={"s001": [box_obstacle(np.append(segment_frame_point(pts[1], pts[2], 2.5, 0.0), 0.0),
                                      [0.3, 0.3, 0.5])]},
        name="unsafe-on-path-quad")
    # obstacle on a later merged segment's centreline: splits exhaust, still unknown
    pts = zigzag_points(4)
    fx["unsafe_late_car"] = polyline_doc(
        pts, unsafe={"s003": [box_obstacle(segment_frame_point(pts[3], pts[4], 2.0, 0.0), [0.2, 0.2])]},
        name="unsafe-late")

    # triangular (non-box) obstacle near a gentle bend
    pts = [[0, 0], [6, 0], [11.7, 1.9]]
    A = [[0.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]
    fx["triangle_obstacle_car"] = polyline_doc(
        pts, pos_radius=0.4, heading_radius=0.3,
        unsafe={"s000": [{"A": A, "b": [-2.0, 6.0, 0.0]}]}, name="triangle-obstacle")
    fx["triangle_unsafe_car"] = polyline_doc(
        pts, pos_radius=0.4, heading_radius=0.3,
        unsafe={"s000": [{"A": A, "b": [0.5, 5.0, 0.5]}]}, name="triangle-unsafe")

    # hexagonal closed loop (the plan graph has a cycle); obstacle inside
    ang = np.arange(7) * np.pi / 3
    hexpts = [[5 * np.cos(a), 5 * np.sin(a)] for a in ang]
    hexpts[-1] = hexpts[0]
    loop = polyline_doc(hexpts, pos_radius=0.3, heading_radius=0.2, tbound=8.0, name="hexagon-loop")
    loop["edges"] = [[f"s{i:03d}", f"s{(i + 1) % 6:03d}"] for i in range(6)]
    loop["unsafe"] = {f"s{i:03d}": [box_obstacle([0, 0], [1.5, 1.5])] for i in range(6)}
    fx["hexagon_loop_car"] = loop

    # branching graph with reverse edges
    rng = np.random.default_rng(7)
    g = random_graph_doc(8, rng)
    fx["graph_branch_car"] = g

    # three distinct lengths on a bending path
    rng = np.random.default_rng(3)
    fx["three_lengths_car"] = k_length_plan(3, 7, rng)
    fx["three_lengths_car"]["name"] = "three-lengths"

    # 3-D climb for the quadrotor with an overhead obstacle
    pts3 = [[0, 0, 0], [5, 0, 1], [10, 0, 2], [15, 0, 2]]
    fx["climb_quad"] = polyline_doc(
        pts3, agent="quadrotor", pos_radius=0.3,
        unsafe={"s001": [box_obstacle([7.5, 0, 4.0], [1.0, 1.0, 0.5])],
                "s002": [box_obstacle([12.5, -2.5, 2.0], [0.5, 0.5, 1.0])]}, name="climb")
    fx["climb_unsafe_quad"] = polyline_doc(
        pts3, agent="quadrotor", pos_radius=0.3,
        unsafe={"s002": [box_obstacle([12.5, 0.0, 2.0], [0.3, 0.3, 0.3])]}, name="climb-unsafe")

    # unsafe set over the full quadrotor state (speed limit along x)
    fx["speed_limit_quad"] = polyline_doc(
        lift(zigzag_points(3)), agent="quadrotor", pos_radius=0.3,
        unsafe={f"s{i:03d}": [{"A": [[0, 0, 0, 1, 0, 0]], "b": [-2.5]}] for i in range(3)}, name="speed-limit")
    fx["speed_limit_unsafe_quad"] = polyline_doc(
        lift(zigzag_points(3)), agent="quadrotor", pos_radius=0.3,
        unsafe={"s001": [{"A": [[0, 0, 0, -1, 0, 0]], "b": [-0.9]}]}, name="speed-limit-unsafe")

    # walls on both sides of a straight corridor
    pts = [[0, 0], [6, 0], [12, 0], [18, 0]]
    walls = [box_obstacle([9, 2.2], [9, 0.2]), box_obstacle([9, -2.2], [9, 0.2])]
    fx["corridor_walls_car"] = polyline_doc(pts, pos_radius=0.5, heading_radius=0.3,
                                            unsafe={f"s{i:03d}": walls for i in range(3)}, name="corridor")
    fx["corridor_narrow_unsafe_car"] = polyline_doc(
        pts, pos_radius=0.5, heading_radius=0.3,
        unsafe={f"s{i:03d}": [box_obstacle([9, 0.45], [9, 0.1])] for i in range(3)}, name="corridor-narrow")
    return fx


def main():
    os.makedirs(OUT, exist_ok=True)
    for name, doc in fixtures().items():
        with open(os.path.join(OUT, f"{name}.json"), "w") as fh:
            json.dump(doc, fh, indent=1)
        print("wrote", name)


if __name__ == "__main__":
    main()
