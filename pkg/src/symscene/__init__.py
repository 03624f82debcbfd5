"""Scenario verification by symmetry abstraction and refinement.

A waypoint plan plus obstacles becomes a hybrid automaton (one mode per
segment). Symmetry maps collapse segments with the same canonical shape into
virtual modes; the abstraction is verified with a pluggable reachability
engine and refined by splitting virtual modes when a check is inconclusive.
"""

from .agents import Car, Quadrotor, make_agent, simulate
from .automaton import HybridAutomaton, build_automaton, sample_executions
from .abstraction import AbstractAutomaton, abstract, split_mode
from .geometry import AffineMap, Box, HPolytope
from .reachability import Flowpipe, IntervalLipschitzEngine, SampleBloatEngine, SubprocessEngine, make_engine
from .scenario_io import Report, Scenario, emit_report, emit_scenario, load_scenario, parse_scenario
from .symmetry import make_virtual_map, symmetrize_controller, validate_symmetry
from .verifier import Limits, scene_check

__version__ = "0.1.0"
