"""Reachset calls and wall time for TR versus no symmetry on growing chains.

``python demos/tr_vs_identity.py [max_segments]``

Under TR a uniform chain collapses to one virtual mode with a self-loop, and
the cache reaches a fixed point after a handful of calls whatever the chain
length; without symmetry every segment costs at least one call.
"""

import sys

from symscene.agents import make_agent
from symscene.automaton import build_automaton
from symscene.plans import scenario_from_doc, uniform_chain
from symscene.reachability import make_engine
from symscene.symmetry import make_virtual_map
from symscene.verifier import scene_check

top = int(sys.argv[1]) if len(sys.argv) > 1 else 80
print(f"{'agent':<10}{'segments':>9}{'sym':>10}{'verdict':>9}{'rc':>6}{'sv_i':>6}{'time s':>9}")
for agent in ("car", "quadrotor"):
    for n in sorted({10, 20, 40, top}):
        h, unsafe = build_automaton(scenario_from_doc(uniform_chain(n, agent=agent)), make_agent(agent))
        for sym in ("TR", "identity"):
            out = scene_check(make_virtual_map(sym, h), h, unsafe, make_engine("sample-bloat"))
            m = out.metrics
            print(f"{agent:<10}{n:>9}{sym:>10}{out.verdict:>9}{m.rc:>6}{m.sv_i:>6}{m.tt_seconds:>9.2f}")
