"""Reference server for the subprocess reachability protocol.

Reads one JSON request from stdin, writes the flowpipe CSV to stdout::

    python -m symscene.reach_server --engine sample-bloat

Any tool that speaks the same request/response format can stand in for it
behind :class:`symscene.reachability.SubprocessEngine`.
"""

import argparse
import json
import sys

from .agents import ReachDivergence, make_agent
from .geometry import Box
from .reachability import ENGINE_KINDS, make_engine


def main(argv=None):
    ap = argparse.ArgumentParser(prog="symscene-reach-server")
    ap.add_argument("--engine", choices=ENGINE_KINDS, default="sample-bloat")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    try:
        req = json.load(sys.stdin)
        agent = make_agent(req["agent"])
        initset = Box(req["initset"]["lo"], req["initset"]["hi"])
        seg = (req["segment"]["src"], req["segment"]["dest"])
        engine = make_engine(args.engine, dt=float(req.get("dt", 0.01)), seed=args.seed)
        pipe = engine.compute_reachset(agent, initset, seg, float(req["horizon"]))
    except ReachDivergence as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return 4
    except (KeyError, ValueError, TypeError) as exc:
        print(f"bad request: {exc}", file=sys.stderr)
        return 3
    sys.stdout.write(pipe.to_csv())
    return 0


if __name__ == "__main__":
    sys.exit(main())
