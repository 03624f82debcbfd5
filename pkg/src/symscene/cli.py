"""Command-line front end.

::

    symscene verify --scenario fixtures/s1.json --agent car --sym TR
    symscene validate-symmetry --scenario fixtures/s1.json --agent car --sym TR --controller biased
    symscene dump --scenario fixtures/s1.json --agent car --sym TR --out-dir dumps/

Configuration precedence: flags, then ``--config`` (a JSON object with the
same keys as the long flags, dashes or underscores), then defaults. Exit
codes: 0 safe, 1 unknown, 2 timeout, 3 input error. ``SYMSCENE_LOG`` sets
the log level (default WARNING); logs go to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import shlex
import sys
from dataclasses import dataclass
from typing import Optional

from .agents import biased_controller, make_agent
from .automaton import AutomatonError, build_automaton
from .geometry import GeometryError
from .reachability import ENGINE_KINDS, SubprocessEngine, make_engine
from .scenario_io import (INPUT_ERROR_EXIT, Report, ScenarioError, dump_header, dump_reachsets,
                          emit_report, load_scenario)
from .symmetry import SYMMETRY_KINDS, input_map, make_virtual_map, symmetrize_controller, validate_symmetry
from .verifier import DELTA_CACHE, Limits, scene_check

log = logging.getLogger("symscene")


@dataclass
class RunConfig:
    scenario: Optional[str] = None
    agent: str = "car"
    sym: str = "TR"
    engine: str = "sample-bloat"
    dt: float = 0.01
    bloat_scale: float = 1.2
    bloat_pad: float = 1e-3
    lipschitz: Optional[float] = None
    reach_command: Optional[str] = None
    delta_cache: float = DELTA_CACHE
    timeout_min: float = 120.0
    max_refines: Optional[int] = None
    seed: int = 0
    dump_reachsets: Optional[str] = None
    report: str = "json"
    report_out: Optional[str] = None
    omit_timings: bool = False
    # validate-symmetry
    samples: int = 1000
    horizon: float = 5.0
    tol: float = 1e-6
    controller: str = "pd"
    # dump
    out_dir: str = "."


class ConfigError(ValueError):
    pass


def _add_common(p):
    p.add_argument("--config", help="JSON file with defaults for any flag")
    p.add_argument("--scenario", help="scenario JSON file")
    p.add_argument("--agent", choices=["car", "quadrotor", "quad"])
    p.add_argument("--sym", choices=SYMMETRY_KINDS, help="symmetry family")
    p.add_argument("--seed", type=int)
    p.add_argument("--dt", type=float, help="integration / flowpipe step (s)")


def _add_verify(p):
    p.add_argument("--engine", choices=ENGINE_KINDS + ("subprocess",))
    p.add_argument("--reach-command", help="command line of an external reachability tool")
    p.add_argument("--bloat-scale", type=float)
    p.add_argument("--bloat-pad", type=float)
    p.add_argument("--lipschitz", type=float, help="Lipschitz bound for interval-lipschitz")
    p.add_argument("--delta-cache", type=float, help="cache grid pitch")
    p.add_argument("--timeout-min", type=float, help="wall-clock limit in minutes")
    p.add_argument("--max-refines", type=int, help="refinement budget (default unlimited)")
    p.add_argument("--report", choices=["json", "csv"])
    p.add_argument("--report-out", help="write the report here instead of stdout")
    p.add_argument("--omit-timings", action="store_true", default=None,
                   help="leave wall-clock fields out so repeated runs are byte-identical")


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors (exit 3); argparse's own 2 would read as a timeout."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(INPUT_ERROR_EXIT, f"{self.prog}: error: {message}\n")


def build_parser():
    ap = _Parser(prog="symscene", description="Scenario verification by symmetry abstraction")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    v = sub.add_parser("verify", help="verify a scenario")
    _add_common(v)
    _add_verify(v)
    v.add_argument("--dump-reachsets", help="write abstract reachsets CSV here (plus a .concrete.csv)")
    s = sub.add_parser("validate-symmetry", help="sample-check the symmetry condition")
    _add_common(s)
    s.add_argument("--samples", type=int)
    s.add_argument("--horizon", type=float)
    s.add_argument("--tol", type=float)
    s.add_argument("--controller", choices=["pd", "biased", "symmetrized"])
    d = sub.add_parser("dump", help="verify and write abstract and concretized reachsets")
    _add_common(d)
    _add_verify(d)
    d.add_argument("--out-dir")
    return ap


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        for k, val in doc.items():
            key = k.replace("-", "_")
            if key not in fields:
                raise ConfigError(f"unknown config key {k!r}")
            setattr(cfg, key, val)
    for k, val in vars(args).items():
        if k in fields and val is not None:
            setattr(cfg, k, val)
    if not cfg.scenario:
        raise ConfigError("--scenario is required")
    if cfg.dt <= 0 or cfg.delta_cache <= 0 or cfg.timeout_min <= 0:
        raise ConfigError("dt, delta-cache and timeout-min must be positive")
    return cfg


def make_reach_engine(cfg: RunConfig):
    if cfg.engine == "subprocess":
        if not cfg.reach_command:
            raise ConfigError("--engine subprocess needs --reach-command")
        return SubprocessEngine(shlex.split(cfg.reach_command), dt=cfg.dt)
    params = dict(scale=cfg.bloat_scale, pad=cfg.bloat_pad)
    if cfg.engine == "interval-lipschitz" and cfg.lipschitz is not None:
        params["lipschitz"] = cfg.lipschitz
    return make_engine(cfg.engine, dt=cfg.dt, seed=cfg.seed, **params)


def _load(cfg: RunConfig):
    agent = make_agent(cfg.agent)
    sc = load_scenario(cfg.scenario)
    h, unsafe = build_automaton(sc, agent)
    return agent, h, unsafe


def run_verify(cfg: RunConfig):
    """Run scene_check; returns ``(report, outcome)``."""
    agent, h, unsafe = _load(cfg)
    vm = make_virtual_map(cfg.sym, h)
    engine = make_reach_engine(cfg)
    limits = Limits(timeout_s=cfg.timeout_min * 60.0, max_refines=cfg.max_refines, delta_cache=cfg.delta_cache)
    out = scene_check(vm, h, unsafe, engine, limits)
    m = out.metrics
    rep = Report(
        verdict=out.verdict, nrefs=m.nrefs, rc=m.rc, rt=m.rt_seconds, tt=m.tt_seconds,
        sv_i=m.sv_i, ev_i=m.ev_i, sv_f=m.sv_f, ev_f=m.ev_f,
        scenario=os.path.basename(cfg.scenario), agent=agent.name, symmetry=cfg.sym,
        engine=cfg.engine, probabilistic_engine=bool(engine.probabilistic), seed=cfg.seed,
        dt=cfg.dt, delta_cache=cfg.delta_cache, diagnostics=list(out.diagnostics),
    )
    for b in out.violating[:5]:
        rep.diagnostics.append(f"violating box lo={b.lo.tolist()} hi={b.hi.tolist()}")
    return rep, out


def _write_dumps(out, agent, abstract_path, concrete_path):
    dim = agent.state_dim
    with open(abstract_path, "w") as fh:
        fh.write(dump_reachsets(out.flowpipes, dim=dim) if out.flowpipes else dump_header(dim))
    with open(concrete_path, "w") as fh:
        fh.write(dump_reachsets(out.flowpipes, concretize=out.abstraction, dim=dim)
                 if out.flowpipes else dump_header(dim))


def _emit(cfg, rep):
    text = emit_report(rep, cfg.report, timings=not cfg.omit_timings)
    if cfg.report_out:
        with open(cfg.report_out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_verify(cfg: RunConfig) -> int:
    rep, out = run_verify(cfg)
    if cfg.dump_reachsets:
        base = cfg.dump_reachsets[:-4] if cfg.dump_reachsets.endswith(".csv") else cfg.dump_reachsets
        _write_dumps(out, out.abstraction.h.agent, cfg.dump_reachsets, base + ".concrete.csv")
        rep.reachset_dump_path = cfg.dump_reachsets
    _emit(cfg, rep)
    return rep.exit_code


def cmd_dump(cfg: RunConfig) -> int:
    rep, out = run_verify(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    a_path = os.path.join(cfg.out_dir, "abstract.csv")
    _write_dumps(out, out.abstraction.h.agent, a_path, os.path.join(cfg.out_dir, "concrete.csv"))
    rep.reachset_dump_path = a_path
    _emit(cfg, rep)
    return rep.exit_code


def cmd_validate_symmetry(cfg: RunConfig) -> int:
    agent, h, _ = _load(cfg)
    vm = make_virtual_map(cfg.sym, h)
    if cfg.controller == "biased":
        agent = agent.with_controller(biased_controller(agent))
    elif cfg.controller == "symmetrized":
        ctrl = symmetrize_controller(biased_controller(agent), cfg.sym, agent, input_map(agent, cfg.sym))
        agent = agent.with_controller(ctrl)
    res = validate_symmetry(vm, h, n_samples=cfg.samples, horizon=cfg.horizon, tol=cfg.tol,
                            dt=cfg.dt, seed=cfg.seed, agent=agent)
    doc = {"passed": res.passed, "max_deviation": res.max_deviation, "tol": res.tol,
           "samples": res.n_samples, "symmetry": cfg.sym, "agent": agent.name,
           "controller": cfg.controller, "worst_mode": res.worst_mode, "seed": cfg.seed}
    sys.stdout.write(json.dumps(doc, indent=1) + "\n")
    return 0 if res.passed else 1


COMMANDS = {"verify": cmd_verify, "validate-symmetry": cmd_validate_symmetry, "dump": cmd_dump}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("SYMSCENE_LOG", "WARNING").upper(), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (ScenarioError, AutomatonError, ConfigError, GeometryError, OSError) as exc:
        print(f"symscene: error: {exc}", file=sys.stderr)
        return INPUT_ERROR_EXIT


if __name__ == "__main__":
    sys.exit(main())
