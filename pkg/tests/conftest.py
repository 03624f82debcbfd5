import glob
import os

import numpy as np
import pytest

from symscene.agents import make_agent
from symscene.automaton import build_automaton
from symscene.scenario_io import load_scenario

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
FIXTURES = os.path.join(ROOT, "fixtures")


def fixture_path(name):
    return os.path.join(FIXTURES, name if name.endswith(".json") else name + ".json")


def fixture_agent(name):
    return "quadrotor" if "quad" in os.path.basename(name) else "car"


def all_fixtures():
    return sorted(glob.glob(os.path.join(FIXTURES, "*.json")))


def load_automaton(name, agent=None):
    path = fixture_path(name)
    ag = make_agent(agent or fixture_agent(path))
    return build_automaton(load_scenario(path), ag)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_acceptance(n, ok, detail):
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
