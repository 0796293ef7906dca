import functools
import sys
from pathlib import Path

import pytest

from leasereads.cli import read_scenario
from leasereads.sim import from_dict, run

DATA = Path(__file__).parent / "data"


@functools.lru_cache(maxsize=None)
def _packaged(name: str):
    return run(from_dict(read_scenario(name)))


@pytest.fixture
def packaged():
    """Trace of a packaged scenario, simulated once per session."""
    return _packaged


def scenario_dict(**over) -> dict:
    """A small valid scenario mapping; keyword arguments replace top-level keys."""
    d = {
        "name": "unit", "n": 3, "seed": 1, "horizon": 400, "object": "counter",
        "network": {"delta": 4, "delta_star": 1, "gst": 0},
        "clocks": {"epsilon": 0},
        "params": {"algorithm": 1, "alpha": 8, "lambda": 20, "renew": 3},
        "leadership": {"final": {"holder": 0, "start": 0}},
        "workload": {"ops": [{"proc": 1, "at": 60, "op": ["inc"]},
                             {"proc": 2, "at": 70, "op": ["read"]},
                             {"proc": 0, "at": 90, "op": ["read"]}]},
    }
    d.update(over)
    return d


def pytest_terminal_summary(terminalreporter):
    acc = sys.modules.get("test_acceptance")
    if acc is None or not acc.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acc.LINES):
        terminalreporter.write_line(acc.LINES[n])
