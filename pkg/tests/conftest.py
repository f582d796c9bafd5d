from __future__ import annotations

import pytest

from pwsearch import bench
from pwsearch.graph import generate_regular
from pwsearch.search import Outcomes

MASTER = 7


class SimCache:
    """Memoized batch runs on one network, keyed by every parameter that matters."""

    def __init__(self, net):
        self.net = net
        self._runs: dict[tuple, Outcomes] = {}

    def get(self, mechanism: str, s: int = 150, w: int = 2, p: float = 0.0, mode: str = "fresh",
            trials: int = 10_000, seed: int = MASTER) -> Outcomes:
        key = (mechanism, s if mechanism != "rw" else 0, w, p, mode, trials, seed)
        if key not in self._runs:
            cfg = bench.ExperimentConfig(mechanism=mechanism, s=[s], w=w, p=[p], mode=mode,
                                         trials=trials, seed=seed)
            self._runs[key] = bench.simulate(self.net, cfg, mechanism, s, p)
        return self._runs[key]


@pytest.fixture(scope="session")
def regular10k():
    return generate_regular(10_000, 10, 1)


@pytest.fixture(scope="session")
def sims(regular10k):
    return SimCache(regular10k)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", None) != "call" or "test_acceptance" not in rep.nodeid:
                continue
            detail = dict(rep.user_properties).get("detail", "")
            name = rep.nodeid.split("::")[-1]
            lines.append((name, "PASS" if outcome == "passed" else "FAIL", detail))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict, detail in sorted(lines):
        terminalreporter.write_line(f"{verdict}  {name}  {detail}")
