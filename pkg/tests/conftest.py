from __future__ import annotations

import os

import pytest
from hypothesis import HealthCheck, settings

from harmonia.harmonic import CheckConfig
from harmonia.runner import RunSpec, run

settings.register_profile(
    "harmonia",
    max_examples=int(os.environ.get("HARMONIA_HYPOTHESIS_EXAMPLES", "40")),
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("harmonia")


@pytest.fixture(scope="session")
def regression_run():
    """Full catalog regression at the default 50 points, computed once per session."""
    return run(RunSpec(("*",), config=CheckConfig(), regression=True))


@pytest.fixture(scope="session")
def results_by_key(regression_run):
    return {(c.model, c.name): c for c in regression_run.results}


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion and assert it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(label: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        print(line)
        lines.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
