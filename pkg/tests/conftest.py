import os

import pytest
from hypothesis import HealthCheck, settings

from pochxi.betatrace import BetaTrace

settings.register_profile(
    "numeric",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("numeric")

DATA = os.path.join(os.path.dirname(__file__), "..", "data")

# criterion lines collected by test_acceptance, echoed after the run
ACCEPTANCE_LINES = []


def shipped_trace(name: str) -> BetaTrace:
    path = os.path.join(DATA, f"{name}.json")
    if not os.path.exists(path):
        pytest.skip(f"shipped trace {name} missing; run scripts/run_traces.py")
    return BetaTrace.load(path)


@pytest.fixture(scope="session")
def traces():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = shipped_trace(name)
        return cache[name]

    return get


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
