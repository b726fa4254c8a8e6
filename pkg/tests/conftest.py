import numpy as np
import pytest

from mckean_lab.measures import default_grid
from mckean_lab.potentials import validate_confining, validate_interaction

QUARTIC = [0.0, 0.0, -0.5, 0.0, 0.25]


def interaction(alpha):
    return validate_interaction([0.0, 0.0, alpha / 2.0])


@pytest.fixture(scope="session")
def V():
    return validate_confining(QUARTIC)


@pytest.fixture(scope="session")
def F():
    return interaction(0.5)


@pytest.fixture(scope="session")
def grid01(V):
    return default_grid(V, 0.1, 801)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call":
                continue
            for key, value in rep.user_properties:
                if key == "criterion":
                    lines.append((value[0], "PASS" if outcome == "passed" else "FAIL", value[1]))
    if lines:
        terminalreporter.section("acceptance criteria")
        for num, verdict, text in sorted(lines):
            terminalreporter.write_line(f"{verdict} criterion {num}: {text}")
