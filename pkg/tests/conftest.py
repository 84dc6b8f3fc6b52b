"""Shared fixtures: solved scenarios are computed once per session."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from topp3 import scenarios as S
from topp3 import solve, to_trajectory

settings.register_profile(
    "topp3", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("topp3")


@pytest.fixture(scope="session")
def line_problem():
    return S.line()


@pytest.fixture(scope="session")
def line_solution(line_problem):
    return solve(line_problem)


@pytest.fixture(scope="session")
def sing_problem():
    return S.one_singularity(0.3, 0.3)


@pytest.fixture(scope="session")
def sing_solution(sing_problem):
    return solve(sing_problem)


@pytest.fixture(scope="session")
def sing_trajectory(sing_problem, sing_solution):
    return to_trajectory(sing_solution, sing_problem.path, 1e-3)


@pytest.fixture(scope="session")
def parabola_cs():
    """1-dof ``(s - 0.5)^2`` with jerk bounds of 100."""
    from topp3 import ConstraintSet

    return ConstraintSet(S.parabola(), [-100.0], [100.0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config._verdicts = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line; all lines are repeated in the terminal summary."""

    def record(n, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
        print(line)
        request.config._verdicts.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    if config._verdicts:
        terminalreporter.section("acceptance criteria")
        for line in sorted(config._verdicts, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
