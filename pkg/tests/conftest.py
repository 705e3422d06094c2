import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from helpers import ACCEPTANCE_LINES, holder_problem
from tikhonov_lab.core import GridVector, Problem
from tikhonov_lab.operators import IntegrationOperator
from tikhonov_lab.penalty import SquaredNorm
from tikhonov_lab.similarity import NormSimilarity

settings.register_profile(
    "default", max_examples=200, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def diag_problem():
    return holder_problem(n=40, mu=0.5)


@pytest.fixture
def integration_problem():
    n, h = 30, 1.0 / 30
    x = h * np.arange(n)
    u = GridVector(np.sin(np.pi * x) + 0.2, h)
    return Problem.build(IntegrationOperator(n, h), SquaredNorm(), NormSimilarity(), u, 2.0)
