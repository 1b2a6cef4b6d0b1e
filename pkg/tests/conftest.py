import numpy as np
import pytest

from gpconsensus.scenario import load_scenario
from gpconsensus.simulate import simulate


@pytest.fixture(scope="session")
def ex1():
    return load_scenario("example1")


@pytest.fixture(scope="session")
def ex2():
    return load_scenario("example2")


@pytest.fixture(scope="session")
def ex1_gains(ex1):
    return ex1.synthesize()


@pytest.fixture(scope="session")
def ex2_gains(ex2):
    return ex2.synthesize()


@pytest.fixture(scope="session")
def ex1_trace(ex1, ex1_gains):
    return simulate(ex1, gains=ex1_gains)


@pytest.fixture(scope="session")
def ex2_trace(ex2, ex2_gains):
    return simulate(ex2, gains=ex2_gains)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
