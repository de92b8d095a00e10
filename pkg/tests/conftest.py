import numpy as np
import pytest
from hypothesis import settings

from cuspidal.scenarios import builtin

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

_CACHE = {}


def scenario_file(name):
    if name not in _CACHE:
        _CACHE[name] = builtin(name)
    return _CACHE[name]


def scenario(name):
    return scenario_file(name).scenario()


@pytest.fixture(scope="session")
def closed_form():
    return scenario("closed-form")


@pytest.fixture(scope="session")
def tuned_well():
    return scenario("tuned-well")


@pytest.fixture(scope="session")
def random4():
    return scenario("random-4ch")


@pytest.fixture(scope="session")
def random_middle():
    return scenario("random-middle")


@pytest.fixture(scope="session")
def random_nu():
    return scenario("random-nu")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
