import os

import pytest
from hypothesis import settings

# fixed example sequence by default; HYPOTHESIS_PROFILE=explore draws fresh examples
settings.register_profile("default", derandomize=True)
settings.register_profile("explore", derandomize=False)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

from mvcl.evolution import SolverConfig, run
from mvcl.flux import bump, inverse_power, plateau
from mvcl.state import Grid, from_config


@pytest.fixture(scope="session")
def example_run():
    """Unit atom, flux 1 - (1+u)^-1, N=400, T=0.9."""
    g = Grid(-1.0, 3.0, 400)
    return run(from_config(g, 0.0, [(0.0, 1.0)]), inverse_power(1.0), SolverConfig(end_time=0.9))


@pytest.fixture(scope="session")
def bump_run():
    g = Grid(-1.0, 3.0, 400)
    return run(from_config(g, 0.0, [(0.0, 1.0)]), bump(), SolverConfig(end_time=2.5))


@pytest.fixture(scope="session")
def equilibrium_run():
    g = Grid(-1.0, 3.0, 200)
    return run(from_config(g, 1.0, [(0.0, 1.0)]), plateau(1.0), SolverConfig(end_time=1.0))


@pytest.fixture(scope="session")
def constant_run():
    g = Grid(-1.0, 3.0, 200)
    return run(from_config(g, 0.7), inverse_power(1.0), SolverConfig(end_time=0.5))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
