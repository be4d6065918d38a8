import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from gpwkb.harness import ScenarioConfig, build, run_convergence  # noqa: E402

JOBS = min(4, os.cpu_count() or 1)


@pytest.fixture(scope="session")
def standard_config():
    """1-D scenario: delta = 0.05 bump on [1, 2], z_max = 8, T = 0.5."""
    return ScenarioConfig()


@pytest.fixture(scope="session")
def hierarchy_m1(standard_config):
    return build(standard_config, 1)


@pytest.fixture(scope="session")
def hierarchy_m0(standard_config):
    return build(standard_config, 0)


@pytest.fixture(scope="session")
def report_m1(standard_config, hierarchy_m1):
    return run_convergence(standard_config, jobs=JOBS, m=1, hierarchy=hierarchy_m1)


@pytest.fixture(scope="session")
def report_m0(standard_config, hierarchy_m0):
    return run_convergence(standard_config, jobs=JOBS, m=0, hierarchy=hierarchy_m0)
