import time

import pytest

from skewdiv.ptensor import PointAnalysis
from skewdiv.scenarios import random_scenario

SESSION_T0 = time.perf_counter()


def session_elapsed() -> float:
    return time.perf_counter() - SESSION_T0


def pytest_collection_modifyitems(session, config, items):
    # The whole-suite runtime criterion must observe everything else first.
    items.sort(key=lambda it: it.name == "test_criterion_10_full_suite_runtime")


class ScenarioBatch:
    """A random scenario with its grid points and cached point analyses."""

    def __init__(self, scenario):
        self.scenario = scenario
        self.spec = scenario.spec()
        self.points = scenario.grid_points()
        self.analyses = [PointAnalysis(self.spec, pt) for pt in self.points]


@pytest.fixture(scope="session")
def random_pool():
    """50 seeded random scenarios per dimension (n = 3 and n = 4), analyzed.

    Shared across the acceptance criteria that sweep random scenarios; the
    build time is recorded so runtime budgets can account for it.
    """
    t0 = time.perf_counter()
    batches = []
    for dim in (3, 4):
        for seed in range(50):
            batches.append(ScenarioBatch(random_scenario(1000 + seed, dim)))
    build_time = time.perf_counter() - t0
    return batches, build_time
