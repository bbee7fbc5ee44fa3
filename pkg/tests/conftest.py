"""Shared fixtures.

The expensive study runs (uniform level sweep, adaptive refinement)
are session-scoped and lazily built, so unit test files stay fast and
the acceptance tests that need the same run share one execution.
Each heavy fixture records its wall time for the runtime assertions.
"""

import time

import numpy as np
import pytest

from lamopt.adaptivity import adaptive_loop
from lamopt.cli import run_uniform
from lamopt.scenarios import builtin_scenario


class TimedRun:
    def __init__(self, payload, wall_s):
        self.payload = payload
        self.wall_s = wall_s


@pytest.fixture(scope="session")
def carrier():
    return builtin_scenario("carrier-plate")


@pytest.fixture(scope="session")
def carrier_l4(carrier):
    """One converged optimization on the level-4 carrier mesh."""
    from lamopt.optimizer import optimize
    return optimize(carrier.mesh(4), carrier)


@pytest.fixture(scope="session")
def carrier_uniform(carrier, tmp_path_factory):
    """Uniform carrier-plate study, levels 2..7 with defaults."""
    out = tmp_path_factory.mktemp("uniform")
    t0 = time.perf_counter()
    records, fit = run_uniform(carrier, [2, 3, 4, 5, 6, 7], str(out))
    return TimedRun((records, fit), time.perf_counter() - t0)


@pytest.fixture(scope="session")
def carrier_adaptive(carrier):
    """Adaptive carrier-plate run from level 4.

    Nine refinements grow the mesh from 256 to ~15000 elements, the
    neighborhood of the finest uniform level, so error comparisons at
    matched element counts cover the whole uniform ladder.
    """
    t0 = time.perf_counter()
    run = adaptive_loop(carrier, initial_level=4, max_steps=9)
    return TimedRun(run, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def cantilever_adaptive():
    t0 = time.perf_counter()
    sc = builtin_scenario("cantilever")
    run = adaptive_loop(sc, initial_level=4, max_steps=20)
    return TimedRun(run, time.perf_counter() - t0)


def rel_err(a, b):
    return abs(a - b) / max(1.0, abs(b))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
