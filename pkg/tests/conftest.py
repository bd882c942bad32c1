from functools import lru_cache

import numpy as np
import pytest

from optmeas import prior as pr
from optmeas.povm import build_povm

NAMED_PRIORS = {
    "pure": pr.pure_prior,
    "random": pr.random_state_prior,
    "uniform-ball": pr.uniform_ball_prior,
    "two-point": pr.two_point_prior,
}


@lru_cache(maxsize=None)
def cached_povm(N, name=None):
    prior = NAMED_PRIORS[name]() if name else None
    return build_povm(N, prior)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_bloch(rng, inside=True):
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    return v * rng.random() ** (1 / 3) if inside else v


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for tag in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[tag])
