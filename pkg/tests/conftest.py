import numpy as np
import pytest

from tcluster.core import LowRankPlan, uniform


def ipf_plan(rng, n, m, K, iters=600):
    """Random feasible factor triple via iterative proportional fitting."""
    a, b = uniform(n), uniform(m)
    Q = rng.random((n, K)) + 0.1
    Q *= (a / Q.sum(axis=1))[:, None]
    g = Q.sum(axis=0)
    R = rng.random((m, K)) + 0.1
    for _ in range(iters):
        R *= (b / R.sum(axis=1))[:, None]
        R *= (g / R.sum(axis=0))[None, :]
    return LowRankPlan(Q, R, g)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
