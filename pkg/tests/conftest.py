import itertools
import math
import os

import numpy as np
import pytest

from simmatch.bcm import BcmProblem
from simmatch.data import Dataset, Pool
from simmatch.simulate import Trajectory, TrajectorySet

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA_DIR = os.path.join(ROOT, "datasets")


def random_problem(rng, N, k, n_pool, d=2, overlap=True):
    """Random BCM instance: N trajectories of k distinct indices drawn from n_pool points."""
    X = rng.random((n_pool, d))
    if overlap:
        # draw from a smaller region of the pool so trajectories share points
        span = min(n_pool, max(k, int(rng.integers(k, 2 * k + 3))))
        base = rng.choice(n_pool, size=span, replace=False)
    else:
        base = np.arange(n_pool)
    trajs = [
        Trajectory(rng.choice(base, size=k, replace=False), np.zeros(k, dtype=np.int64))
        for _ in range(N)
    ]
    return BcmProblem(TrajectorySet(trajs, k), np.arange(n_pool), X)


def brute_assignment(cost):
    k, m = cost.shape
    return min(
        math.fsum(cost[i, p[i]] for i in range(k))
        for p in itertools.permutations(range(m), k)
    )


def brute_optimum(problem, initial):
    from simmatch.bcm import objective_g

    return min(
        objective_g(problem, list(s)) for s in itertools.combinations(sorted(initial), problem.k)
    )


def toy_pool(n=40, d=2, seed=0, n_test=10):
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    y = (X[:, 0] + 0.1 * rng.standard_normal(n) > 0.5).astype(np.int64)
    y[:2] = [0, 1]
    ds = Dataset(X, y)
    labeled = np.array([0, 1] + [i for i in range(2, n) if y[i] != y[2 + (i % 2)]][:2])
    labeled = np.unique(labeled)
    rest = np.setdiff1d(np.arange(n), labeled)
    return Pool(ds, labeled, y[labeled], rest[n_test:], rest[:n_test])


@pytest.fixture
def pool():
    return toy_pool()


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE = {}


def record(number, ok, detail):
    ACCEPTANCE[number] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
