
import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from simmatch import _assign_py, matching
from simmatch.matching import CostMetric

from conftest import brute_assignment

HAVE_EXT = True
try:
    from simmatch import _assign  # noqa: F401
except ImportError:
    HAVE_EXT = False

BACKENDS = ["python"] + (["cython"] if HAVE_EXT else [])


class TestPairCost:
    def test_zero(self):
        assert matching.pair_cost(CostMetric(), [0.3, 0.1], [0.3, 0.1]) == 0.0

    def test_squared_euclidean(self):
        assert matching.pair_cost(CostMetric(), [0, 0], [3, 4]) == 25.0

    def test_diagonal(self):
        rng = np.random.default_rng(0)
        w = rng.random(3) + 0.1
        x, c = rng.random(3), rng.random(3)
        ref = sum(w[i] * (x[i] - c[i]) ** 2 for i in range(3))
        assert matching.pair_cost(CostMetric(np.diag(w)), x, c) == pytest.approx(ref, rel=1e-12)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            matching.pair_cost(CostMetric(), [0, 0], [1, 2, 3])

    def test_bad_metric(self):
        with pytest.raises(ValueError):
            CostMetric(np.array([[1.0, 0.0], [0.0, -1.0]]))


class TestSolve:
    def test_identity(self):
        P = np.random.default_rng(0).random((5, 3))
        a = matching.solve_assignment(P, P[::-1])
        assert a.cost == 0.0
        np.testing.assert_array_equal(a.pairs, [4, 3, 2, 1, 0])

    def test_two_by_two(self):
        a = matching.solve_cost_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
        assert a.cost == 2.0
        np.testing.assert_array_equal(a.pairs, [0, 1])

    def test_too_few_centers(self):
        with pytest.raises(ValueError):
            matching.solve_assignment(np.zeros((3, 2)), np.zeros((2, 2)))

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_brute_force(self, backend):
        rng = np.random.default_rng(1)
        core = matching.get_backend(backend)
        for _ in range(150):
            k = int(rng.integers(1, 6))
            m = int(rng.integers(k, 8))
            C = rng.random((k, m))
            a = matching.solve_cost_matrix(C, backend=core)
            assert abs(a.cost - brute_assignment(C)) <= 1e-9
            assert len(set(a.pairs.tolist())) == k

    def test_scipy_agrees(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            k = int(rng.integers(1, 15))
            C = rng.random((k, k + int(rng.integers(0, 10)))) * 10
            r, c = linear_sum_assignment(C)
            assert matching.solve_cost_matrix(C).cost == pytest.approx(C[r, c].sum(), abs=1e-9)

    def test_integer_ties(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            C = rng.integers(0, 3, size=(4, 6)).astype(float)
            assert matching.solve_cost_matrix(C).cost == brute_assignment(C)

    def test_dual_feasibility(self):
        rng = np.random.default_rng(4)
        C = rng.random((5, 9))
        a = matching.solve_cost_matrix(C)
        slack = C - a.u[:, None] - a.v[None, :]
        assert slack.min() >= -1e-12
        np.testing.assert_allclose(slack[np.arange(5), a.pairs], 0, atol=1e-12)
        free = a.center_to_point == -1
        assert np.all(a.v[free] == 0)

    def test_inactive_columns_unused(self):
        rng = np.random.default_rng(5)
        C = rng.random((3, 6))
        active = np.array([1, 0, 1, 1, 0, 1], dtype=np.uint8)
        a = matching.solve_cost_matrix(C, active)
        assert active[a.pairs].all()
        assert a.cost == pytest.approx(brute_assignment(C[:, active.astype(bool)]), abs=1e-12)


class TestRepair:
    def test_unmatched_center_is_free(self):
        C = np.array([[0.0, 5.0, 9.0], [5.0, 0.0, 9.0]])
        a = matching.solve_cost_matrix(C)
        b = matching.repair_after_removal(a, 2)
        assert b.pairs is a.pairs and b.cost == a.cost
        assert not b.active[2]

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_matches_scratch(self, backend):
        rng = np.random.default_rng(6)
        core = matching.get_backend(backend)
        for _ in range(200):
            k = int(rng.integers(1, 6))
            m = int(rng.integers(k + 1, 10))
            C = rng.random((k, m))
            a = matching.solve_cost_matrix(C, backend=core)
            while int(a.active.sum()) > k:
                c = int(rng.choice(np.flatnonzero(a.active)))
                a = matching.repair_after_removal(a, c, backend=core)
                ref = matching.solve_cost_matrix(C, a.active, backend=core)
                assert a.cost == pytest.approx(ref.cost, abs=1e-12)
                assert a.cost == pytest.approx(brute_assignment(C[:, a.active.astype(bool)]), abs=1e-9)

    def test_k1_nearest_remaining(self):
        centers = np.array([[0.0], [0.2], [0.5], [0.9]])
        a = matching.solve_assignment([[0.1]], centers)
        a = matching.repair_after_removal(a, int(a.pairs[0]))
        remaining = np.flatnonzero(a.active)
        d = ((centers[remaining, 0] - 0.1) ** 2)
        assert a.pairs[0] == remaining[np.argmin(d)]

    def test_below_k(self):
        a = matching.solve_cost_matrix(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            matching.repair_after_removal(a, 0)

    def test_inactive_center(self):
        a = matching.solve_cost_matrix(np.zeros((1, 3)))
        a = matching.repair_after_removal(a, 2)
        with pytest.raises(ValueError):
            matching.repair_after_removal(a, 2)


@pytest.mark.skipif(not HAVE_EXT, reason="compiled extension not built")
class TestBackendsIdentical:
    def test_bitwise(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            k = int(rng.integers(1, 8))
            C = rng.integers(0, 4, size=(k, k + int(rng.integers(0, 5)))).astype(float) if rng.random() < 0.3 \
                else rng.random((k, k + int(rng.integers(0, 5))))
            act = np.ones(C.shape[1], dtype=np.uint8)
            out_c = _assign.hungarian(C, act)
            out_p = _assign_py.hungarian(C, act)
            for x, y in zip(out_c, out_p):
                np.testing.assert_array_equal(x, y)

    def test_default_backend_reported(self):
        assert matching.BACKEND in ("cython", "python")


def test_pure_python_switch():
    import os
    import subprocess
    import sys

    env = dict(os.environ, SIMMATCH_PURE_PYTHON="1")
    r = subprocess.run([sys.executable, "-c", "import simmatch; print(simmatch.BACKEND)"],
                       capture_output=True, text=True, env=env)
    assert r.stdout.strip() == "python"
