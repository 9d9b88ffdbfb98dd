"""Compare the compiled and pure-Python assignment kernels.

    python benchmarks/bench_backends.py [--repeat 3]

Times (a) from-scratch rectangular assignment solves and (b) a full
accelerated greedy descent on a random N=20, k=20 instance, once per
backend, and checks both backends return identical results.
"""
import argparse
import time

import numpy as np

from simmatch import bcm, matching
from simmatch.bcm import BcmProblem
from simmatch.simulate import Trajectory, TrajectorySet


def _problem(seed, N=20, k=20, n_pool=250, d=16):
    rng = np.random.default_rng(seed)
    X = rng.random((n_pool, d))
    trajs = [Trajectory(rng.choice(n_pool, size=k, replace=False), np.zeros(k, dtype=np.int64)) for _ in range(N)]
    return BcmProblem(TrajectorySet(trajs, k), np.arange(n_pool), X)


def time_solves(core, mats, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = [core.hungarian(C, np.ones(C.shape[1], dtype=np.uint8))[0] for C in mats]
        best = min(best, time.perf_counter() - t0)
    return best, out


def time_greedy(core, problem, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        res = bcm.greedy_accelerated(problem, backend=core)
        best = min(best, time.perf_counter() - t0)
    return best, res


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    backends = {"python": matching.get_backend("python")}
    try:
        backends["cython"] = matching.get_backend("cython")
    except ImportError:
        print("compiled backend not built; timing the Python kernel only")

    rng = np.random.default_rng(args.seed)
    mats = [rng.random((20, 250)) for _ in range(200)]
    problem = _problem(args.seed)

    rows = []
    ref = None
    for name, core in backends.items():
        ts, sol = time_solves(core, mats, args.repeat)
        tg, res = time_greedy(core, problem, args.repeat)
        if ref is None:
            ref = (sol, res.centers)
        else:
            assert all(np.array_equal(a, b) for a, b in zip(ref[0], sol)), "solve results differ"
            assert np.array_equal(ref[1], res.centers), "greedy results differ"
        rows.append((name, ts, tg, res.assignment_solves))

    print(f"{'backend':8s} {'200 solves 20x250 (s)':>22s} {'greedy N=20 k=20 (s)':>21s} {'repairs':>8s}")
    for name, ts, tg, n in rows:
        print(f"{name:8s} {ts:22.4f} {tg:21.4f} {n:8d}")
    if len(rows) == 2:
        print(f"speed-up: solves x{rows[0][1] / rows[1][1]:.1f}, greedy x{rows[0][2] / rows[1][2]:.1f}")


if __name__ == "__main__":
    main()
