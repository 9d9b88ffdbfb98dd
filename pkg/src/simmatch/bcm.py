"""Bounded coordinated matching: objective, greedy descent and diagnostics.

The objective of a center set ``mu`` is the sum, over simulated
trajectories, of the minimum-cost injective matching of the trajectory's
points into ``mu``. It is non-increasing and supermodular, so removing
elements greedily from a large starting set carries an approximation
guarantee, and cached removal costs are valid lower bounds later on.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import klr, matching
from .matching import CostMetric, matched_cost
from .simulate import TrajectorySet, simulate_trajectories
from .policy import Policy, SelectionContext, rank_by_entropy, select_max_entropy, unlabeled_entropy


@dataclass(frozen=True)
class BcmProblem:
    """Trajectories plus the candidate set their centers are chosen from.

    ``fallback_order`` ranks candidates for padding when the trajectories
    visit fewer than ``k`` distinct points (default: ascending index).
    """

    trajectories: TrajectorySet
    candidate_pool: np.ndarray
    features: np.ndarray
    metric: CostMetric = field(default_factory=CostMetric)
    fallback_order: Optional[np.ndarray] = None

    def __post_init__(self):
        cand = np.unique(np.asarray(self.candidate_pool, dtype=np.int64))
        object.__setattr__(self, "candidate_pool", cand)
        missing = np.setdiff1d(self.trajectories.union(), cand)
        if len(missing):
            raise ValueError(f"trajectory points outside candidate pool: {missing[:5]}")

    @property
    def k(self) -> int:
        return self.trajectories.k

    @property
    def N(self) -> int:
        return self.trajectories.N

    def cost_tensor(self, centers: np.ndarray) -> np.ndarray:
        """``T[i, j, c]`` = cost of matching point ``j`` of trajectory ``i`` to ``centers[c]``."""
        pts = self.trajectories.point_matrix()
        C = self.features[np.asarray(centers, dtype=np.int64)]
        return np.ascontiguousarray(
            np.stack([self.metric.cost_matrix(self.features[row], C) for row in pts])
        ).reshape(self.N, self.k, len(centers))


@dataclass
class GreedyResult:
    centers: np.ndarray
    objective: float
    evaluations: int = 0
    assignment_solves: int = 0
    removal_order: List[int] = field(default_factory=list)


def _as_set(problem: BcmProblem, mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=np.int64).ravel()
    out = np.unique(mu)
    if len(out) != len(mu):
        raise ValueError("center set contains duplicates")
    return out


def objective_g(problem: BcmProblem, mu) -> float:
    """Sum over trajectories of the optimal matching cost into ``mu`` (needs ``|mu| >= k``)."""
    mu = _as_set(problem, mu)
    if len(mu) < problem.k:
        raise ValueError(f"|mu| = {len(mu)} < k = {problem.k}")
    T = problem.cost_tensor(mu)
    active = np.ones(len(mu), dtype=np.uint8)
    return math.fsum(matching.solve_cost_matrix(T[i], active).cost for i in range(problem.N))


def objective_g_relaxed(problem: BcmProblem, mu, reference) -> float:
    """Objective extended to sets of any size, used only by :func:`steepness`.

    For ``|mu| >= k`` it is :func:`objective_g`. Below ``k`` the injectivity
    requirement is dropped (each point goes to its nearest center) and the
    empty set costs every point its farthest element of ``reference``.
    """
    mu = _as_set(problem, mu)
    if len(mu) >= problem.k:
        return objective_g(problem, mu)
    if len(mu) == 0:
        T = problem.cost_tensor(_as_set(problem, reference))
        return math.fsum(T.max(axis=2).ravel().tolist())
    T = problem.cost_tensor(mu)
    return math.fsum(T.min(axis=2).ravel().tolist())


def _pad(problem: BcmProblem, base: np.ndarray) -> np.ndarray:
    order = problem.fallback_order
    if order is None:
        order = problem.candidate_pool
    taken = set(base.tolist())
    extra = [int(c) for c in order if int(c) not in taken]
    need = problem.k - len(base)
    if len(extra) < need:
        raise ValueError("candidate pool smaller than k")
    return np.sort(np.concatenate([base, np.array(extra[:need], dtype=np.int64)]))


def greedy_naive(problem: BcmProblem, initial, backend=None) -> GreedyResult:
    """Reference greedy descent: every candidate removal re-solves all matchings from scratch.

    Picks ``argmin g(mu \\ x)`` (lowest index on ties) until ``k`` remain.
    The comparison is made on ``g(mu \\ x) - g(mu)`` summed exactly over the
    matched cost entries, so equal real values compare equal.
    """
    core = backend or matching.get_backend()
    cols = _as_set(problem, initial)
    k, N = problem.k, problem.N
    if len(cols) < k:
        raise ValueError(f"|initial| = {len(cols)} < k = {k}")
    T = problem.cost_tensor(cols)
    active = np.ones(len(cols), dtype=np.uint8)
    res = GreedyResult(cols, 0.0)
    rows = np.arange(k)
    while int(active.sum()) > k:
        # g(mu) entries, negated; g(mu \ x) - g(mu) is then one exactly rounded sum
        base = []
        for i in range(N):
            r2c, _, _, _ = core.hungarian(T[i], active)
            base.extend((-T[i, rows, r2c]).tolist())
        best = None
        for x in np.flatnonzero(active):
            active[x] = 0
            entries = list(base)
            for i in range(N):
                r2c, _, _, _ = core.hungarian(T[i], active)
                entries.extend(T[i, rows, r2c].tolist())
            res.assignment_solves += N
            active[x] = 1
            res.evaluations += 1
            delta = math.fsum(entries)
            if best is None or delta < best[0]:
                best = (delta, x)
        active[best[1]] = 0
        res.removal_order.append(int(cols[best[1]]))
    res.centers = cols[active.astype(bool)]
    res.objective = objective_g(problem, res.centers) if len(res.centers) else 0.0
    return res


class BcmState:
    """Center set, one optimal matching per trajectory, and cached removal costs.

    Matchings live in the column space of the starting set ``mu0``; removal
    only deactivates columns. Each matching keeps its dual potentials so a
    removal is repaired with one shortest-path search.
    """

    def __init__(self, problem: BcmProblem, mu0=None, backend=None):
        self.problem = problem
        self.core = backend or matching.get_backend()
        self.cols = problem.trajectories.union() if mu0 is None else _as_set(problem, mu0)
        k, N, M = problem.k, problem.N, len(self.cols)
        if M < k:
            raise ValueError(f"|mu0| = {M} < k = {k}")
        self.T = problem.cost_tensor(self.cols)
        self.active = np.ones(M, dtype=np.uint8)
        self.row_to_col = np.full((N, k), -1, dtype=np.int64)
        self.col_to_row = np.full((N, M), -1, dtype=np.int64)
        self.u = np.zeros((N, k))
        self.v = np.zeros((N, M))
        self.costs = np.zeros(N)
        self.evaluations = 0
        self.assignment_solves = 0
        pts = problem.trajectories.point_matrix()
        if mu0 is None:
            # each trajectory matched to its own points: cost 0, zero duals certify optimality
            self.row_to_col[:] = np.searchsorted(self.cols, pts)
            for i in range(N):
                self.col_to_row[i, self.row_to_col[i]] = np.arange(k)
        else:
            for i in range(N):
                r2c, c2r, u, v = self.core.hungarian(self.T[i], self.active)
                self.row_to_col[i], self.col_to_row[i], self.u[i], self.v[i] = r2c, c2r, u, v
                self.costs[i] = matched_cost(self.T[i], r2c)
            self.assignment_solves += N
        self.deltas: Dict[int, float] = {}
        self._trial: Dict[int, list] = {}

    @property
    def mu(self) -> np.ndarray:
        return self.cols[self.active.astype(bool)]

    @property
    def size(self) -> int:
        return int(self.active.sum())

    def objective(self) -> float:
        return math.fsum(self.costs.tolist())

    def column(self, x: int) -> int:
        c = int(np.searchsorted(self.cols, x))
        if c >= len(self.cols) or self.cols[c] != x or not self.active[c]:
            raise ValueError(f"{x} is not in the current center set")
        return c

    def _delta_col(self, c: int) -> float:
        users = np.flatnonzero(self.col_to_row[:, c] != -1)
        if len(users) == 0:
            self._trial[c] = []
            self.deltas[c] = 0.0
            return 0.0
        self.evaluations += 1
        self.active[c] = 0
        trial = []
        entries = []
        rows = np.arange(self.problem.k)
        try:
            for i in users.tolist():
                r2c = self.row_to_col[i].copy()
                c2r = self.col_to_row[i].copy()
                u = self.u[i].copy()
                v = self.v[i].copy()
                row = c2r[c]
                c2r[c] = -1
                r2c[row] = -1
                v[c] = 0.0
                self.core.augment(self.T[i], self.active, row, r2c, c2r, u, v)
                trial.append((i, r2c, c2r, u, v, matched_cost(self.T[i], r2c)))
                entries.extend(self.T[i, rows, r2c].tolist())
                entries.extend((-self.T[i, rows, self.row_to_col[i]]).tolist())
        finally:
            self.active[c] = 1
        self.assignment_solves += len(users)
        self._trial[c] = trial
        # exactly rounded: equal real removal costs stay equal, stale values stay lower bounds
        d = math.fsum(entries)
        self.deltas[c] = d
        return d

    def incremental_difference(self, x: int) -> float:
        """``g(mu \\ x) - g(mu)``, repairing only the matchings that use ``x``."""
        if self.size <= self.problem.k:
            raise ValueError("center set already has k elements")
        return self._delta_col(self.column(x))

    def _remove_col(self, c: int) -> None:
        trial = self._trial.get(c)
        if trial is None:
            self._delta_col(c)
            trial = self._trial[c]
        for i, r2c, c2r, u, v, new in trial:
            self.row_to_col[i], self.col_to_row[i], self.u[i], self.v[i] = r2c, c2r, u, v
            self.costs[i] = new
        self.active[c] = 0
        self.deltas.pop(c, None)
        self._trial.clear()

    def remove(self, x: int) -> None:
        self._remove_col(self.column(x))


def greedy_accelerated(problem: BcmProblem, backend=None) -> GreedyResult:
    """Greedy descent from the trajectory union with lazy removal costs.

    Makes the same choices as :func:`greedy_naive` started from the union:
    cached costs only grow as the set shrinks, so an entry recomputed in the
    current round that still sits on top of the heap is the true minimum.
    """
    k = problem.k
    union = problem.trajectories.union()
    if len(union) <= k:
        centers = union if len(union) == k else _pad(problem, union)
        return GreedyResult(centers, objective_g(problem, centers))
    state = BcmState(problem, backend=backend)
    stamp = np.full(len(state.cols), -1, dtype=np.int64)
    heap = []
    for c in range(len(state.cols)):
        heap.append((state._delta_col(c), c))
        stamp[c] = 0
    heapq.heapify(heap)
    res = GreedyResult(union, 0.0)
    rnd = 0
    while state.size > k:
        while True:
            d, c = heapq.heappop(heap)
            if stamp[c] == rnd:
                break
            stamp[c] = rnd
            heapq.heappush(heap, (state._delta_col(c), c))
        state._remove_col(c)
        res.removal_order.append(int(state.cols[c]))
        rnd += 1
    res.centers = state.mu
    res.objective = state.objective()
    res.evaluations = state.evaluations
    res.assignment_solves = state.assignment_solves
    return res


def select_batch(
    pool,
    policy: Policy = select_max_entropy,
    k: int = 10,
    N: int = 20,
    rng=None,
    width: float = klr.DEFAULT_WIDTH,
    ridge: float = klr.DEFAULT_RIDGE,
    metric: Optional[CostMetric] = None,
    workers: Optional[int] = 1,
    details: bool = False,
):
    """Simulate ``N`` rollouts of ``policy`` and return the greedy BCM center set.

    With ``details=True`` returns ``(batch, GreedyResult, TrajectorySet)``.
    """
    if len(pool.unlabeled) < k:
        raise ValueError(f"pool has {len(pool.unlabeled)} unlabeled examples, fewer than k={k}")
    trajs = simulate_trajectories(pool, policy, k, N, rng, width, ridge, workers)
    fallback = None
    if len(trajs.union()) < k:
        model = klr.fit(pool, width, ridge)
        ctx = SelectionContext(pool, model, np.random.default_rng(0))
        fallback = rank_by_entropy(pool.unlabeled, unlabeled_entropy(ctx))
    problem = BcmProblem(trajs, pool.unlabeled, pool.dataset.features, metric or CostMetric(), fallback)
    result = greedy_accelerated(problem)
    if details:
        return result.centers, result, trajs
    return result.centers


@dataclass(frozen=True)
class SteepnessReport:
    t: float
    s: float
    q: int
    bound_factor: float
    bound_factor_relaxed: float
    degenerate: bool = False
    convention: str = (
        "below k centers the matching is non-injective; "
        "g(empty) = sum of each point's farthest distance in the initial set"
    )


def bound_factors(t: float, q: int):
    """``((1 + t/q)^q - 1) / t`` and its relaxation ``(e^t - 1) / t`` (both 1 at t = 0)."""
    if math.isinf(t):
        return math.inf, math.inf
    if t == 0:
        return 1.0, 1.0

    def ratio(x):
        try:
            return math.expm1(x) / t
        except OverflowError:
            return math.inf

    exact = ratio(q * math.log1p(t / q)) if q > 0 else 1.0
    return exact, ratio(t)


def steepness(problem: BcmProblem, initial) -> SteepnessReport:
    """Steepness of the objective over ``initial`` and the greedy bound it implies.

    ``s`` is the largest relative drop, over ``x``, between the gain from
    adding ``x`` to the empty set and the loss from removing it from the
    full set; ``t = s / (1 - s)``. ``s = 1`` leaves ``t`` unbounded and is
    reported as degenerate.
    """
    A = _as_set(problem, initial)
    k = problem.k
    if len(A) < k + 1:
        raise ValueError("steepness needs at least k + 1 elements")
    q = len(A) - k
    g_A = objective_g(problem, A)
    g_empty = objective_g_relaxed(problem, [], A)
    s = -math.inf
    for idx in range(len(A)):
        x = A[idx]
        g_x = objective_g_relaxed(problem, [x], A)
        gain = g_empty - g_x
        if gain <= 0:
            continue
        loss = objective_g(problem, np.delete(A, idx)) - g_A
        s = max(s, (gain - loss) / gain)
    if s == -math.inf or s >= 1.0:
        s = 1.0 if s != -math.inf else s
        return SteepnessReport(math.inf, s, q, math.inf, math.inf, degenerate=True)
    t = s / (1.0 - s)
    exact, relaxed = bound_factors(t, q)
    return SteepnessReport(t, s, q, exact, relaxed)


def log_permanent(W: np.ndarray) -> float:
    """log of the permanent of a non-negative square matrix (Ryser, k <= 20).

    Rows are rescaled by their maxima first; subsets of columns are
    enumerated as (high bits, low bits) blocks to keep memory small.
    """
    W = np.asarray(W, dtype=np.float64)
    n = W.shape[0]
    if W.shape != (n, n):
        raise ValueError("matrix must be square")
    if n == 0:
        return 0.0
    if n > 20:
        raise ValueError("exact permanent limited to k <= 20")
    scale = W.max(axis=1)
    if np.any(scale <= 0):
        return -math.inf
    A = W / scale[:, None]
    lo_bits = min(n, 10)
    hi_bits = n - lo_bits

    def subset_sums(cols_block, nbits):
        masks = np.arange(1 << nbits)
        member = ((masks[:, None] >> np.arange(nbits)) & 1).astype(np.float64)
        return member @ cols_block.T, member.sum(axis=1).astype(np.int64)

    L, lsize = subset_sums(A[:, :lo_bits], lo_bits)
    H, hsize = subset_sums(A[:, lo_bits:], hi_bits)
    terms = []
    for h in range(len(H)):
        prod = np.prod(L + H[h], axis=1)
        sign = np.where((lsize + hsize[h]) % 2 == 0, 1.0, -1.0)
        terms.extend((sign * prod).tolist())
    perm = math.fsum(terms) * (-1.0 if n % 2 else 1.0)
    if perm <= 0:
        return -math.inf
    return math.log(perm) + float(np.log(scale).sum())


def kmmm_log_likelihood(trajectory_points, mu, metric: Optional[CostMetric] = None, mode: str = "exact") -> float:
    """Log-likelihood of a k-point set under the k-matching mixture centred at ``mu``.

    ``exact`` averages the Gaussian product over all k! matchings;
    ``max_matching`` keeps only the best matching (no 1/k! prior).
    """
    metric = metric or CostMetric()
    X = np.atleast_2d(np.asarray(trajectory_points, dtype=np.float64))
    C = np.atleast_2d(np.asarray(mu, dtype=np.float64))
    k, d = X.shape
    if C.shape[0] != k:
        raise ValueError(f"need exactly k = {k} centers, got {C.shape[0]}")
    cost = metric.cost_matrix(X, C)
    log_norm = -0.5 * (d * math.log(2 * math.pi) + metric.log_det_cov(d))
    if mode == "exact":
        if k > 20:
            raise ValueError("exact mode limited to k <= 20")
        shift = cost.min(axis=1)
        lp = log_permanent(np.exp(-0.5 * (cost - shift[:, None])))
        return lp - 0.5 * float(shift.sum()) - math.lgamma(k + 1) + k * log_norm
    if mode == "max_matching":
        a = matching.solve_cost_matrix(cost)
        return -0.5 * a.cost + k * log_norm
    raise ValueError(f"unknown mode {mode!r}")
