"""Monte-Carlo rollouts of a sequential policy with labels drawn from the model posterior."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import klr
from .data import Pool
from .policy import Policy, SelectionContext, select_max_entropy


@dataclass(frozen=True)
class Trajectory:
    points: np.ndarray
    sampled_labels: np.ndarray

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class TrajectorySet:
    trajectories: List[Trajectory]
    k: int

    def __post_init__(self):
        for t in self.trajectories:
            if len(t.points) != self.k:
                raise ValueError("every trajectory must have exactly k points")

    @property
    def N(self) -> int:
        return len(self.trajectories)

    def union(self) -> np.ndarray:
        """Sorted distinct pool indices visited by any trajectory."""
        if not self.trajectories:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate([t.points for t in self.trajectories]))

    def point_matrix(self) -> np.ndarray:
        return np.array([t.points for t in self.trajectories], dtype=np.int64).reshape(self.N, self.k)


def sample_label(model: klr.KlrModel, x, rng: np.random.Generator) -> int:
    """1 with probability P(class 1 | x), else 0."""
    p = float(model.predict_proba(np.asarray(x, dtype=np.float64)[None])[0])
    return int(rng.random() < p)


def simulate_trajectory(
    pool: Pool,
    policy: Policy = select_max_entropy,
    k: int = 1,
    rng=None,
    width: float = klr.DEFAULT_WIDTH,
    ridge: float = klr.DEFAULT_RIDGE,
) -> Trajectory:
    """Run ``policy`` for ``k`` steps on a private copy of the pool.

    Each step refits the classifier on the labeled set plus the labels
    sampled so far, lets the policy pick, then samples that point's label.
    The random stream is consumed policy first, label second.
    """
    if len(pool.unlabeled) < k:
        raise ValueError(f"pool has {len(pool.unlabeled)} unlabeled examples, fewer than k={k}")
    rng = np.random.default_rng(rng)
    X = pool.dataset.features
    sim = pool
    points, labels = [], []
    for _ in range(k):
        model = klr.fit(sim, width, ridge)
        x = policy(SelectionContext(sim, model, rng))
        y = sample_label(model, X[x], rng)
        points.append(x)
        labels.append(y)
        sim = sim.with_labels([x], [y])
    return Trajectory(np.array(points, dtype=np.int64), np.array(labels, dtype=np.int64))


def substreams(rng, n: int) -> List[np.random.Generator]:
    """``n`` independent generators derived from one draw of ``rng``."""
    rng = np.random.default_rng(rng)
    master = int(rng.integers(0, 2**63))
    return [np.random.default_rng(s) for s in np.random.SeedSequence(master).spawn(n)]


def simulate_trajectories(
    pool: Pool,
    policy: Policy = select_max_entropy,
    k: int = 1,
    N: int = 20,
    rng=None,
    width: float = klr.DEFAULT_WIDTH,
    ridge: float = klr.DEFAULT_RIDGE,
    workers: Optional[int] = 1,
) -> TrajectorySet:
    """``N`` independent rollouts; trajectory ``i`` always uses substream ``i``,
    so the result does not depend on ``workers``."""
    streams = substreams(rng, N)

    def run(s):
        return simulate_trajectory(pool, policy, k, s, width, ridge)

    if workers is None or workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            trajs = list(ex.map(run, streams))
    else:
        trajs = [run(s) for s in streams]
    return TrajectorySet(trajs, k)
