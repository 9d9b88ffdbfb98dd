"""Sequential selection policies and the non-matching batch baselines.

Ties are always broken toward the lowest pool index.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import Pool
from .klr import KlrModel, entropy


@dataclass(frozen=True)
class SelectionContext:
    pool: Pool
    model: KlrModel
    rng: np.random.Generator


Policy = Callable[[SelectionContext], int]


def _require(ctx: SelectionContext, k: int = 1) -> np.ndarray:
    u = ctx.pool.unlabeled
    if len(u) == 0:
        raise ValueError("unlabeled set is empty")
    if len(u) < k:
        raise ValueError(f"pool has {len(u)} unlabeled examples, fewer than k={k}")
    return u


def unlabeled_entropy(ctx: SelectionContext) -> np.ndarray:
    """Class entropy of every unlabeled example, aligned with ``pool.unlabeled``."""
    X = ctx.pool.dataset.features[ctx.pool.unlabeled]
    return entropy(ctx.model.predict_proba(X))


def rank_by_entropy(indices: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Indices sorted by descending score, ascending index among equal scores."""
    return indices[np.lexsort((indices, -scores))]


def select_max_entropy(ctx: SelectionContext) -> int:
    u = _require(ctx)
    h = unlabeled_entropy(ctx)
    return int(u[h == h.max()].min())


def select_random(ctx: SelectionContext) -> int:
    u = _require(ctx)
    return int(u[ctx.rng.integers(len(u))])


def batch_top_k_uncertain(ctx: SelectionContext, k: int) -> np.ndarray:
    u = _require(ctx, k)
    return rank_by_entropy(u, unlabeled_entropy(ctx))[:k]


def batch_random(ctx: SelectionContext, k: int) -> np.ndarray:
    u = _require(ctx, k)
    return ctx.rng.choice(u, size=k, replace=False)
