"""Minimum-cost injective matching of trajectory points to candidate centers.

The heavy lifting is done by ``_assign`` (compiled) when it is importable,
otherwise by the NumPy port in ``_assign_py``. Set ``SIMMATCH_PURE_PYTHON=1``
to force the fallback.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

if os.environ.get("SIMMATCH_PURE_PYTHON"):
    from . import _assign_py as _core
else:
    try:
        from . import _assign as _core
    except ImportError:  # extension not built
        from . import _assign_py as _core

BACKEND = _core.BACKEND


def get_backend(name: Optional[str] = None):
    """Return the kernel module ``name`` ("cython" / "python"), default the active one."""
    if name is None:
        return _core
    if name == "python":
        from . import _assign_py

        return _assign_py
    if name == "cython":
        from . import _assign

        return _assign
    raise ValueError(f"unknown backend {name!r}")


@dataclass(frozen=True)
class CostMetric:
    """Squared Mahalanobis cost ``(x - c)' S (x - c)`` with ``S`` = inverse covariance.

    ``sigma_inverse=None`` means the identity, i.e. squared Euclidean distance.
    """

    sigma_inverse: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.sigma_inverse is not None:
            s = np.array(self.sigma_inverse, dtype=np.float64)
            if s.ndim != 2 or s.shape[0] != s.shape[1]:
                raise ValueError("sigma_inverse must be square")
            if not np.allclose(s, s.T):
                raise ValueError("sigma_inverse must be symmetric")
            if np.linalg.eigvalsh(s).min() <= 0:
                raise ValueError("sigma_inverse must be positive definite")
            s.setflags(write=False)
            object.__setattr__(self, "sigma_inverse", s)

    def cost_matrix(self, points: np.ndarray, centers: np.ndarray) -> np.ndarray:
        """``C[j, c]`` = cost of matching ``points[j]`` to ``centers[c]``.

        Computed from explicit differences so identical rows cost exactly 0.
        """
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
        if points.shape[1] != centers.shape[1]:
            raise ValueError(
                f"dimension mismatch: {points.shape[1]} vs {centers.shape[1]}"
            )
        diff = points[:, None, :] - centers[None, :, :]
        if self.sigma_inverse is None:
            out = np.einsum("ijk,ijk->ij", diff, diff)
        else:
            if self.sigma_inverse.shape[0] != points.shape[1]:
                raise ValueError("sigma_inverse does not match feature dimension")
            out = np.einsum("ijk,kl,ijl->ij", diff, self.sigma_inverse, diff)
        return np.ascontiguousarray(out)

    def log_det_cov(self, d: int) -> float:
        """log det of the covariance (the inverse of ``sigma_inverse``)."""
        if self.sigma_inverse is None:
            return 0.0
        sign, ld = np.linalg.slogdet(self.sigma_inverse)
        return float(-ld)


def pair_cost(metric: CostMetric, x, c) -> float:
    x = np.asarray(x, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if x.shape != c.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {c.shape}")
    return float(metric.cost_matrix(x[None], c[None])[0, 0])


def matched_cost(cost: np.ndarray, row_to_col: np.ndarray) -> float:
    """Exactly rounded sum of the matched entries (independent of summation order)."""
    return math.fsum(cost[np.arange(len(row_to_col)), row_to_col].tolist())


@dataclass
class Assignment:
    """Optimal matching of ``k`` trajectory points into the active centers.

    ``pairs[j]`` is the center (column) index given to point ``j``;
    ``active`` marks the centers still available. Dual potentials are kept
    so the matching can be repaired after a center is removed.
    """

    cost_matrix: np.ndarray
    active: np.ndarray
    pairs: np.ndarray
    center_to_point: np.ndarray
    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    cost: float = 0.0

    @property
    def k(self) -> int:
        return self.cost_matrix.shape[0]

    def recompute_cost(self) -> float:
        return matched_cost(self.cost_matrix, self.pairs)

    def uses(self, center: int) -> bool:
        return self.center_to_point[center] != -1


def solve_cost_matrix(cost: np.ndarray, active: Optional[np.ndarray] = None, backend=None) -> Assignment:
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    k, m = cost.shape
    if active is None:
        active = np.ones(m, dtype=np.uint8)
    else:
        active = np.ascontiguousarray(active, dtype=np.uint8)
    if int(active.sum()) < k:
        raise ValueError(f"need at least {k} centers, got {int(active.sum())}")
    core = backend or _core
    r2c, c2r, u, v = core.hungarian(cost, active)
    return Assignment(cost, active, r2c, c2r, u, v, matched_cost(cost, r2c))


def solve_assignment(trajectory_points, centers, metric: Optional[CostMetric] = None) -> Assignment:
    """Globally minimum-cost injective map from the points into the centers.

    Requires ``len(centers) >= len(trajectory_points)``; surplus centers stay
    unmatched.
    """
    metric = metric or CostMetric()
    points = np.atleast_2d(np.asarray(trajectory_points, dtype=np.float64))
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if len(centers) < len(points):
        raise ValueError(f"need at least {len(points)} centers, got {len(centers)}")
    return solve_cost_matrix(metric.cost_matrix(points, centers))


def repair_after_removal(assignment: Assignment, removed_center: int, backend=None) -> Assignment:
    """Optimal assignment once ``removed_center`` is no longer available.

    If the center was unmatched the input is returned unchanged; otherwise
    the orphaned point is re-inserted with a single shortest-path search.
    """
    if not assignment.active[removed_center]:
        raise ValueError(f"center {removed_center} is not active")
    if int(assignment.active.sum()) - 1 < assignment.k:
        raise ValueError("reduced center set smaller than k")
    active = assignment.active.copy()
    active[removed_center] = 0
    row = int(assignment.center_to_point[removed_center])
    if row == -1:
        return Assignment(
            assignment.cost_matrix, active, assignment.pairs, assignment.center_to_point,
            assignment.u, assignment.v, assignment.cost,
        )
    r2c = assignment.pairs.copy()
    c2r = assignment.center_to_point.copy()
    u = assignment.u.copy()
    v = assignment.v.copy()
    c2r[removed_center] = -1
    r2c[row] = -1
    v[removed_center] = 0.0
    (backend or _core).augment(assignment.cost_matrix, active, row, r2c, c2r, u, v)
    return Assignment(assignment.cost_matrix, active, r2c, c2r, u, v, matched_cost(assignment.cost_matrix, r2c))
