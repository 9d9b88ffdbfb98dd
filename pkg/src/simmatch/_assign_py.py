"""Pure NumPy assignment kernels; same contract as the compiled ``_assign``.

Rectangular min-cost assignment of ``k`` rows into ``M`` columns by
successive shortest paths with potentials (Hungarian method, row by row).
Only columns with ``active[j] != 0`` may be used.

State arrays (all modified in place by :func:`augment`):

* ``row_to_col`` int64[k]: column of each row, -1 if free
* ``col_to_row`` int64[M]: row of each column, -1 if free
* ``u`` float64[k], ``v`` float64[M]: dual potentials with
  ``u[i] + v[j] <= cost[i, j]`` on active columns, equality on matched
  pairs and ``v[j] == 0`` on unmatched columns.
"""
import numpy as np

BACKEND = "python"


def augment(cost, active, row, row_to_col, col_to_row, u, v):
    """Insert free ``row`` into an optimal partial matching (one shortest path)."""
    M = cost.shape[1]
    avail = active.astype(bool)
    minv = np.full(M, np.inf)
    way = np.full(M, -1, dtype=np.int64)  # previous column on the path, -1 = start
    used = np.zeros(M, dtype=bool)
    i0 = row
    j0 = -1
    # potential shift of the start row accumulated along the search
    while True:
        free = avail & ~used
        cand = np.flatnonzero(free)
        if len(cand) == 0:
            raise ValueError("no free active column left")
        cur = cost[i0, cand] - u[i0] - v[cand]
        better = cur < minv[cand]
        upd = cand[better]
        minv[upd] = cur[better]
        way[upd] = j0
        m = minv[cand]
        pos = int(np.argmin(m))  # first minimum -> lowest column index
        delta = m[pos]
        j1 = int(cand[pos])
        # dual update: start row and rows of used columns go up, used columns down
        u[row] += delta
        usedc = np.flatnonzero(used)
        if len(usedc):
            u[col_to_row[usedc]] += delta
            v[usedc] -= delta
        minv[cand] -= delta
        used[j1] = True
        j0 = j1
        if col_to_row[j0] == -1:
            break
        i0 = col_to_row[j0]
    # flip the alternating path back to the start row
    while True:
        jp = way[j0]
        r = row if jp == -1 else col_to_row[jp]
        col_to_row[j0] = r
        row_to_col[r] = j0
        if jp == -1:
            break
        j0 = jp


def hungarian(cost, active):
    """Optimal assignment of every row; returns ``(row_to_col, col_to_row, u, v)``."""
    k, M = cost.shape
    if int(np.count_nonzero(active)) < k:
        raise ValueError("fewer active columns than rows")
    row_to_col = np.full(k, -1, dtype=np.int64)
    col_to_row = np.full(M, -1, dtype=np.int64)
    u = np.zeros(k)
    v = np.zeros(M)
    for i in range(k):
        augment(cost, active, i, row_to_col, col_to_row, u, v)
    return row_to_col, col_to_row, u, v
