# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled assignment kernels. Mirrors ``_assign_py`` operation for operation,
so both backends give bit-identical results."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()

BACKEND = "cython"


cdef int _augment(const double[:, ::1] cost, const unsigned char[::1] active, Py_ssize_t row,
                  cnp.int64_t[::1] row_to_col, cnp.int64_t[::1] col_to_row,
                  double[::1] u, double[::1] v) noexcept nogil:
    cdef Py_ssize_t M = cost.shape[1]
    cdef double *minv = <double *> malloc(M * sizeof(double))
    cdef Py_ssize_t *way = <Py_ssize_t *> malloc(M * sizeof(Py_ssize_t))
    cdef unsigned char *used = <unsigned char *> malloc(M * sizeof(unsigned char))
    cdef Py_ssize_t *usedlist = <Py_ssize_t *> malloc(M * sizeof(Py_ssize_t))
    cdef Py_ssize_t nused = 0
    cdef Py_ssize_t i0 = row, j0 = -1, j1, j, jp, t, r
    cdef double delta, cur, ui0
    if minv == NULL or way == NULL or used == NULL or usedlist == NULL:
        free(minv); free(way); free(used); free(usedlist)
        return -2
    for j in range(M):
        minv[j] = INFINITY
        way[j] = -1
        used[j] = 0
    while True:
        delta = INFINITY
        j1 = -1
        ui0 = u[i0]
        for j in range(M):
            if active[j] == 0 or used[j]:
                continue
            cur = cost[i0, j] - ui0 - v[j]
            if cur < minv[j]:
                minv[j] = cur
                way[j] = j0
            if minv[j] < delta:
                delta = minv[j]
                j1 = j
        if j1 == -1:
            free(minv); free(way); free(used); free(usedlist)
            return -1
        u[row] += delta
        for t in range(nused):
            j = usedlist[t]
            u[col_to_row[j]] += delta
            v[j] -= delta
        for j in range(M):
            if active[j] != 0 and not used[j]:
                minv[j] -= delta
        used[j1] = 1
        usedlist[nused] = j1
        nused += 1
        j0 = j1
        if col_to_row[j0] == -1:
            break
        i0 = col_to_row[j0]
    while True:
        jp = way[j0]
        r = row if jp == -1 else col_to_row[jp]
        col_to_row[j0] = r
        row_to_col[r] = j0
        if jp == -1:
            break
        j0 = jp
    free(minv); free(way); free(used); free(usedlist)
    return 0


def augment(const double[:, ::1] cost, const unsigned char[::1] active, Py_ssize_t row,
            cnp.int64_t[::1] row_to_col, cnp.int64_t[::1] col_to_row,
            double[::1] u, double[::1] v):
    """Insert free ``row`` into an optimal partial matching (one shortest path)."""
    cdef int rc
    with nogil:
        rc = _augment(cost, active, row, row_to_col, col_to_row, u, v)
    if rc == -1:
        raise ValueError("no free active column left")
    if rc == -2:
        raise MemoryError()


def hungarian(const double[:, ::1] cost, const unsigned char[::1] active):
    """Optimal assignment of every row; returns ``(row_to_col, col_to_row, u, v)``."""
    cdef Py_ssize_t k = cost.shape[0], M = cost.shape[1], i, n_active = 0
    cdef int rc = 0
    for i in range(M):
        if active[i] != 0:
            n_active += 1
    if n_active < k:
        raise ValueError("fewer active columns than rows")
    r2c_a = np.full(k, -1, dtype=np.int64)
    c2r_a = np.full(M, -1, dtype=np.int64)
    u_a = np.zeros(k)
    v_a = np.zeros(M)
    cdef cnp.int64_t[::1] r2c = r2c_a
    cdef cnp.int64_t[::1] c2r = c2r_a
    cdef double[::1] u = u_a
    cdef double[::1] v = v_a
    with nogil:
        for i in range(k):
            rc = _augment(cost, active, i, r2c, c2r, u, v)
            if rc != 0:
                break
    if rc == -2:
        raise MemoryError()
    if rc != 0:
        raise ValueError("no free active column left")
    return r2c_a, c2r_a, u_a, v_a
