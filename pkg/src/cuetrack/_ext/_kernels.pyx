# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: square assignment solver and pairwise IoU."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

from libc.math cimport INFINITY


def solve_square(double[:, ::1] cost):
    """Minimum-cost perfect matching on a square matrix.

    Shortest augmenting path with row/column potentials, O(n^3).
    Returns an int64 array mapping each row to its column.
    """
    cdef Py_ssize_t n = cost.shape[0]
    if cost.shape[1] != n:
        raise ValueError("cost matrix must be square")
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] col_of_row = out
    if n == 0:
        return out

    u_arr = np.zeros(n + 1, dtype=np.float64)
    v_arr = np.zeros(n + 1, dtype=np.float64)
    minv_arr = np.empty(n + 1, dtype=np.float64)
    p_arr = np.zeros(n + 1, dtype=np.int64)
    way_arr = np.zeros(n + 1, dtype=np.int64)
    used_arr = np.zeros(n + 1, dtype=np.uint8)
    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef double[::1] minv = minv_arr
    cdef cnp.int64_t[::1] p = p_arr
    cdef cnp.int64_t[::1] way = way_arr
    cdef unsigned char[::1] used = used_arr

    cdef Py_ssize_t i, j, i0, j0, j1
    cdef double delta, cur

    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(n + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            delta = INFINITY
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break

    for j in range(1, n + 1):
        col_of_row[p[j] - 1] = j - 1
    return out


def iou_matrix(double[:, ::1] a, double[:, ::1] b):
    """Pairwise IoU between (n, 4) and (m, 4) center/size box arrays."""
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], i, j
    out = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] res = out
    cdef double al, ar, at, ab, bl, br, bt, bb, iw, ih, inter
    for i in range(n):
        al = a[i, 0] - 0.5 * a[i, 2]
        ar = a[i, 0] + 0.5 * a[i, 2]
        at = a[i, 1] - 0.5 * a[i, 3]
        ab = a[i, 1] + 0.5 * a[i, 3]
        for j in range(m):
            bl = b[j, 0] - 0.5 * b[j, 2]
            br = b[j, 0] + 0.5 * b[j, 2]
            bt = b[j, 1] - 0.5 * b[j, 3]
            bb = b[j, 1] + 0.5 * b[j, 3]
            iw = (ar if ar < br else br) - (al if al > bl else bl)
            ih = (ab if ab < bb else bb) - (at if at > bt else bt)
            if iw > 0.0 and ih > 0.0:
                inter = iw * ih
                res[i, j] = inter / (a[i, 2] * a[i, 3] + b[j, 2] * b[j, 3] - inter)
    return out
