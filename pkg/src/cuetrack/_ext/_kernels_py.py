"""Pure-Python (numpy) versions of the compiled kernels in ``_kernels.pyx``.

Both implementations follow the same arithmetic so results agree bit-for-bit
on the assignment and to rounding on IoU.
"""
import numpy as np


def solve_square(cost):
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n = cost.shape[0]
    if cost.ndim != 2 or cost.shape[1] != n:
        raise ValueError("cost matrix must be square")
    if n == 0:
        return np.empty(0, dtype=np.int64)

    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], np.inf)
            # argmin returns the first minimum, same as the strict < scan
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            used_idx = np.flatnonzero(used)
            u[p[used_idx]] += delta
            v[used_idx] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break

    col_of_row = np.empty(n, dtype=np.int64)
    col_of_row[p[1:] - 1] = np.arange(n)
    return col_of_row


def iou_matrix(a, b):
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    al = a[:, 0:1] - 0.5 * a[:, 2:3]
    ar = a[:, 0:1] + 0.5 * a[:, 2:3]
    at = a[:, 1:2] - 0.5 * a[:, 3:4]
    ab = a[:, 1:2] + 0.5 * a[:, 3:4]
    bl = b[:, 0] - 0.5 * b[:, 2]
    br = b[:, 0] + 0.5 * b[:, 2]
    bt = b[:, 1] - 0.5 * b[:, 3]
    bb = b[:, 1] + 0.5 * b[:, 3]
    iw = np.minimum(ar, br) - np.maximum(al, bl)
    ih = np.minimum(ab, bb) - np.maximum(at, bt)
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    union = (a[:, 2] * a[:, 3])[:, None] + (b[:, 2] * b[:, 3])[None, :] - inter
    return np.where(inter > 0, inter / union, 0.0)
