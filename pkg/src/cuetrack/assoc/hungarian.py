"""Minimum-cost assignment on rectangular matrices with forbidden cells."""
from __future__ import annotations

from typing import List, Optional, Tuple

import numpy as np

from .._ext import solve_square
from ..errors import DataError


def hungarian(cost, forbidden: Optional[np.ndarray] = None) -> List[Tuple[int, int]]:
    """Solve the assignment problem for an ``n x m`` cost matrix.

    Cells that are forbidden (``forbidden[i, j]`` true, or a cost of ``+inf``)
    are never matched. Among all matchings of maximum cardinality over the
    admissible cells the one with the smallest total cost is returned, as a
    list of ``(row, col)`` pairs sorted by row.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise DataError("cost must be a 2-d matrix")
    n, m = cost.shape
    admissible = np.ones((n, m), dtype=bool) if forbidden is None else ~np.asarray(forbidden, dtype=bool)
    admissible &= ~np.isposinf(cost)
    if not np.all(np.isfinite(cost[admissible])):
        raise DataError("admissible cells must hold finite costs")
    if n == 0 or m == 0 or not admissible.any():
        return []

    vals = cost[admissible]
    lo = vals.min()
    spread = vals.max() - lo
    # Any matching with one more admissible cell must beat all matchings with one fewer.
    big = (min(n, m) + 1) * spread + 1.0
    k = max(n, m)
    padded = np.full((k, k), big, dtype=np.float64)
    padded[:n, :m] = np.where(admissible, cost - lo, big)

    col_of_row = solve_square(padded)
    return [(i, int(col_of_row[i])) for i in range(n) if col_of_row[i] < m and admissible[i, col_of_row[i]]]


def assignment_cost(cost, pairs) -> float:
    cost = np.asarray(cost, dtype=np.float64)
    return float(sum(cost[i, j] for i, j in sorted(pairs)))
