"""Deterministic compensated reductions.

Every double sum in the package goes through these helpers so that the
result does not depend on thread count or BLAS configuration.
"""
import math

import numpy as np

_BLOCK = 32


def total(values):
    """Exactly rounded sum of a 1-D array (Shewchuk via ``math.fsum``)."""
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


def row_sums(matrix):
    """Row sums of a 2-D array with Neumaier-compensated accumulation.

    Columns are folded in fixed blocks of ``_BLOCK``; block partials are then
    accumulated left to right with a two-sum correction term per row.
    """
    m = np.asarray(matrix, dtype=float)
    n_rows, n_cols = m.shape
    if n_cols == 0:
        return np.zeros(n_rows)
    partial = np.add.reduceat(m, np.arange(0, n_cols, _BLOCK), axis=1)
    s = partial[:, 0].copy()
    c = np.zeros(n_rows)
    for j in range(1, partial.shape[1]):
        x = partial[:, j]
        t = s + x
        big = np.abs(s) >= np.abs(x)
        c += np.where(big, (s - t) + x, (x - t) + s)
        s = t
    return s + c


def dot(u, v):
    """Euclidean pairing: nodewise products, then an exactly rounded sum."""
    return total(np.asarray(u, dtype=float) * np.asarray(v, dtype=float))
