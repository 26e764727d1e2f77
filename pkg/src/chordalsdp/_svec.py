"""Symmetric vectorization helpers.

A symmetric q x q matrix is stored as the vector of its upper triangle in
column-major order (all of column 1, then column 2, ...), with every
off-diagonal entry scaled by sqrt(2).  Under that scaling the Euclidean
inner product of two vectors equals the trace inner product of the
matrices they encode, so all cone projections and residual norms can be
taken directly on vectors.
"""

import math
from functools import lru_cache

import numpy as np

SQRT2 = math.sqrt(2.0)


def svec_len(q: int) -> int:
    return q * (q + 1) // 2


def svec_side(length: int) -> int:
    """Matrix side for a vector length, validating the triangular number."""
    q = (math.isqrt(8 * length + 1) - 1) // 2
    if svec_len(q) != length:
        raise ValueError(f"{length} is not a triangular number")
    return q


@lru_cache(maxsize=None)
def svec_tables(q: int):
    """(rows, cols, scale) arrays for side q, position k holding entry
    (rows[k], cols[k]) with rows <= cols, 0-based."""
    L = svec_len(q)
    rows = np.empty(L, dtype=np.intp)
    cols = np.empty(L, dtype=np.intp)
    k = 0
    for j in range(q):
        for i in range(j + 1):
            rows[k] = i
            cols[k] = j
            k += 1
    scale = np.where(rows == cols, 1.0, SQRT2)
    rows.setflags(write=False)
    cols.setflags(write=False)
    scale.setflags(write=False)
    return rows, cols, scale


def svec(M: np.ndarray) -> np.ndarray:
    """Vectorize a symmetric matrix (upper triangle is read)."""
    q = M.shape[0]
    rows, cols, scale = svec_tables(q)
    return np.asarray(M)[rows, cols] * scale


def smat(x: np.ndarray) -> np.ndarray:
    """Inverse of svec: rebuild the dense symmetric matrix."""
    x = np.asarray(x)
    q = svec_side(x.shape[0])
    rows, cols, scale = svec_tables(q)
    M = np.zeros((q, q))
    vals = x / scale
    M[rows, cols] = vals
    M[cols, rows] = vals
    return M
