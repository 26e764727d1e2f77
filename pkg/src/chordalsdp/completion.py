"""Maximum-determinant PSD completion over a chordal pattern.

A solution of the decomposed problem only carries matrix entries inside
the extended sparsity pattern.  Chordality guarantees a full PSD matrix
agreeing with those entries exists whenever every clique block is PSD;
the maximum-determinant one is filled in closed form by walking the
clique tree from the root outward, one Schur-complement block per
clique.
"""

from __future__ import annotations

import warnings
from collections import deque

import numpy as np

from ._svec import SQRT2, smat
from .errors import CompletionWarning
from .pattern import CliqueDecomposition

_EIG_CUTOFF = 1e-10
_PSD_SLACK = 1e-7


def block_alpha(decomp: CliqueDecomposition, x: np.ndarray) -> float:
    """Smallest alpha >= 0 with every clique block of x + alpha*I PSD."""
    x = np.asarray(x, dtype=np.float64)
    alpha = 0.0
    for sel in decomp.entry_selectors:
        vals = np.linalg.eigvalsh(smat(x[sel]))
        alpha = max(alpha, -min(0.0, float(vals[0])))
    return alpha


def psd_violation(decomp: CliqueDecomposition, x: np.ndarray) -> float:
    """Normalized cone violation of a reduced point: alpha / (1 + ||X||_F).

    The Frobenius norm of the pattern-supported matrix equals the
    2-norm of the reduced vector, off-diagonal doubling included.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (decomp.reduced_dim,):
        raise ValueError(
            f"expected {decomp.reduced_dim} reduced coordinates, got {x.shape}"
        )
    return block_alpha(decomp, x) / (1.0 + float(np.linalg.norm(x)))


def _spread(decomp: CliqueDecomposition, x: np.ndarray) -> np.ndarray:
    """Reduced coordinates to a dense symmetric matrix on the pattern."""
    n = decomp.pattern.n
    M = np.zeros((n, n))
    for val, (i, j) in zip(x, decomp.entries):
        if i == j:
            M[i - 1, i - 1] = val
        else:
            M[i - 1, j - 1] = M[j - 1, i - 1] = val / SQRT2
    return M


def _pinv_psd(S: np.ndarray) -> np.ndarray:
    """Eigenvalue pseudo-inverse of a nominally PSD block."""
    vals, vecs = np.linalg.eigh(S)
    top = float(vals[-1])
    if top <= 0.0:
        return np.zeros_like(S)
    if float(vals[0]) < -_PSD_SLACK * top:
        warnings.warn(
            "separator block is not PSD to tolerance; "
            "the completion may not certify feasibility",
            CompletionWarning,
            stacklevel=3,
        )
    keep = vals > _EIG_CUTOFF * top
    inv = np.zeros_like(vals)
    inv[keep] = 1.0 / vals[keep]
    return (vecs * inv) @ vecs.T


def _visit_order(decomp: CliqueDecomposition, root) -> list:
    """BFS order over the clique forest, re-rooted at `root` when given."""
    p = decomp.p
    adj = [[] for _ in range(p)]
    for k, pk in enumerate(decomp.parent):
        if pk is not None:
            adj[k].append(pk)
            adj[pk].append(k)
    seen = [False] * p
    order = []

    def bfs(start):
        queue = deque([start])
        seen[start] = True
        while queue:
            k = queue.popleft()
            order.append(k)
            for nb in adj[k]:
                if not seen[nb]:
                    seen[nb] = True
                    queue.append(nb)

    if root is not None:
        bfs(root)
    for k in range(p):
        if not seen[k]:
            bfs(k)
    return order


def psd_complete(
    decomp: CliqueDecomposition, x: np.ndarray, root: int = None
) -> np.ndarray:
    """Fill a reduced point to the dense maximum-determinant completion.

    Walks the clique tree breadth-first from the root (any clique index
    may be forced as the root; the completed matrix does not depend on
    the choice).  Each step fills the block between the new clique's
    fresh vertices and everything already covered via a Schur product
    through the separator.  Vertices in different pattern components
    stay uncoupled: their cross blocks are zero.

    Warns CompletionWarning when a separator block fails PSD by more
    than a small relative slack, in which case the input was not close
    enough to cone-feasible for the fill to certify anything.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (decomp.reduced_dim,):
        raise ValueError(
            f"expected {decomp.reduced_dim} reduced coordinates, got {x.shape}"
        )
    if root is not None and not 0 <= root < decomp.p:
        raise ValueError(f"root must be a clique index below {decomp.p}")

    M = _spread(decomp, x)
    order = _visit_order(decomp, root)

    covered: set = set()
    for k in order:
        cv = set(decomp.cliques[k])
        sep = sorted(cv & covered)
        new = sorted(cv - covered)
        rest = sorted(covered - set(sep))
        if sep and new and rest:
            si = np.array(sep) - 1
            wi = np.array(new) - 1
            ui = np.array(rest) - 1
            coupling = M[np.ix_(ui, si)] @ _pinv_psd(M[np.ix_(si, si)])
            fill = coupling @ M[np.ix_(si, wi)]
            M[np.ix_(ui, wi)] = fill
            M[np.ix_(wi, ui)] = fill.T
        covered |= cv
    return M
