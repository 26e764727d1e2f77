"""Conversion of a conic problem into clique-block consensus form.

The decomposed problem keeps one global variable x in *reduced*
coordinates: free scalars, then nonnegative scalars, then, per PSD
block, the upper-triangular entries of that block's chordal extended
pattern (svec scaling, column-major).  Each maximal clique C_k
contributes a consensus block x_k = H_k x, where H_k is a pure index
gather (see CliqueDecomposition); all nonnegative scalars form one
extra consensus block projected by clamping.  D = sum_k H_k^T H_k is
diagonal and counts clique memberships per coordinate.

Constraint and objective values are preserved exactly: c and the rows
of A vanish outside the aggregate pattern, the reduced coordinates
contain that pattern, and svec scaling makes Euclidean inner products
equal trace inner products.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from ._svec import svec_len
from .errors import EmptyProblemError, RankDeficiencyWarning
from .pattern import CliqueDecomposition, aggregate_pattern, chordal_extend, maximal_cliques
from .problem_io import ConicProblem


@dataclass(frozen=True, eq=False)
class ConsensusBlock:
    """One block of the decomposed cone.

    kind 'psd': a clique block of matrix side `side`, vectorized length
    side*(side+1)/2.  kind 'nonneg': all nonnegative scalars batched
    into a single clamp-projected block (side is the scalar count).
    idx maps the block's local coordinates into the reduced vector;
    start/length locate it inside the stacked consensus vector.
    """

    kind: str
    side: int
    start: int
    length: int
    idx: np.ndarray


@dataclass(eq=False)
class DecomposedProblem:
    """A conic problem in clique-block consensus form.

    base holds the original data; A, b, c are the reduced-coordinate
    copies the engines iterate on (rescaling replaces them, never the
    base).  decomps lists one CliqueDecomposition per PSD block;
    psd_slices gives each block's reduced-coordinate range.  sblocks,
    idx_all, D, block_dims, nd describe the consensus structure.
    """

    base: ConicProblem
    decomps: tuple
    A: sp.csr_matrix
    b: np.ndarray
    c: np.ndarray
    free: int
    nonneg: int
    psd_slices: tuple
    full_index: np.ndarray
    sblocks: tuple
    idx_all: np.ndarray
    D: np.ndarray
    block_dims: tuple
    nd: int

    @property
    def m(self) -> int:
        return self.b.shape[0]

    @property
    def nr(self) -> int:
        """Reduced coordinate count."""
        return self.c.shape[0]

    @property
    def p(self) -> int:
        """Total PSD clique count across blocks."""
        return sum(d.p for d in self.decomps)

    def gather(self, x: np.ndarray) -> np.ndarray:
        """Stacked consensus blocks (H x) from a reduced vector."""
        return x[self.idx_all]

    def scatter(self, s: np.ndarray) -> np.ndarray:
        """Adjoint of gather: sum_k H_k^T s_k as a reduced vector."""
        return np.bincount(self.idx_all, weights=s, minlength=self.nr)

    def full_x(self, x: np.ndarray) -> np.ndarray:
        """Embed a reduced vector back into the base problem's
        vectorized coordinates (zeros off the pattern)."""
        out = np.zeros(self.base.N)
        out[self.full_index] = x
        return out

    def clique_stats(self) -> dict:
        sizes = [len(c) for d in self.decomps for c in d.cliques]
        return {
            "count": len(sizes),
            "max_size": max(sizes) if sizes else 0,
            "min_size": min(sizes) if sizes else 0,
            "nd": self.nd,
        }

    def replaced(self, A, b, c) -> "DecomposedProblem":
        """Copy sharing all structure but with new data arrays."""
        return replace(self, A=A, b=b, c=c)


def decompose(problem: ConicProblem) -> DecomposedProblem:
    """Build the clique-block consensus form of a problem.

    Per PSD block: extract the aggregate pattern of (c, A), extend it to
    a chordal pattern, enumerate maximal cliques, and lay the extended
    pattern's upper-triangular entries out as reduced coordinates.  Free
    and nonnegative scalars pass through in front.

    Raises EmptyProblemError when there is nothing to decompose; warns
    RankDeficiencyWarning when A looks numerically rank deficient
    (checked densely for m <= 500; larger problems rely on the
    factorization-time pivot check).
    """
    if problem.m < 1:
        raise EmptyProblemError("problem has no affine constraints")
    if problem.N < 1:
        raise EmptyProblemError("problem has no cone coordinates")

    free = problem.cone_dims.free
    nonneg = problem.cone_dims.nonneg

    decomps = []
    col_chunks = [np.arange(free + nonneg, dtype=np.intp)]
    psd_slices = []
    off = free + nonneg
    for bi, side in enumerate(problem.cone_dims.psd):
        agg = aggregate_pattern(problem, bi)
        ext = chordal_extend(agg)
        dec = maximal_cliques(ext)
        decomps.append(dec)
        iarr = np.fromiter((i for i, _ in dec.entries), dtype=np.intp)
        jarr = np.fromiter((j for _, j in dec.entries), dtype=np.intp)
        cols = off + (jarr - 1) * jarr // 2 + (iarr - 1)
        col_chunks.append(cols)
        off += svec_len(side)

    full_index = np.concatenate(col_chunks) if col_chunks else np.arange(0)
    A = problem.A[:, full_index].tocsr()
    c = problem.c[full_index].copy()
    b = problem.b.copy()
    nr = full_index.shape[0]

    start = free + nonneg
    for dec in decomps:
        psd_slices.append(slice(start, start + dec.reduced_dim))
        start += dec.reduced_dim
    psd_slices = tuple(psd_slices)

    sblocks = []
    s_off = 0
    for dec, sl in zip(decomps, psd_slices):
        for k, sel in enumerate(dec.entry_selectors):
            q = len(dec.cliques[k])
            idx = (sel + sl.start).astype(np.intp)
            sblocks.append(
                ConsensusBlock("psd", q, s_off, len(idx), idx)
            )
            s_off += len(idx)
    if nonneg:
        idx = np.arange(free, free + nonneg, dtype=np.intp)
        sblocks.append(ConsensusBlock("nonneg", nonneg, s_off, nonneg, idx))
        s_off += nonneg
    if not sblocks and free == 0:
        raise EmptyProblemError("problem decomposes to nothing")

    idx_all = (
        np.concatenate([blk.idx for blk in sblocks])
        if sblocks
        else np.arange(0, dtype=np.intp)
    )
    D = np.bincount(idx_all, minlength=nr).astype(np.float64)
    block_dims = tuple(blk.length for blk in sblocks)
    nd = int(sum(block_dims))

    if problem.m <= 500:
        gram = (problem.A @ problem.A.T).toarray()
        eigs = np.linalg.eigvalsh(gram)
        if eigs[-1] > 0 and eigs[0] < 1e-20 * eigs[-1]:
            warnings.warn(
                "constraint matrix looks rank deficient "
                f"(eig ratio {eigs[0] / eigs[-1]:.2e})",
                RankDeficiencyWarning,
                stacklevel=2,
            )

    return DecomposedProblem(
        base=problem,
        decomps=tuple(decomps),
        A=A,
        b=b,
        c=c,
        free=free,
        nonneg=nonneg,
        psd_slices=psd_slices,
        full_index=full_index,
        sblocks=tuple(sblocks),
        idx_all=idx_all,
        D=D,
        block_dims=block_dims,
        nd=nd,
    )


def select(dp: DecomposedProblem, k: int, x: np.ndarray) -> np.ndarray:
    """H_k x: extract consensus block k from a reduced vector.

    Pure indexing; costs no flops in the operation-count model.
    """
    if not 0 <= k < len(dp.sblocks):
        raise IndexError(f"consensus block {k} out of range")
    x = np.asarray(x)
    if x.shape != (dp.nr,):
        raise ValueError(f"x has shape {x.shape}, expected ({dp.nr},)")
    return x[dp.sblocks[k].idx]


def scatter_add(dp: DecomposedProblem, k: int, xk: np.ndarray, accum: np.ndarray) -> np.ndarray:
    """accum += H_k^T x_k, in place; returns accum.

    Adjoint of select: <select(dp, k, x), y> == <x, scatter_add(dp, k, y, 0)>.
    """
    if not 0 <= k < len(dp.sblocks):
        raise IndexError(f"consensus block {k} out of range")
    blk = dp.sblocks[k]
    xk = np.asarray(xk)
    if xk.shape != (blk.length,):
        raise ValueError(f"block {k} has length {blk.length}, got {xk.shape}")
    if accum.shape != (dp.nr,):
        raise ValueError(f"accum has shape {accum.shape}, expected ({dp.nr},)")
    # selector indices are unique within one block, so fancy-index add works
    accum[blk.idx] += xk
    return accum
