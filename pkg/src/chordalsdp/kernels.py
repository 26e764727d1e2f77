"""Numeric kernels: PSD-cone projection and the cached linear solvers.

Both ADMM families solve one fixed linear system per iteration.  The
primal/dual engines need the saddle system

    [D  A^T] [x]   [rhs_x]
    [A   0 ] [y] = [rhs_y]

eliminated to the m x m normal matrix A D^{-1} A^T, and the homogeneous
embedding needs (I + Q) u_hat = w eliminated down to I + A P^{-1} A^T
with P = I + D/2.  Each m x m matrix is factorized once, cached, and
reused every iteration; the penalty parameter never enters it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._svec import smat, svec, svec_tables
from .decomposition import DecomposedProblem
from .errors import EigFailureError, FactorizationError, RankDeficiencyWarning


def psd_project(s: np.ndarray) -> np.ndarray:
    """Project a vectorized symmetric matrix onto the PSD cone.

    Eigendecompose, clamp every negative eigenvalue to zero, reassemble.
    This is the Frobenius-nearest PSD matrix.  Raises EigFailureError if
    the symmetric eigensolver does not converge, which signals numerical
    breakdown of the surrounding iteration.
    """
    M = smat(np.asarray(s, dtype=np.float64))
    try:
        vals, vecs = np.linalg.eigh(M)
    except np.linalg.LinAlgError as e:
        raise EigFailureError(f"eigendecomposition failed: {e}") from e
    if vals[0] >= 0.0:
        return np.asarray(s, dtype=np.float64)
    pos = vals > 0.0
    if not np.any(pos):
        return np.zeros_like(np.asarray(s, dtype=np.float64))
    V = vecs[:, pos] * vals[pos]
    return svec(V @ vecs[:, pos].T)


def project_blocks(dp: DecomposedProblem, s: np.ndarray, pool=None) -> np.ndarray:
    """Project each consensus block of a stacked vector onto its cone.

    PSD blocks go through psd_project, the nonnegative block is clamped.
    When a thread pool is supplied the PSD blocks fan out to it and the
    call returns after all blocks finish (the projections are
    independent, so this is safe).
    """
    out = np.empty_like(s)
    psd = [blk for blk in dp.sblocks if blk.kind == "psd"]
    for blk in dp.sblocks:
        if blk.kind == "nonneg":
            seg = slice(blk.start, blk.start + blk.length)
            np.maximum(s[seg], 0.0, out=out[seg])

    def run(blk):
        seg = slice(blk.start, blk.start + blk.length)
        out[seg] = psd_project(s[seg])

    if pool is None:
        for blk in psd:
            run(blk)
    else:
        list(pool.map(run, psd))
    return out


@dataclass(eq=False)
class KktCache:
    """Cached factorization for one engine family.

    mode 'primal-dual': solve_m applies (A D^{-1} A^T)^{-1}; diag_inv is
    D^{-1}.  mode 'hsde': solve_m applies (I + A P^{-1} A^T)^{-1} with
    diag_inv = P^{-1}, P = I + D/2, and zeta/zeta_hat are the cached
    embedding vectors.  G keeps the assembled m x m matrix for
    diagnostics.  The cache is immutable after construction and shared
    read-only across iterations; repeated solves are bitwise
    deterministic.
    """

    mode: str
    dp: DecomposedProblem
    solve_m: object
    diag_inv: np.ndarray
    G: object
    dense: bool
    pivot_ratio: float
    zeta: np.ndarray = None
    zeta_hat: np.ndarray = None
    _layout: dict = field(default_factory=dict)


def _factor_spd(G: sp.csr_matrix, m: int):
    """Factor a symmetric positive definite m x m matrix, returning
    (solve, dense_flag, pivot_ratio).

    Dense Cholesky when the system is small (m <= 500) or the assembled
    matrix is more than half full; otherwise a sparse LU with a
    fill-reducing symmetric permutation (the matrix is SPD, so no
    numerical pivoting is needed and the factor stays sparse).
    """
    nnz = G.nnz
    fill = nnz / max(m * m, 1)
    if m <= 500 or fill > 0.5:
        Gd = G.toarray() if sp.issparse(G) else np.asarray(G)
        try:
            cf = sla.cho_factor(Gd, lower=True, check_finite=False)
        except sla.LinAlgError as e:
            raise FactorizationError(f"dense Cholesky failed: {e}") from e
        diag = np.abs(np.diag(cf[0]))
        pivot_ratio = float(diag.min() / diag.max()) if m else 1.0

        def solve(r):
            return sla.cho_solve(cf, r, check_finite=False)

        return solve, True, pivot_ratio

    try:
        lu = spla.splu(G.tocsc(), permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as e:
        raise FactorizationError(f"sparse factorization failed: {e}") from e
    diag = np.abs(lu.U.diagonal())
    if not np.all(np.isfinite(diag)) or diag.min() == 0.0:
        raise FactorizationError("sparse factorization produced a zero pivot")
    pivot_ratio = float(diag.min() / diag.max())

    def solve(r):
        return lu.solve(r)

    return solve, False, pivot_ratio


def kkt_factor(dp: DecomposedProblem, mode: str) -> KktCache:
    """Build the per-solve factorization cache.

    mode 'primal-dual' factors A D^{-1} A^T; mode 'hsde' factors
    I + A P^{-1} A^T (P = I + D/2) and precomputes the embedding vector
    zeta_hat = M^{-1} zeta / (1 + zeta^T M^{-1} zeta) with one inner
    solve.  Warns RankDeficiencyWarning when the smallest pivot falls
    below 1e-10 of the largest; raises FactorizationError on breakdown.
    """
    if mode not in ("primal-dual", "hsde"):
        raise ValueError(f"unknown mode {mode!r}")
    m = dp.m
    if mode == "primal-dual":
        if dp.free:
            raise ValueError(
                "free-cone coordinates have no overlap count; "
                "the primal and dual engines cannot handle them"
            )
        diag_inv = 1.0 / dp.D
    else:
        diag_inv = 1.0 / (1.0 + 0.5 * dp.D)

    G = (dp.A.multiply(diag_inv[np.newaxis, :]) @ dp.A.T).tocsr()
    if mode == "hsde":
        G = (G + sp.identity(m, format="csr")).tocsr()
    solve_m, dense, pivot_ratio = _factor_spd(G, m)
    if pivot_ratio < 1e-10:
        warnings.warn(
            f"smallest pivot is {pivot_ratio:.2e} of the largest; "
            "constraints look numerically dependent",
            RankDeficiencyWarning,
            stacklevel=2,
        )

    cache = KktCache(
        mode=mode,
        dp=dp,
        solve_m=solve_m,
        diag_inv=diag_inv,
        G=G,
        dense=dense,
        pivot_ratio=pivot_ratio,
    )

    if mode == "hsde":
        nx, nd, mm = dp.nr, dp.nd, m
        cache._layout = {
            "x": slice(0, nx),
            "s": slice(nx, nx + nd),
            "y": slice(nx + nd, nx + nd + mm),
            "t": slice(nx + nd + mm, nx + nd + mm + nd),
            "dim": nx + nd + mm + nd,
        }
        zeta = np.zeros(cache._layout["dim"])
        zeta[cache._layout["x"]] = dp.c
        zeta[cache._layout["y"]] = -dp.b
        minv_zeta = _apply_m_inverse(cache, zeta)
        denom = 1.0 + float(zeta @ minv_zeta)
        cache.zeta = zeta
        cache.zeta_hat = minv_zeta / denom
    return cache


def _apply_m_inverse(cache: KktCache, nu: np.ndarray) -> np.ndarray:
    """Solve M sigma = nu for the embedding's inner matrix
    M = [[I, -Ahat^T], [Ahat, I]], Ahat = [[A, 0], [H, -I]].

    Block elimination reduces M to (P + A^T A) on the x-coordinates
    alone, and the matrix inversion lemma turns that into one cached
    m x m solve:

        (P + A^T A)^{-1} = P^{-1} - P^{-1} A^T (I + A P^{-1} A^T)^{-1} A P^{-1}.
    """
    dp = cache.dp
    lay = cache._layout
    n11 = nu[lay["x"]]
    n12 = nu[lay["s"]]
    n21 = nu[lay["y"]]
    n22 = nu[lay["t"]]

    rhs = n11 + dp.A.T @ n21 + 0.5 * dp.scatter(n12 + n22)
    pr = cache.diag_inv * rhs
    s11 = pr - cache.diag_inv * (dp.A.T @ cache.solve_m(dp.A @ pr))
    s12 = 0.5 * (n12 - n22 + dp.gather(s11))
    s21 = n21 - dp.A @ s11
    s22 = n22 - dp.gather(s11) + s12

    out = np.empty_like(nu)
    out[lay["x"]] = s11
    out[lay["s"]] = s12
    out[lay["y"]] = s21
    out[lay["t"]] = s22
    return out


def kkt_solve(cache: KktCache, rhs_x: np.ndarray, rhs_y: np.ndarray):
    """Solve the saddle system [[D, A^T], [A, 0]] [x; y] = [rhs_x; rhs_y].

    Block elimination: y from (A D^{-1} A^T) y = A D^{-1} rhs_x - rhs_y,
    then x = D^{-1} (rhs_x - A^T y).  Requires a primal-dual cache.
    """
    if cache.mode != "primal-dual":
        raise ValueError("kkt_solve needs a cache built in primal-dual mode")
    dp = cache.dp
    y = cache.solve_m(dp.A @ (cache.diag_inv * rhs_x) - rhs_y)
    x = cache.diag_inv * (rhs_x - dp.A.T @ y)
    return x, y


def hsde_affine(cache: KktCache, w: np.ndarray) -> np.ndarray:
    """Solve (I + Q) u_hat = w for the homogeneous embedding.

    w stacks (omega_1, omega_2) where omega_1 covers the (x, s, y, t)
    coordinates and omega_2 is the scalar tau slot.  The outer 2x2
    elimination gives

        u_hat_1 = sigma - zeta_hat (zeta^T sigma),
        sigma   = M^{-1} (omega_1 - omega_2 zeta),
        u_hat_2 = omega_2 + zeta^T u_hat_1,

    with zeta_hat cached at factor time; M^{-1} is _apply_m_inverse.
    """
    if cache.mode != "hsde":
        raise ValueError("hsde_affine needs a cache built in hsde mode")
    dim = cache._layout["dim"]
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (dim + 1,):
        raise ValueError(f"w has shape {w.shape}, expected ({dim + 1},)")
    omega1 = w[:-1]
    omega2 = w[-1]
    sigma = _apply_m_inverse(cache, omega1 - omega2 * cache.zeta)
    u1 = sigma - cache.zeta_hat * float(cache.zeta @ sigma)
    u2 = omega2 + float(cache.zeta @ u1)
    out = np.empty_like(w)
    out[:-1] = u1
    out[-1] = u2
    return out
