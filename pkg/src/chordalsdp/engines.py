"""The three ADMM engines plus penalty adaptation, rescaling, and flop models.

All engines share the same decomposed structure and the same cached
m x m factorization (see kernels).  The primal engine iterates on the
clique-consensus form of the minimization, the dual engine on the
clique-decomposed form of the maximization, and the hsde engine on the
homogeneous embedding of the pair, which is the only one able to detect
infeasibility.

Reported residuals always refer to the ORIGINAL problem: candidates are
mapped out of the rescaled coordinates before eps_p, eps_d, eps_g are
evaluated, so a run with rescaling on and one with it off gate on the
same quantities.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .decomposition import DecomposedProblem, decompose
from .kernels import hsde_affine, kkt_factor, kkt_solve, project_blocks

_GUARD = 1e-10


# ---------------------------------------------------------------------------
# Options / state / result types


@dataclass
class SolverOptions:
    """Knobs shared by all engines.

    eps_tol: termination tolerance on the residual set
    max_iter: iteration cap
    rho: initial penalty
    adaptive_rho, mu, nu: penalty update rule (see adapt_rho)
    rescale: equilibrate the data before iterating
    algorithm: primal | dual | hsde
    parallel_projections: fan the clique projections out to threads
    verbose: print progress lines
    collect_trace: record per-iteration residual rows (costs two extra
        matrix-vector products per iteration in the primal/dual engines)
    iter_callback: diagnostic hook called with the SolverState after
        every iteration
    """

    eps_tol: float = 1e-3
    max_iter: int = 2000
    rho: float = 1.0
    adaptive_rho: bool = True
    mu: float = 2.0
    nu: float = 10.0
    rescale: bool = True
    algorithm: str = "hsde"
    parallel_projections: bool = False
    verbose: bool = False
    collect_trace: bool = False
    iter_callback: object = None

    def __post_init__(self):
        if not self.eps_tol > 0:
            raise ValueError("eps_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.mu < 1 or self.nu < 1:
            raise ValueError("mu and nu must be at least 1")
        if self.algorithm not in ("primal", "dual", "hsde"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")

    def as_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "eps_tol": self.eps_tol,
            "max_iter": self.max_iter,
            "rho": self.rho,
            "adaptive_rho": self.adaptive_rho,
            "mu": self.mu,
            "nu": self.nu,
            "rescale": self.rescale,
            "parallel_projections": self.parallel_projections,
        }


@dataclass(eq=False)
class SolverState:
    """Mutable per-solve state, exposed to iter_callback for diagnostics.

    Vector fields are engine specific: the primal engine fills x
    (reduced), s (stacked clique blocks), lam, y; the dual engine fills
    z, v, lam, y and x (the saddle-system multiplier); the hsde engine
    fills u, v, u_hat and last_w with the embedding layout of its cache.
    """

    algorithm: str
    dp: DecomposedProblem
    scaling: "ScalingRecord"
    rho: float
    mu: float
    nu: float
    iteration: int = 0
    x: np.ndarray = None
    s: np.ndarray = None
    z: np.ndarray = None
    v: np.ndarray = None
    lam: np.ndarray = None
    y: np.ndarray = None
    u: np.ndarray = None
    u_hat: np.ndarray = None
    last_w: np.ndarray = None
    eps_c: float = np.inf
    eps_lam: float = np.inf
    eps_p: float = np.inf
    eps_d: float = np.inf
    eps_g: float = np.inf


@dataclass(eq=False)
class SolveResult:
    """Outcome of one solve.

    Objectives are reported with the problem's obj_sign applied (SDPA
    files maximize; generated problems minimize) and are None when the
    run ended infeasible.  x, y, z are candidates in the original
    problem's reduced coordinates (dp gives the layout); certificate
    carries the improving ray when infeasibility was detected.
    """

    status: str
    primal_objective: object
    dual_objective: object
    eps_p: float
    eps_d: float
    eps_g: float
    eps_c: float
    eps_alpha: float
    iterations: int
    timings: dict
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    certificate: np.ndarray
    clique_stats: dict
    options: SolverOptions
    dp: DecomposedProblem
    trace: list = None
    rho_final: float = None

    def options_dict(self) -> dict:
        d = self.options.as_dict()
        if self.rho_final is not None:
            d["rho_final"] = self.rho_final
        return d


# ---------------------------------------------------------------------------
# Rescaling


@dataclass(frozen=True, eq=False)
class ScalingRecord:
    """Diagonal equilibration of the decomposed data.

    The scaled problem is (E A D, rho * E b, sigma * D c) with D one
    scalar per PSD block on that block's reduced coordinates (uniform
    block scaling keeps every clique cone invariant) and per-coordinate
    scalars on free/nonnegative columns.  Because the consensus rows tie
    s-blocks to x-coordinates through pure index maps, block-uniform
    column scaling leaves those rows untouched and the engines run
    verbatim on the scaled data.  Solutions map back through

        x = D x_bar / rho,   y = E y_bar / sigma,   z = D^{-1} z_bar / sigma.
    """

    d: np.ndarray
    e: np.ndarray
    sigma: float
    rho: float

    @classmethod
    def identity(cls, dp: DecomposedProblem) -> "ScalingRecord":
        return cls(np.ones(dp.nr), np.ones(dp.m), 1.0, 1.0)

    def unscale_x(self, x: np.ndarray) -> np.ndarray:
        return self.d * x / self.rho

    def unscale_y(self, y: np.ndarray) -> np.ndarray:
        return self.e * y / self.sigma

    def unscale_z(self, z: np.ndarray) -> np.ndarray:
        return z / (self.d * self.sigma)

    def unscale_sblocks(self, dp: DecomposedProblem, s: np.ndarray) -> np.ndarray:
        """Primal clique blocks scale like the coordinates they select."""
        return self.d[dp.idx_all] * s / self.rho

    def unscale_zblocks(self, dp: DecomposedProblem, z: np.ndarray) -> np.ndarray:
        """Dual clique blocks scale inversely to the primal ones."""
        return z / (self.d[dp.idx_all] * self.sigma)


def rescale(dp: DecomposedProblem):
    """Equilibrate the decomposed data; returns (scaled copy, record).

    Column scaling first (one scalar per PSD block from the mean column
    norm of A over the block, per-coordinate on free/nonnegative
    columns), then row scaling to unit row norms, then scalars that
    normalize b and c.  Zero rows/columns keep scale 1.  The aggregate
    sparsity pattern is untouched, and already-normalized data gets
    scalings close to one.
    """
    col_norm = np.sqrt(np.asarray(dp.A.multiply(dp.A).sum(axis=0)).ravel())
    d = np.ones(dp.nr)
    head = dp.free + dp.nonneg
    nz = col_norm[:head] > _GUARD
    d[:head][nz] = 1.0 / col_norm[:head][nz]
    for sl in dp.psd_slices:
        mean = float(col_norm[sl].mean()) if col_norm[sl].size else 0.0
        if mean > _GUARD:
            d[sl] = 1.0 / mean
    Ad = dp.A.multiply(d[np.newaxis, :]).tocsr()
    row_norm = np.sqrt(np.asarray(Ad.multiply(Ad).sum(axis=1)).ravel())
    e = np.where(row_norm > _GUARD, 1.0 / np.maximum(row_norm, _GUARD), 1.0)
    A_s = sp.diags(e) @ Ad
    bn = float(np.linalg.norm(e * dp.b))
    rho = 1.0 / bn if bn > _GUARD else 1.0
    cn = float(np.linalg.norm(d * dp.c))
    sigma = 1.0 / cn if cn > _GUARD else 1.0
    scaled = dp.replaced(A=A_s.tocsr(), b=rho * (e * dp.b), c=sigma * (d * dp.c))
    return scaled, ScalingRecord(d=d, e=e, sigma=sigma, rho=rho)


# ---------------------------------------------------------------------------
# Penalty adaptation


def adapt_rho(state: SolverState, residuals) -> float:
    """One step of the dynamic penalty rule.

    With (rp, rd) the engine's residual pair: rho grows by mu when rp is
    at least nu times rd, shrinks by mu when rd is at least nu times rp,
    and is unchanged otherwise (also when the two are exactly equal,
    which covers the all-zero start).  The penalty only ever multiplies
    right-hand sides, so no factorization is touched.

    The running value is kept inside [1e-10, 1e10]: under a persistent
    imbalance (degenerate or infeasible data) the bare rule compounds
    until rho underflows to an absorbing 0.0 or overflows, and both
    ends poison the engines that divide by rho.
    """
    rp, rd = residuals
    if rp == rd:
        return state.rho
    if rp >= state.nu * rd:
        state.rho = state.rho * state.mu
    elif rd >= state.nu * rp:
        state.rho = state.rho / state.mu
    state.rho = min(max(state.rho, 1e-10), 1e10)
    return state.rho


# ---------------------------------------------------------------------------
# Flop models


def flops_affine(n: int, m: int, p: int, nd: int, mode: str) -> int:
    """Flops of one affine-step solve with cached factors.

    Conventions: a product with a dense m x n matrix costs (2n - 1)m,
    applying a cached m x m factor costs 2 m^2, entry selections are
    free, and summing p scattered blocks costs (p - 1) per touched
    coordinate.  mode 'primal-dual' covers the saddle-system solve, mode
    'hsde' the full embedding step, roughly twice the work when m is
    small against n^2.
    """
    n, m, p, nd = int(n), int(m), int(p), int(nd)
    n2 = n * n
    if mode == "primal-dual":
        return (4 * m + p + 3) * n2 + 2 * m * m + 2 * nd
    if mode == "hsde":
        return (8 * m + 2 * p + 11) * n2 + 2 * m * m + 7 * m + 21 * nd - 1
    raise ValueError(f"unknown mode {mode!r}")


def flops_conic(clique_sizes) -> int:
    """Leading-order flops of the clique projections: sum of cubes of the
    clique sizes (the constant factor depends on the eigensolver)."""
    return int(sum(int(q) ** 3 for q in clique_sizes))


# ---------------------------------------------------------------------------
# Shared engine plumbing


class _Evaluator:
    """Residuals of the original problem for unscaled candidates."""

    def __init__(self, dp: DecomposedProblem):
        self.dp = dp
        self.den_b = 1.0 + float(np.linalg.norm(dp.b))
        self.den_c = 1.0 + float(np.linalg.norm(dp.c))

    def full(self, x, y, z):
        dp = self.dp
        ep = float(np.linalg.norm(dp.A @ x - dp.b)) / self.den_b
        ed = float(np.linalg.norm(dp.A.T @ y + z - dp.c)) / self.den_c
        po = float(dp.c @ x)
        do = float(dp.b @ y)
        eg = abs(po - do) / (1.0 + abs(po) + abs(do))
        return ep, ed, eg, po, do


def _alpha_violation(dp: DecomposedProblem, x: np.ndarray) -> float:
    """eps_alpha of a reduced primal candidate: the smallest shift alpha
    making every clique block of x + alpha*I PSD, normalized."""
    from .completion import block_alpha

    alpha = 0.0
    norm_sq = 0.0
    for dec, sl in zip(dp.decomps, dp.psd_slices):
        alpha = max(alpha, block_alpha(dec, x[sl]))
        norm_sq += float(x[sl] @ x[sl])
    return alpha / (1.0 + np.sqrt(norm_sq))


def _norm(a) -> float:
    return float(np.linalg.norm(a))


class _Run:
    """Bookkeeping shared by the engines: timing phases, trace rows,
    verbose printing, and result assembly."""

    def __init__(self, dp, opts, mode, algorithm):
        self.dp = dp
        self.opts = opts
        t0 = time.perf_counter()
        if opts.rescale:
            self.dps, self.rec = rescale(dp)
        else:
            self.dps, self.rec = dp, ScalingRecord.identity(dp)
        self.pool = (
            ThreadPoolExecutor(max_workers=os.cpu_count() or 1)
            if opts.parallel_projections
            else None
        )
        t1 = time.perf_counter()
        self.cache = kkt_factor(self.dps, mode)
        t2 = time.perf_counter()
        self.t_setup = t1 - t0
        self.t_factor = t2 - t1
        self.ev = _Evaluator(dp)
        self.rows = [] if opts.collect_trace else None
        self.state = SolverState(
            algorithm=algorithm,
            dp=self.dps,
            scaling=self.rec,
            rho=opts.rho,
            mu=opts.mu,
            nu=opts.nu,
        )
        self.t_loop0 = None

    def start_loop(self):
        self.t_loop0 = time.perf_counter()

    def trace(self, it, ep, ed, eg, ec):
        if self.rows is not None:
            self.rows.append(
                {
                    "iter": it,
                    "eps_p": ep,
                    "eps_d": ed,
                    "eps_g": eg,
                    "eps_c": ec,
                    "rho": self.state.rho,
                    "time_s": time.perf_counter() - self.t_loop0,
                }
            )

    def say(self, it, ep, ed, eg, ec):
        if self.opts.verbose and (it % 50 == 0 or it == 1):
            print(
                f"[{self.state.algorithm}] it {it:5d}  "
                f"eps_p {ep:9.2e}  eps_d {ed:9.2e}  "
                f"eps_g {eg:9.2e}  eps_c {ec:9.2e}  rho {self.state.rho:g}"
            )

    def callback(self):
        if self.opts.iter_callback is not None:
            self.opts.iter_callback(self.state)

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()

    def result(self, status, it, x, y, z, resid, certificate=None):
        t_complete0 = time.perf_counter()
        t_iterate = t_complete0 - self.t_loop0
        ep, ed, eg, ec = resid
        if x is not None:
            e_alpha = _alpha_violation(self.dp, x)
            po_i = float(self.dp.c @ x)
            do_i = float(self.dp.b @ y)
            sign = self.dp.base.obj_sign
            po, do = sign * po_i, sign * do_i
        else:
            e_alpha = np.inf
            po = do = None
        t_complete = time.perf_counter() - t_complete0
        timings = {
            "setup": self.t_setup,
            "factorize": self.t_factor,
            "iterate": t_iterate,
            "complete": t_complete,
        }
        timings["total"] = sum(timings.values())
        return SolveResult(
            status=status,
            primal_objective=po,
            dual_objective=do,
            eps_p=ep,
            eps_d=ed,
            eps_g=eg,
            eps_c=ec,
            eps_alpha=e_alpha,
            iterations=it,
            timings=timings,
            x=x,
            y=y,
            z=z,
            certificate=certificate,
            clique_stats=self.dp.clique_stats(),
            options=self.opts,
            dp=self.dp,
            trace=self.rows,
            rho_final=self.state.rho,
        )


# ---------------------------------------------------------------------------
# Algorithm engines


def solve_primal(dp: DecomposedProblem, opts: SolverOptions = None) -> SolveResult:
    """Consensus ADMM on the decomposed minimization.

    Per iteration: an equality-constrained quadratic step via the cached
    saddle-system solve, one PSD projection per clique, and a gradient
    multiplier update.  Terminates on max(eps_c, eps_lam) <= eps_tol of
    the iteration-native residuals, then confirms the full residual set
    of the original problem before declaring Optimal.  Assumes the
    problem is feasible; this engine cannot detect infeasibility.
    """
    opts = opts or SolverOptions()
    if dp.free:
        raise ValueError("free-cone coordinates require the hsde engine")
    run = _Run(dp, opts, "primal-dual", "primal")
    dps, rec, cache, state = run.dps, run.rec, run.cache, run.state

    x = np.zeros(dps.nr)
    s = np.zeros(dps.nd)
    lam = np.zeros(dps.nd)
    status = "MaxIterations"
    candidates = None
    resid = (np.inf, np.inf, np.inf, np.inf)
    it = 0

    run.start_loop()
    try:
        for it in range(1, opts.max_iter + 1):
            rho = state.rho
            rhs_x = dps.scatter(s + lam / rho) - dps.c / rho
            x, ykkt = kkt_solve(cache, rhs_x, dps.b)
            hx = dps.gather(x)
            s_new = project_blocks(dps, hx - lam / rho, run.pool)
            lam = lam + rho * (s_new - hx)
            eps_c_n = _norm(s_new - hx) / max(_norm(s_new), _norm(hx), _GUARD)
            eps_lam = rho * _norm(s_new - s) / max(_norm(lam), _GUARD)
            s = s_new

            state.iteration, state.eps_c, state.eps_lam = it, eps_c_n, eps_lam
            state.x, state.s, state.lam, state.y = x, s, lam, ykkt

            triggered = max(eps_c_n, eps_lam) <= opts.eps_tol
            if triggered or run.rows is not None or opts.verbose:
                xs = rec.unscale_x(x)
                ys = rec.unscale_y(-rho * ykkt)
                zs = rec.unscale_z(dps.scatter(lam))
                ep, ed, eg, _, _ = run.ev.full(xs, ys, zs)
                s_un = rec.unscale_sblocks(dps, s)
                hx_un = dp.gather(xs)
                ec = _norm(s_un - hx_un) / max(_norm(s_un), _norm(hx_un), _GUARD)
                state.eps_p, state.eps_d, state.eps_g = ep, ed, eg
                run.trace(it, ep, ed, eg, ec)
                run.say(it, ep, ed, eg, ec)
                if triggered and max(ep, ed, eg, ec) <= opts.eps_tol:
                    status = "Optimal"
                    candidates = (xs, ys, zs)
                    resid = (ep, ed, eg, ec)
                    run.callback()
                    break

            if opts.adaptive_rho:
                adapt_rho(state, (eps_c_n, eps_lam))
            run.callback()
    finally:
        run.close()

    if candidates is None:
        rho = state.rho
        xs = rec.unscale_x(x)
        ys = rec.unscale_y(-rho * ykkt)
        zs = rec.unscale_z(dps.scatter(lam))
        ep, ed, eg, _, _ = run.ev.full(xs, ys, zs)
        s_un = rec.unscale_sblocks(dps, s)
        hx_un = dp.gather(xs)
        ec = _norm(s_un - hx_un) / max(_norm(s_un), _norm(hx_un), _GUARD)
        candidates = (xs, ys, zs)
        resid = (ep, ed, eg, ec)
    return run.result(status, it, *candidates, resid)


def solve_dual(dp: DecomposedProblem, opts: SolverOptions = None) -> SolveResult:
    """Consensus ADMM on the decomposed maximization.

    Per iteration: one PSD projection per clique first, then the cached
    saddle-system solve producing the new multipliers and local copies,
    then a multiplier update that is a pure scaling of the selected
    coordinates.  The returned primal candidate is the (rescaled) saddle
    multiplier, which satisfies the affine constraints exactly.  Cannot
    detect infeasibility.
    """
    opts = opts or SolverOptions()
    if dp.free:
        raise ValueError("free-cone coordinates require the hsde engine")
    run = _Run(dp, opts, "primal-dual", "dual")
    dps, rec, cache, state = run.dps, run.rec, run.cache, run.state

    z = np.zeros(dps.nd)
    vv = np.zeros(dps.nd)
    lam = np.zeros(dps.nd)
    status = "MaxIterations"
    candidates = None
    resid = (np.inf, np.inf, np.inf, np.inf)
    it = 0
    xkkt = np.zeros(dps.nr)
    y = np.zeros(dps.m)

    run.start_loop()
    try:
        for it in range(1, opts.max_iter + 1):
            rho = state.rho
            z_new = project_blocks(dps, vv - lam / rho, run.pool)
            rhs_x = dps.c - dps.scatter(z_new + lam / rho)
            xkkt, y = kkt_solve(cache, rhs_x, -dps.b / rho)
            hx = dps.gather(xkkt)
            vv = z_new + lam / rho + hx
            lam = -rho * hx
            eps_c_n = _norm(z_new - vv) / max(_norm(z_new), _norm(vv), _GUARD)
            eps_lam = rho * _norm(z_new - z) / max(_norm(lam), _GUARD)
            z = z_new

            state.iteration, state.eps_c, state.eps_lam = it, eps_c_n, eps_lam
            state.z, state.v, state.lam, state.y, state.x = z, vv, lam, y, xkkt

            triggered = max(eps_c_n, eps_lam) <= opts.eps_tol
            if triggered or run.rows is not None or opts.verbose:
                xs = rec.unscale_x(-rho * xkkt)
                ys = rec.unscale_y(y)
                zs = rec.unscale_z(dps.scatter(z))
                ep, ed, eg, _, _ = run.ev.full(xs, ys, zs)
                z_un = rec.unscale_zblocks(dps, z)
                v_un = rec.unscale_zblocks(dps, vv)
                ec = _norm(z_un - v_un) / max(_norm(z_un), _norm(v_un), _GUARD)
                state.eps_p, state.eps_d, state.eps_g = ep, ed, eg
                run.trace(it, ep, ed, eg, ec)
                run.say(it, ep, ed, eg, ec)
                if triggered and max(ep, ed, eg, ec) <= opts.eps_tol:
                    status = "Optimal"
                    candidates = (xs, ys, zs)
                    resid = (ep, ed, eg, ec)
                    run.callback()
                    break

            if opts.adaptive_rho:
                adapt_rho(state, (eps_c_n, eps_lam))
            run.callback()
    finally:
        run.close()

    if candidates is None:
        rho = state.rho
        xs = rec.unscale_x(-rho * xkkt)
        ys = rec.unscale_y(y)
        zs = rec.unscale_z(dps.scatter(z))
        ep, ed, eg, _, _ = run.ev.full(xs, ys, zs)
        z_un = rec.unscale_zblocks(dps, z)
        v_un = rec.unscale_zblocks(dps, vv)
        ec = _norm(z_un - v_un) / max(_norm(z_un), _norm(v_un), _GUARD)
        candidates = (xs, ys, zs)
        resid = (ep, ed, eg, ec)
    return run.result(status, it, *candidates, resid)


def solve_hsde(dp: DecomposedProblem, opts: SolverOptions = None) -> SolveResult:
    """ADMM on the homogeneous self-dual embedding of the pair.

    Each iteration solves the cached affine step (I + Q) u_hat = u + v,
    projects onto the embedding cone (only the clique blocks and tau are
    constrained), and updates v by the difference.  A positive tau slot
    encodes a candidate solution; a vanishing tau with the certificate
    test passing encodes primal or dual infeasibility (primal takes
    precedence when both trigger).

    The embedding is positively homogeneous, so the ADMM penalty cannot
    change the recovered candidates; adapt_rho is still applied and the
    value recorded for diagnostics.
    """
    opts = opts or SolverOptions()
    run = _Run(dp, opts, "hsde", "hsde")
    dps, rec, cache, state = run.dps, run.rec, run.cache, run.state
    lay = cache._layout
    sl_x, sl_s, sl_y, sl_t = lay["x"], lay["s"], lay["y"], lay["t"]
    dim = lay["dim"]

    u = np.zeros(dim + 1)
    u[-1] = 1.0
    v = np.zeros(dim + 1)
    v[-1] = 1.0
    status = "MaxIterations"
    candidates = (None, None, None)
    certificate = None
    resid = (np.inf, np.inf, np.inf, np.inf)
    it = 0
    have_full = False

    nb = max(_norm(dp.b), _GUARD)
    nc = max(_norm(dp.c), _GUARD)

    run.start_loop()
    try:
        for it in range(1, opts.max_iter + 1):
            w = u + v
            u_hat = hsde_affine(cache, w)
            pa = u_hat - v
            u_new = pa.copy()
            u_new[sl_s] = project_blocks(dps, pa[sl_s], run.pool)
            u_new[-1] = max(pa[-1], 0.0)
            v = v - u_hat + u_new
            u = u_new

            state.iteration = it
            state.u, state.v, state.u_hat, state.last_w = u, v, u_hat, w

            tau = u[-1]
            u_norm = _norm(u)
            ep = ed = eg = ec = np.inf
            if tau > 1e-12 * u_norm:
                xs = rec.unscale_x(u[sl_x] / tau)
                ys = rec.unscale_y(u[sl_y] / tau)
                zs = rec.unscale_z(dps.scatter(v[sl_s]) / tau)
                ep, ed, eg, _, _ = run.ev.full(xs, ys, zs)
                # consensus on both sides of the embedding, measured on the
                # candidate variables: dividing numerator and denominator by
                # tau gives a "1 + norm" floor (the tau term below), so a
                # vanishing dual variable cannot inflate rounding noise.
                # The ratios stay invariant under joint scaling of (u, v).
                hux = dps.gather(u[sl_x])
                ec1 = _norm(u[sl_s] - hux) / max(
                    tau + max(_norm(u[sl_s]), _norm(hux)), _GUARD
                )
                ec2 = _norm(v[sl_s] - u[sl_t]) / max(
                    tau + max(_norm(v[sl_s]), _norm(u[sl_t])), _GUARD
                )
                ec = max(ec1, ec2)
                state.eps_p, state.eps_d, state.eps_g, state.eps_c = ep, ed, eg, ec
                have_full = True
                candidates = (xs, ys, zs)
                resid = (ep, ed, eg, ec)
                run.trace(it, ep, ed, eg, ec)
                run.say(it, ep, ed, eg, ec)
                if max(ep, ed, eg, ec) <= opts.eps_tol:
                    status = "Optimal"
                    run.callback()
                    break
                if opts.adaptive_rho:
                    adapt_rho(state, (ep, ed))
            else:
                # tau has collapsed: test the improving-ray certificates
                xq = rec.unscale_x(u[sl_x])
                yq = rec.unscale_y(u[sl_y])
                zq = rec.unscale_z(dps.scatter(v[sl_s]))
                bty = float(dp.b @ yq)
                ctx = float(dp.c @ xq)
                ep = _norm(dp.A @ xq) / run.ev.den_b
                ed = _norm(dp.A.T @ yq + zq) / run.ev.den_c
                eg = abs(ctx + bty) / (1.0 + abs(ctx) + abs(bty))
                ec = 0.0
                run.trace(it, ep, ed, eg, ec)
                run.say(it, ep, ed, eg, ec)
                if bty > 0 and _norm(dp.A.T @ yq + zq) <= (bty / nb) * opts.eps_tol:
                    status = "PrimalInfeasible"
                    certificate = yq / bty
                    candidates = (None, None, None)
                    resid = (np.inf, ed, np.inf, np.inf)
                    run.callback()
                    break
                if ctx < 0 and _norm(dp.A @ xq) <= (-ctx / nc) * opts.eps_tol:
                    status = "DualInfeasible"
                    certificate = -xq / ctx
                    candidates = (None, None, None)
                    resid = (ep, np.inf, np.inf, np.inf)
                    run.callback()
                    break
            run.callback()
    finally:
        run.close()

    if status == "MaxIterations" and not have_full:
        candidates = (None, None, None)
    return run.result(status, it, *candidates, resid, certificate=certificate)


_ENGINES = {"primal": solve_primal, "dual": solve_dual, "hsde": solve_hsde}


def solve(problem, opts: SolverOptions = None) -> SolveResult:
    """Decompose a conic problem and run the selected engine on it.

    Convenience wrapper: decomposition time is folded into the setup
    phase of the returned timings.
    """
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    dp = decompose(problem)
    t_pre = time.perf_counter() - t0
    res = _ENGINES[opts.algorithm](dp, opts)
    res.timings["setup"] += t_pre
    res.timings["total"] += t_pre
    return res
