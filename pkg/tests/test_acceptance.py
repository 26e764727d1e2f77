"""Acceptance gates.  One test per criterion; each prints a single
PASS/FAIL line with the measured numbers.

Criteria 1 and 2 need SDPLIB instances, which are not redistributed
with this package.  Point SDPLIB_DIR at a checkout (or drop .dat-s
files into data/sdplib/) to arm them; without the files they fail with
instructions rather than silently skipping, since they gate claimed
behavior.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest

from chordalsdp import (
    BlockArrowSpec,
    SolverOptions,
    SparsityPattern,
    decompose,
    flops_affine,
    gen_block_arrow,
    gen_random_chordal,
    hsde_affine,
    is_chordal,
    kkt_factor,
    kkt_solve,
    maximal_cliques,
    psd_complete,
    read_sdpa,
    rescale,
    smat,
    solve,
    solve_hsde,
    svec,
    write_sdpa,
)
from chordalsdp.pattern import aggregate_pattern
from oracles import (
    bron_kerbosch,
    hsde_matrix_ref,
    kkt_solve_ref,
    pattern_vec_ref,
    random_chordal_graph,
    random_chordal_problem,
    selector_dense_ref,
)

_DATA_DIR = Path(__file__).resolve().parent.parent / "data" / "sdplib"


def _report(num, ok, detail):
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num}: {detail}"


def _sdplib(name):
    root = Path(os.environ.get("SDPLIB_DIR", _DATA_DIR))
    path = root / f"{name}.dat-s"
    if not path.exists():
        return None
    return path


def _missing(names):
    root = Path(os.environ.get("SDPLIB_DIR", _DATA_DIR))
    return (
        f"missing SDPLIB instance(s) {', '.join(n + '.dat-s' for n in names)} "
        f"under {root}. This sandbox has no network access and ships no "
        f"SDPLIB copy; fetch SDPLIB 1.2 (github.com/vsdp/SDPLIB, Borchers "
        f"2000) and set SDPLIB_DIR or populate data/sdplib/ to arm this gate."
    )


def _generated_set():
    problems = [
        gen_block_arrow(BlockArrowSpec(l=3, d=2, h=2, m=8, seed=0)),
        gen_block_arrow(BlockArrowSpec(l=4, d=3, h=2, m=10, seed=1)),
        gen_block_arrow(BlockArrowSpec(l=2, d=4, h=3, m=12, seed=2)),
        gen_random_chordal(n=8, density=0.3, m=6, seed=3),
        gen_random_chordal(n=10, density=0.25, m=8, seed=4),
        gen_random_chordal(n=12, density=0.2, m=6, seed=5),
    ]
    return problems


class TestAcceptance:
    def test_criterion_1_sdplib_objectives(self):
        targets = [
            ("theta1", 23.00, 0.01, 2000),
            ("theta2", 32.88, 0.01, 2000),
            ("maxG11", 629.2, 0.005, 2000),
        ]
        missing = [name for name, *_ in targets if _sdplib(name) is None]
        if missing:
            _report(1, False, _missing(missing))
        lines = []
        ok = True
        for name, target, rel, cap in targets:
            prob = read_sdpa(_sdplib(name))
            res = solve(prob, SolverOptions(eps_tol=1e-3, max_iter=cap))
            good = (
                res.status == "Optimal"
                and abs(res.primal_objective - target) <= rel * abs(target)
            )
            ok = ok and good
            lines.append(
                f"{name} -> {res.status} obj "
                f"{res.primal_objective if res.primal_objective is not None else 'n/a'} "
                f"(target {target} +-{rel * 100:g}%)"
            )
        _report(1, ok, "; ".join(lines))

    def test_criterion_2_infeasibility_detection(self):
        names = ["infp1", "infp2"]
        missing = [n for n in names if _sdplib(n) is None]
        if missing:
            _report(2, False, _missing(missing))
        lines = []
        ok = True
        for name in names:
            prob = read_sdpa(_sdplib(name))
            res = solve(prob, SolverOptions(eps_tol=1e-3, max_iter=2000))
            good = res.status == "PrimalInfeasible"
            ok = ok and good
            lines.append(f"{name} -> {res.status} in {res.iterations} iterations")
        _report(2, ok, "; ".join(lines))

    def test_criterion_3_residual_quality(self):
        worst = {"eps_p": 0.0, "eps_d": 0.0, "eps_g": 0.0, "eps_alpha": 0.0}
        optimal_runs = 0
        for prob in _generated_set():
            for alg in ("primal", "dual", "hsde"):
                res = solve(
                    prob, SolverOptions(eps_tol=1e-3, max_iter=2000, algorithm=alg)
                )
                if res.status != "Optimal":
                    continue
                optimal_runs += 1
                worst["eps_p"] = max(worst["eps_p"], res.eps_p)
                worst["eps_d"] = max(worst["eps_d"], res.eps_d)
                worst["eps_g"] = max(worst["eps_g"], res.eps_g)
                worst["eps_alpha"] = max(worst["eps_alpha"], res.eps_alpha)
        ok = (
            optimal_runs >= 15
            and worst["eps_p"] <= 1e-3
            and worst["eps_d"] <= 1e-3
            and worst["eps_g"] <= 1e-3
            and worst["eps_alpha"] <= 1e-2
        )
        _report(
            3,
            ok,
            f"{optimal_runs} Optimal runs; worst eps_p {worst['eps_p']:.2e}, "
            f"eps_d {worst['eps_d']:.2e}, eps_g {worst['eps_g']:.2e}, "
            f"eps_alpha {worst['eps_alpha']:.2e} (gates 1e-3 / 1e-2)",
        )

    def test_criterion_4_linear_algebra_oracles(self):
        rng = np.random.default_rng(100)
        t0 = time.monotonic()
        worst = 0.0
        for case in range(200):
            n = int(rng.integers(3, 51))
            m = int(rng.integers(1, min(n, 20) + 1))
            hsde_mode = case % 2 == 1
            free = int(rng.integers(0, 3)) if hsde_mode else 0
            nonneg = int(rng.integers(0, 3))
            prob = random_chordal_problem(
                n, m, seed=int(rng.integers(2**31)), nonneg=nonneg, free=free
            )
            dp = decompose(prob)
            A = dp.A.toarray()
            if hsde_mode:
                cache = kkt_factor(dp, "hsde")
                dim = cache._layout["dim"] + 1
                w = rng.normal(size=dim)
                got = hsde_affine(cache, w)
                H = selector_dense_ref(dp)
                Q = hsde_matrix_ref(A, H, dp.b, dp.c)
                want = np.linalg.solve(np.eye(dim) + Q, w)
            else:
                cache = kkt_factor(dp, "primal-dual")
                rhs_x = rng.normal(size=dp.nr)
                rhs_y = rng.normal(size=dp.m)
                gx, gy = kkt_solve(cache, rhs_x, rhs_y)
                got = np.concatenate([gx, gy])
                wx, wy = kkt_solve_ref(A, dp.D, rhs_x, rhs_y)
                want = np.concatenate([wx, wy])
            rel = np.linalg.norm(got - want) / (1.0 + np.linalg.norm(want))
            worst = max(worst, rel)
        elapsed = time.monotonic() - t0
        ok = worst <= 1e-9 and elapsed < 10.0
        _report(
            4,
            ok,
            f"200 instances (N<=50, m<=20): worst relative error {worst:.2e} "
            f"(gate 1e-9), runtime {elapsed:.1f}s (gate 10s)",
        )

    def test_criterion_5_decomposition_properties(self):
        rng = np.random.default_rng(200)
        worst_t1 = 0.0
        worst_t2 = 0.0
        for _ in range(1000):
            n = int(rng.integers(2, 41))
            dec = maximal_cliques(
                SparsityPattern.from_edges(n, random_chordal_graph(n, rng))
            )
            # completable side: restrict a dense psd matrix, blocks stay psd
            G = rng.normal(size=(n, n))
            Y = G @ G.T
            x = pattern_vec_ref(Y, dec.entries)
            for sel in dec.entry_selectors:
                w = np.linalg.eigvalsh(smat(x[sel]))
                worst_t1 = max(worst_t1, -float(w[0]))
            # decomposable side: scattering psd blocks keeps the sum psd
            acc = np.zeros(dec.reduced_dim)
            for sel in dec.entry_selectors:
                k = int(round((np.sqrt(8 * len(sel) + 1) - 1) / 2))
                B = rng.normal(size=(k, k))
                np.add.at(acc, sel, svec(B @ B.T))
            M = np.zeros((n, n))
            for val, (i, j) in zip(acc, dec.entries):
                if i == j:
                    M[i - 1, j - 1] = val
                else:
                    M[i - 1, j - 1] = M[j - 1, i - 1] = val / np.sqrt(2.0)
            worst_t2 = max(worst_t2, -float(np.linalg.eigvalsh(M)[0]))

        bk_checked = 0
        bk_ok = True
        for _ in range(1500):
            n = int(rng.integers(1, 13))
            edges = random_chordal_graph(n, rng)
            g = SparsityPattern.from_edges(n, edges)
            if not is_chordal(g):
                continue
            bk_checked += 1
            dec = maximal_cliques(g)
            mine = {tuple(sorted(c)) for c in dec.cliques}
            brute = {tuple(sorted(c)) for c in bron_kerbosch(n, g.edges)}
            bk_ok = bk_ok and mine == brute
        ok = worst_t1 <= 1e-10 and worst_t2 <= 1e-10 and bk_ok and bk_checked >= 1000
        _report(
            5,
            ok,
            f"1000 patterns (n<=40): completable-side worst eig deficit "
            f"{worst_t1:.1e}, decomposable-side {worst_t2:.1e} (gates 1e-10); "
            f"clique sets match brute force on {bk_checked} chordal graphs "
            f"(n<=12): {bk_ok}",
        )

    def test_criterion_6_flop_formulas(self):
        rng = np.random.default_rng(300)
        exact = True
        for _ in range(100):
            n = int(rng.integers(1, 200))
            m = int(rng.integers(1, 500))
            p = int(rng.integers(1, 60))
            nd = int(rng.integers(1, 4 * n * n + 2))
            want_pd = (4 * m + p + 3) * n * n + 2 * m * m + 2 * nd
            want_h = (8 * m + 2 * p + 11) * n * n + 2 * m * m + 7 * m + 21 * nd - 1
            exact = exact and flops_affine(n, m, p, nd, "primal-dual") == want_pd
            exact = exact and flops_affine(n, m, p, nd, "hsde") == want_h

        # ratio band on realizable decomposition shapes with m <= n^2/10;
        # nd here is the stacked squared clique sizes the formulas count
        ratios = []
        shapes = [
            gen_block_arrow(BlockArrowSpec(l=5, d=4, h=3, m=20, seed=0)),
            gen_block_arrow(BlockArrowSpec(l=10, d=5, h=5, m=40, seed=1)),
            gen_block_arrow(BlockArrowSpec(l=20, d=6, h=8, m=120, seed=2)),
            gen_block_arrow(BlockArrowSpec(l=8, d=10, h=6, m=200, seed=3)),
            gen_random_chordal(n=20, density=0.2, m=25, seed=4),
            gen_random_chordal(n=25, density=0.25, m=40, seed=5),
            gen_random_chordal(n=30, density=0.15, m=60, seed=6),
        ]
        in_band = True
        for prob in shapes:
            dp = decompose(prob)
            n = prob.cone_dims.psd[0]
            nd_sq = sum(len(c) ** 2 for d in dp.decomps for c in d.cliques)
            m = dp.m
            assert m <= n * n / 10
            r = flops_affine(n, m, dp.p, nd_sq, "hsde") / flops_affine(
                n, m, dp.p, nd_sq, "primal-dual"
            )
            ratios.append(round(r, 3))
            in_band = in_band and 1.5 <= r <= 2.5
        ok = exact and in_band
        _report(
            6,
            ok,
            f"closed forms exact on 100 tuples: {exact}; hsde/primal-dual "
            f"ratios {ratios} all within [1.5, 2.5]: {in_band}",
        )

    def test_criterion_7_linear_scaling_in_clique_count(self):
        from chordalsdp.bench import linear_fit, time_per_iteration

        t0 = time.monotonic()
        ls = [20, 40, 80, 160]
        per_iter = []
        for l in ls:
            prob = gen_block_arrow(BlockArrowSpec(l=l, d=10, h=20, m=200, seed=0))
            _, t = time_per_iteration(prob, "hsde", iters=100)
            per_iter.append(t)
        slope, _, r2 = linear_fit(ls, per_iter)
        elapsed = time.monotonic() - t0
        ok = r2 >= 0.9 and slope > 0 and elapsed <= 600
        _report(
            7,
            ok,
            f"time/iter over l={ls}: {[f'{t * 1e3:.2f}ms' for t in per_iter]}, "
            f"linear fit R^2 {r2:.3f} (gate 0.9), total {elapsed:.0f}s (gate 600s)",
        )

    def test_criterion_8_embedding_cone_invariants(self):
        violations = []

        def make_cb(dps, lay, tally):
            sl_x, sl_s, sl_y, sl_t = lay["x"], lay["s"], lay["y"], lay["t"]

            def cb(state):
                u, v = state.u, state.v
                tally[0] += 1
                if u[-1] < 0 or v[-1] < 0:
                    violations.append("negative tau/kappa")
                if np.any(v[sl_x] != 0) or np.any(v[sl_y] != 0) or np.any(v[sl_t] != 0):
                    violations.append("nonzero dual free slot")
                for blk in dps.sblocks:
                    seg = u[sl_s][blk.start : blk.start + blk.length]
                    if blk.kind == "psd":
                        if np.linalg.eigvalsh(smat(seg))[0] < -1e-9:
                            violations.append("u clique block not psd")
                    elif seg.min() < 0:
                        violations.append("u nonneg block negative")
                gap = abs(float(u @ v))
                if gap > 1e-8 * (1 + np.linalg.norm(u) * np.linalg.norm(v)):
                    violations.append(f"complementarity gap {gap:.2e}")

            return cb

        total_iters = 0
        for prob in _generated_set():
            dp = decompose(prob)
            dps, _ = rescale(dp)
            lay = kkt_factor(dps, "hsde")._layout
            tally = [0]
            solve_hsde(
                dp,
                SolverOptions(
                    algorithm="hsde",
                    eps_tol=1e-4,
                    max_iter=500,
                    iter_callback=make_cb(dps, lay, tally),
                ),
            )
            total_iters += tally[0]
        ok = not violations and total_iters >= 100
        _report(
            8,
            ok,
            f"u in K, v in K*, |<u,v>| <= 1e-8(1+|u||v|) held for every one of "
            f"{total_iters} iterations across {len(_generated_set())} runs"
            + ("" if not violations else f"; violations: {violations[:3]}"),
        )

    def test_criterion_9_round_trips(self, tmp_path):
        rng = np.random.default_rng(400)
        # SDPA write/read identity on internal data
        sdpa_ok = True
        for i, prob in enumerate(_generated_set()[:3]):
            path = tmp_path / f"rt{i}.dat-s"
            write_sdpa(prob, path)
            back = read_sdpa(path)
            sdpa_ok = sdpa_ok and back.cone_dims == prob.cone_dims
            sdpa_ok = sdpa_ok and np.allclose(
                back.A.toarray(), prob.A.toarray(), atol=1e-12
            )
            sdpa_ok = sdpa_ok and np.allclose(back.b, prob.b, atol=1e-12)
            sdpa_ok = sdpa_ok and np.allclose(back.c, prob.c, atol=1e-12)

        # scale/unscale identity on the data to 1e-14
        scale_worst = 0.0
        for seed in range(5):
            prob = random_chordal_problem(10, 5, seed=seed, nonneg=2)
            dp = decompose(prob)
            dps, rec = rescale(dp)
            A_back = dps.A.toarray() / np.outer(rec.e, rec.d)
            scale_worst = max(
                scale_worst, float(np.abs(A_back - dp.A.toarray()).max())
            )
            b_back = dps.b / (rec.rho * rec.e)
            c_back = dps.c / (rec.sigma * rec.d)
            scale_worst = max(scale_worst, float(np.abs(b_back - dp.b).max()))
            scale_worst = max(scale_worst, float(np.abs(c_back - dp.c).max()))
            x = rng.normal(size=dp.nr)
            x_rt = rec.unscale_x((rec.rho / rec.d) * x)
            scale_worst = max(scale_worst, float(np.abs(x_rt - x).max()))

        # project -> complete -> project to 1e-10
        comp_worst = 0.0
        for _ in range(50):
            n = int(rng.integers(3, 20))
            dec = maximal_cliques(
                SparsityPattern.from_edges(n, random_chordal_graph(n, rng))
            )
            G = rng.normal(size=(n, n))
            x = pattern_vec_ref(G @ G.T, dec.entries)
            M = psd_complete(dec, x)
            comp_worst = max(
                comp_worst,
                float(np.abs(pattern_vec_ref(M, dec.entries) - x).max()),
            )
        ok = sdpa_ok and scale_worst <= 1e-14 and comp_worst <= 1e-10
        _report(
            9,
            ok,
            f"SDPA write/read identity: {sdpa_ok}; scale/unscale max deviation "
            f"{scale_worst:.1e} (gate 1e-14); completion round trip max "
            f"deviation {comp_worst:.1e} (gate 1e-10)",
        )
