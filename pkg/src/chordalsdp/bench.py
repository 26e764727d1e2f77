"""Benchmark sweeps: timing runs over generated problem families.

A sweep is described by a small TOML or JSON config:

    name = "arrow scaling"
    kind = "block-arrow"            # or "random-chordal"
    algorithms = ["primal", "hsde"] # default: all three
    iters = 100                     # timed iterations per case
    seed = 0
    [params]
    l = [20, 40, 80, 160]           # list values are swept
    d = 10
    h = 20
    m = 200

Each case is timed with the tolerance pushed far below reach so exactly
`iters` iterations run; the cost per iteration is then the iterate
phase divided by the count.  Output: one CSV with every case plus PNG
figures (per-iteration cost with a linear fit, and phase times) in the
output directory.
"""

from __future__ import annotations

import csv
import itertools
import json
from pathlib import Path

import numpy as np

from .engines import SolverOptions, flops_affine, flops_conic, solve
from .problem_io import BlockArrowSpec, gen_block_arrow, gen_random_chordal

_PARAM_ORDER = {
    "block-arrow": ("l", "d", "h", "m"),
    "random-chordal": ("n", "density", "m"),
}

_ALGORITHMS = ("primal", "dual", "hsde")


def load_config(path) -> dict:
    """Read a sweep config; .toml via tomllib/tomli, anything else JSON."""
    path = Path(path)
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path) as fh:
        return json.load(fh)


def expand_cases(cfg: dict):
    """Cartesian product of the list-valued params.

    Returns (cases, sweep_key): each case is a plain param dict, and
    sweep_key is the first swept parameter (the x-axis of the figures),
    or None when nothing is swept.
    """
    kind = cfg.get("kind")
    if kind not in _PARAM_ORDER:
        raise ValueError(f"unknown problem kind {kind!r}")
    order = _PARAM_ORDER[kind]
    params = cfg.get("params")
    if not isinstance(params, dict):
        raise ValueError("config needs a [params] table")
    missing = [k for k in order if k not in params]
    if missing:
        raise ValueError(f"missing params for {kind}: {', '.join(missing)}")
    swept = [k for k in order if isinstance(params[k], (list, tuple))]
    axes = [params[k] if k in swept else [params[k]] for k in order]
    cases = [dict(zip(order, combo)) for combo in itertools.product(*axes)]
    return cases, (swept[0] if swept else None)


def _make_problem(kind: str, case: dict, seed: int):
    if kind == "block-arrow":
        return gen_block_arrow(
            BlockArrowSpec(
                l=int(case["l"]),
                d=int(case["d"]),
                h=int(case["h"]),
                m=int(case["m"]),
                seed=seed,
            )
        )
    return gen_random_chordal(
        n=int(case["n"]),
        density=float(case["density"]),
        m=int(case["m"]),
        seed=seed,
    )


def time_per_iteration(problem, algorithm: str, iters: int = 100):
    """Run exactly `iters` iterations and return (result, seconds/iter)."""
    opts = SolverOptions(
        eps_tol=1e-14, max_iter=iters, algorithm=algorithm, verbose=False
    )
    result = solve(problem, opts)
    return result, result.timings["iterate"] / max(result.iterations, 1)


def linear_fit(xs, ys):
    """Least-squares line through (xs, ys): (slope, intercept, r_squared)."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size < 2:
        return 0.0, float(ys.mean()) if ys.size else 0.0, float("nan")
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


def run_cases(cfg: dict):
    """Execute the sweep; returns (rows, sweep_key).  No files written."""
    cases, sweep_key = expand_cases(cfg)
    kind = cfg["kind"]
    seed = int(cfg.get("seed", 0))
    iters = int(cfg.get("iters", 100))
    algorithms = tuple(cfg.get("algorithms", _ALGORITHMS))
    for alg in algorithms:
        if alg not in _ALGORITHMS:
            raise ValueError(f"unknown algorithm {alg!r}")

    rows = []
    for case in cases:
        problem = _make_problem(kind, case, seed)
        for alg in algorithms:
            result, per_iter = time_per_iteration(problem, alg, iters)
            dp = result.dp
            stats = result.clique_stats
            side = dp.base.cone_dims.psd[0] if dp.base.cone_dims.psd else 0
            mode = "hsde" if alg == "hsde" else "primal-dual"
            clique_sizes = [
                len(c) for dec in dp.decomps for c in dec.cliques
            ]
            row = {
                "kind": kind,
                "algorithm": alg,
                **{k: case[k] for k in case},
                "side": side,
                "m_rows": dp.m,
                "cliques": stats["count"],
                "max_clique": stats["max_size"],
                "nd": stats["nd"],
                "iterations": result.iterations,
                "status": result.status,
                "t_setup": result.timings["setup"],
                "t_factorize": result.timings["factorize"],
                "t_iterate": result.timings["iterate"],
                "t_per_iter": per_iter,
                "flops_affine": flops_affine(side, dp.m, dp.p, dp.nd, mode),
                "flops_conic": flops_conic(clique_sizes),
            }
            rows.append(row)
    return rows, sweep_key


def _figure_per_iter(rows, sweep_key, algorithms, path: Path, title: str):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for alg in algorithms:
        pts = [(r[sweep_key], r["t_per_iter"]) for r in rows if r["algorithm"] == alg]
        pts.sort()
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        slope, intercept, r2 = linear_fit(xs, ys)
        line = ax.plot(xs, ys, "o", label=f"{alg} (R^2={r2:.3f})")
        if len(xs) >= 2:
            grid = np.linspace(min(xs), max(xs), 50)
            ax.plot(grid, slope * grid + intercept, "--", color=line[0].get_color(), alpha=0.6)
    ax.set_xlabel(sweep_key)
    ax.set_ylabel("seconds per iteration")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _figure_phases(rows, sweep_key, algorithms, path: Path, title: str):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for alg in algorithms:
        sub = sorted(
            (r for r in rows if r["algorithm"] == alg), key=lambda r: r[sweep_key]
        )
        xs = [r[sweep_key] for r in sub]
        ax.plot(xs, [r["t_setup"] for r in sub], "o-", label=f"{alg} setup")
        ax.plot(xs, [r["t_factorize"] for r in sub], "s--", label=f"{alg} factorize")
        ax.plot(xs, [r["t_iterate"] for r in sub], "^:", label=f"{alg} iterate")
    ax.set_xlabel(sweep_key)
    ax.set_ylabel("seconds")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def run_bench(config_path, out_dir) -> list:
    """Load a config, run the sweep, write CSV + figures; returns paths."""
    cfg = load_config(config_path)
    rows, sweep_key = run_cases(cfg)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = cfg.get("name", Path(config_path).stem)

    csv_path = out_dir / "sweep.csv"
    fieldnames = list(rows[0].keys())
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    written = [csv_path]

    if sweep_key is not None:
        algorithms = tuple(cfg.get("algorithms", _ALGORITHMS))
        p1 = out_dir / "time_per_iter.png"
        _figure_per_iter(rows, sweep_key, algorithms, p1, name)
        p2 = out_dir / "phases.png"
        _figure_phases(rows, sweep_key, algorithms, p2, name)
        written += [p1, p2]
    return written
