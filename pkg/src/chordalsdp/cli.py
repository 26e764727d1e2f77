"""Command-line front end.

Three subcommands: solve an SDPA-format file, generate a test problem,
or run a benchmark sweep from a config file.  Exit codes from solve:
0 optimal, 2 infeasibility detected, 3 iteration cap hit, 1 any error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .engines import SolverOptions, solve
from .errors import ChordalSdpError
from .problem_io import (
    BlockArrowSpec,
    gen_block_arrow,
    gen_random_chordal,
    read_sdpa,
    write_result_json,
    write_sdpa,
)

_EXIT = {
    "Optimal": 0,
    "PrimalInfeasible": 2,
    "DualInfeasible": 2,
    "MaxIterations": 3,
}

TRACE_COLUMNS = ["iter", "eps_p", "eps_d", "eps_g", "eps_c", "rho", "time_s"]


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; keep 2 reserved for infeasibility."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def _build_parser() -> _Parser:
    ap = _Parser(prog="chordalsdp", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    sv = sub.add_parser("solve", help="solve an SDPA sparse-format file")
    sv.add_argument("file", type=Path, help="problem file (.dat-s)")
    sv.add_argument(
        "--algorithm",
        choices=("primal", "dual", "hsde"),
        default="hsde",
        help="engine to run (default hsde)",
    )
    sv.add_argument("--eps", type=float, default=1e-3, help="tolerance (default 1e-3)")
    sv.add_argument(
        "--maxiter", type=int, default=2000, help="iteration cap (default 2000)"
    )
    sv.add_argument("--rho", type=float, default=1.0, help="initial penalty")
    sv.add_argument(
        "--no-adaptive",
        action="store_true",
        help="freeze the penalty instead of adapting it",
    )
    sv.add_argument(
        "--no-scale", action="store_true", help="skip data equilibration"
    )
    sv.add_argument(
        "--parallel", action="store_true", help="project clique blocks in threads"
    )
    sv.add_argument("--verbose", action="store_true", help="print progress lines")
    sv.add_argument("--json", type=Path, metavar="OUT", help="write a result summary")
    sv.add_argument(
        "--trace", type=Path, metavar="OUT", help="write per-iteration residuals (CSV)"
    )
    sv.add_argument(
        "--plot", type=Path, metavar="OUT", help="render the residual trace (PNG)"
    )

    gen = sub.add_parser("generate", help="write a synthetic feasible problem")
    gsub = gen.add_subparsers(dest="family", required=True)

    ba = gsub.add_parser("block-arrow", help="block-arrow sparsity pattern")
    ba.add_argument("out", type=Path, help="output file (.dat-s)")
    ba.add_argument("-l", "--blocks", type=int, required=True, help="diagonal blocks")
    ba.add_argument("-d", "--block-size", type=int, required=True, help="block side")
    ba.add_argument("-a", "--arrow", type=int, required=True, help="arrow head width")
    ba.add_argument("-m", "--constraints", type=int, required=True)
    ba.add_argument("--seed", type=int, default=0)

    rc = gsub.add_parser("random-chordal", help="random chordally-extended pattern")
    rc.add_argument("out", type=Path, help="output file (.dat-s)")
    rc.add_argument("-n", "--side", type=int, required=True, help="matrix side")
    rc.add_argument("--density", type=float, required=True, help="edge density in (0,1]")
    rc.add_argument("-m", "--constraints", type=int, required=True)
    rc.add_argument("--seed", type=int, default=0)

    be = sub.add_parser("bench", help="run a benchmark sweep from a config file")
    be.add_argument("config", type=Path, help="TOML or JSON sweep description")
    be.add_argument(
        "--out-dir",
        type=Path,
        default=Path("bench-out"),
        help="directory for the CSV and figures (default bench-out)",
    )
    return ap


def _write_trace_csv(rows, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in TRACE_COLUMNS})


def _plot_trace(rows, path: Path, title: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    its = [r["iter"] for r in rows]
    for key, style in (("eps_p", "-"), ("eps_d", "--"), ("eps_g", "-."), ("eps_c", ":")):
        ax.semilogy(its, [max(r[key], 1e-16) for r in rows], style, label=key)
    ax.set_xlabel("iteration")
    ax.set_ylabel("residual")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _fmt_obj(value, status: str) -> str:
    if status == "PrimalInfeasible":
        return "+Inf"
    if status == "DualInfeasible":
        return "-Inf"
    return f"{value:.8g}" if value is not None else "n/a"


def _cmd_solve(args) -> int:
    problem = read_sdpa(args.file)
    opts = SolverOptions(
        eps_tol=args.eps,
        max_iter=args.maxiter,
        rho=args.rho,
        adaptive_rho=not args.no_adaptive,
        rescale=not args.no_scale,
        algorithm=args.algorithm,
        parallel_projections=args.parallel,
        verbose=args.verbose,
        collect_trace=args.trace is not None or args.plot is not None,
    )
    result = solve(problem, opts)

    stats = result.clique_stats
    print(f"problem:    {problem.name}  (m={problem.m}, N={problem.N})")
    print(
        f"cliques:    {stats['count']}  "
        f"(sizes {stats['min_size']}..{stats['max_size']}, nd={stats['nd']})"
    )
    print(f"status:     {result.status}  ({result.iterations} iterations)")
    print(f"objective:  {_fmt_obj(result.primal_objective, result.status)}")
    if result.status == "Optimal":
        print(f"dual obj:   {_fmt_obj(result.dual_objective, result.status)}")
    print(
        "residuals:  "
        f"eps_p {result.eps_p:.2e}  eps_d {result.eps_d:.2e}  "
        f"eps_g {result.eps_g:.2e}  eps_c {result.eps_c:.2e}  "
        f"eps_alpha {result.eps_alpha:.2e}"
    )
    t = result.timings
    print(
        "time (s):   "
        f"setup {t['setup']:.3f}  factorize {t['factorize']:.3f}  "
        f"iterate {t['iterate']:.3f}  total {t['total']:.3f}"
    )

    if args.json is not None:
        write_result_json(result, args.json)
        print(f"wrote {args.json}")
    if args.trace is not None:
        _write_trace_csv(result.trace, args.trace)
        print(f"wrote {args.trace}")
    if args.plot is not None:
        _plot_trace(result.trace, args.plot, f"{problem.name}: {args.algorithm}")
        print(f"wrote {args.plot}")
    return _EXIT.get(result.status, 1)


def _cmd_generate(args) -> int:
    if args.family == "block-arrow":
        spec = BlockArrowSpec(
            l=args.blocks,
            d=args.block_size,
            h=args.arrow,
            m=args.constraints,
            seed=args.seed,
        )
        problem = gen_block_arrow(spec)
    else:
        problem = gen_random_chordal(
            n=args.side, density=args.density, m=args.constraints, seed=args.seed
        )
    write_sdpa(problem, args.out)
    print(f"wrote {args.out}  (n={problem.N}, m={problem.m})")
    return 0


def _cmd_bench(args) -> int:
    from .bench import run_bench

    paths = run_bench(args.config, args.out_dir)
    for p in paths:
        print(f"wrote {p}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "generate":
            return _cmd_generate(args)
        return _cmd_bench(args)
    except (ChordalSdpError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
