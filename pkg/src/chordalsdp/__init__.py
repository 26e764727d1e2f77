"""Chordal decomposition solver for sparse semidefinite programs.

The pipeline: read or generate a conic problem (problem_io), decompose
its PSD blocks along a chordal extension of the aggregate sparsity
pattern (pattern, decomposition), run one of three ADMM engines whose
per-iteration work is one cached linear solve plus independent
clique-sized eigendecompositions (kernels, engines), and optionally fill
the reduced solution back to a dense PSD matrix (completion).
"""

from ._svec import smat, svec
from .completion import block_alpha, psd_complete, psd_violation
from .decomposition import DecomposedProblem, decompose, scatter_add, select
from .engines import (
    ScalingRecord,
    SolveResult,
    SolverOptions,
    SolverState,
    adapt_rho,
    flops_affine,
    flops_conic,
    rescale,
    solve,
    solve_dual,
    solve_hsde,
    solve_primal,
)
from .errors import (
    ChordalSdpError,
    CompletionWarning,
    EigFailureError,
    EmptyProblemError,
    FactorizationError,
    InconsistentBlockError,
    NotChordalError,
    RankDeficiencyWarning,
    SdpaParseError,
)
from .kernels import hsde_affine, kkt_factor, kkt_solve, project_blocks, psd_project
from .pattern import (
    CliqueDecomposition,
    SparsityPattern,
    aggregate_pattern,
    chordal_extend,
    is_chordal,
    maximal_cliques,
)
from .problem_io import (
    BlockArrowSpec,
    ConeDims,
    ConicProblem,
    gen_block_arrow,
    gen_random_chordal,
    read_sdpa,
    write_result_json,
    write_sdpa,
)

__version__ = "0.1.0"

__all__ = [
    "BlockArrowSpec",
    "ChordalSdpError",
    "CliqueDecomposition",
    "CompletionWarning",
    "ConeDims",
    "ConicProblem",
    "DecomposedProblem",
    "EigFailureError",
    "EmptyProblemError",
    "FactorizationError",
    "InconsistentBlockError",
    "NotChordalError",
    "RankDeficiencyWarning",
    "ScalingRecord",
    "SdpaParseError",
    "SolveResult",
    "SolverOptions",
    "SolverState",
    "SparsityPattern",
    "adapt_rho",
    "aggregate_pattern",
    "block_alpha",
    "chordal_extend",
    "decompose",
    "flops_affine",
    "flops_conic",
    "gen_block_arrow",
    "gen_random_chordal",
    "hsde_affine",
    "is_chordal",
    "kkt_factor",
    "kkt_solve",
    "maximal_cliques",
    "project_blocks",
    "psd_complete",
    "psd_project",
    "psd_violation",
    "read_sdpa",
    "rescale",
    "scatter_add",
    "select",
    "smat",
    "solve",
    "solve_dual",
    "solve_hsde",
    "solve_primal",
    "svec",
    "write_result_json",
    "write_sdpa",
]
