"""Problem data, SDPA sparse-format I/O, generators, result serialization.

The in-memory problem is the standard conic pair

    minimize  <c, x>   subject to  A x = b,  x in cone,

with the cone an ordered product (free scalars, nonnegative scalars, PSD
blocks).  PSD blocks live in symmetric-vectorization coordinates (see
_svec), so A is m x N with N counting each PSD block as side*(side+1)/2
columns.

SDPA sparse files (.dat-s) describe the pair through matrices F_0..F_m;
the mapping used here is A_i = F_i, b = c_file, C = -F_0, which makes the
file's "maximize tr(F_0 X)" the internal minimization with the reported
objective equal to -<c, x> (obj_sign below).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ._svec import SQRT2, svec_len
from .errors import InconsistentBlockError, SdpaParseError


@dataclass(frozen=True)
class ConeDims:
    """Ordered cone description: free scalars, then nonnegative scalars,
    then PSD blocks by side length."""

    free: int = 0
    nonneg: int = 0
    psd: tuple = ()

    def __post_init__(self):
        if self.free < 0 or self.nonneg < 0:
            raise ValueError("cone counts must be nonnegative")
        if any(s < 1 for s in self.psd):
            raise ValueError("PSD block sides must be positive")

    @property
    def N(self) -> int:
        return self.free + self.nonneg + sum(svec_len(s) for s in self.psd)


@dataclass
class ConicProblem:
    """Vectorized problem data (A, b, c) plus the cone description.

    obj_sign records how objectives are reported: the solver always
    minimizes <c, x> internally and reports obj_sign * <c, x>.  Problems
    read from SDPA files carry obj_sign = -1 (the file convention
    maximizes), generated problems carry +1.
    """

    cone_dims: ConeDims
    A: sp.csr_matrix
    b: np.ndarray
    c: np.ndarray
    name: str = ""
    obj_sign: float = 1.0

    def __post_init__(self):
        self.A = sp.csr_matrix(self.A, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64).ravel()
        self.c = np.asarray(self.c, dtype=np.float64).ravel()
        N = self.cone_dims.N
        if self.A.shape != (self.b.shape[0], N):
            raise ValueError(
                f"A is {self.A.shape}, expected ({self.b.shape[0]}, {N})"
            )
        if self.c.shape[0] != N:
            raise ValueError(f"c has length {self.c.shape[0]}, expected {N}")

    @property
    def m(self) -> int:
        return self.b.shape[0]

    @property
    def N(self) -> int:
        return self.cone_dims.N

    def psd_offset(self, block: int) -> int:
        """Column offset of a PSD block in the vectorized coordinates."""
        off = self.cone_dims.free + self.cone_dims.nonneg
        for s in self.cone_dims.psd[:block]:
            off += svec_len(s)
        return off


# ---------------------------------------------------------------------------
# SDPA sparse format


_PUNCT = str.maketrans({ch: " " for ch in ",(){}"})


def _numeric_tokens(text: str) -> list:
    return text.translate(_PUNCT).split()


def read_sdpa(path) -> ConicProblem:
    """Parse a file in SDPA sparse format (.dat-s).

    Layout: optional comment lines starting with '"' or '*'; the number
    of constraint matrices m; the number of blocks; the block sizes (a
    negative size marks a diagonal block of that many nonnegative
    scalars); the m objective coefficients (may wrap across lines); then
    entry lines `matno blkno i j value` with matno 0 meaning the
    objective matrix and i <= j.  Commas and brackets count as
    whitespace.  Repeated entries accumulate.

    Raises SdpaParseError with a 1-based line number on malformed input;
    InconsistentBlockError when an index falls outside its block.
    """
    path = Path(path)
    with open(path, "r") as fh:
        raw = fh.read().splitlines()

    data_lines = []
    for ln, text in enumerate(raw, start=1):
        s = text.strip()
        if not s:
            continue
        if s[0] in '"*':
            tok0 = s.split()[0].upper().strip("*")
            if tok0 == "EQUALS":
                raise SdpaParseError(
                    "*EQUALS* extension directives are not supported", line=ln
                )
            continue
        data_lines.append((ln, s))

    cursor = 0

    def take():
        nonlocal cursor
        if cursor >= len(data_lines):
            raise SdpaParseError("unexpected end of file", line=len(raw))
        ln, s = data_lines[cursor]
        cursor += 1
        return ln, s

    def parse_int(tok, ln, what):
        try:
            return int(tok)
        except ValueError:
            raise SdpaParseError(f"bad {what} {tok!r}", line=ln) from None

    def parse_float(tok, ln, what):
        try:
            v = float(tok)
        except ValueError:
            raise SdpaParseError(f"bad {what} {tok!r}", line=ln) from None
        if not math.isfinite(v):
            raise SdpaParseError(f"non-finite {what} {tok!r}", line=ln)
        return v

    ln, s = take()
    m = parse_int(_numeric_tokens(s)[0], ln, "constraint count")
    if m < 1:
        raise SdpaParseError("constraint count must be positive", line=ln)

    ln, s = take()
    nblocks = parse_int(_numeric_tokens(s)[0], ln, "block count")
    if nblocks < 1:
        raise SdpaParseError("block count must be positive", line=ln)

    ln, s = take()
    toks = _numeric_tokens(s)
    if len(toks) < nblocks:
        raise SdpaParseError(
            f"expected {nblocks} block sizes, found {len(toks)}", line=ln
        )
    sizes = [parse_int(t, ln, "block size") for t in toks[:nblocks]]
    if any(sz == 0 for sz in sizes):
        raise SdpaParseError("block size zero", line=ln)

    b = []
    while len(b) < m:
        ln, s = take()
        for tok in _numeric_tokens(s):
            b.append(parse_float(tok, ln, "objective coefficient"))
        if len(b) > m:
            raise SdpaParseError(
                f"expected {m} objective coefficients, found {len(b)}", line=ln
            )
    b = np.array(b, dtype=np.float64)

    # column layout: nonnegative scalars from the diagonal blocks in file
    # order, then the PSD blocks in file order
    nonneg_total = sum(-sz for sz in sizes if sz < 0)
    psd_sides = tuple(sz for sz in sizes if sz > 0)
    block_info = []  # per file block: (kind, base offset, extent)
    lp_off = 0
    psd_off = nonneg_total
    for sz in sizes:
        if sz < 0:
            block_info.append(("lp", lp_off, -sz))
            lp_off += -sz
        else:
            block_info.append(("psd", psd_off, sz))
            psd_off += svec_len(sz)
    N = psd_off

    c = np.zeros(N)
    rows, cols, vals = [], [], []
    while cursor < len(data_lines):
        ln, s = take()
        toks = s.split()
        if len(toks) != 5:
            raise SdpaParseError(
                f"entry line must have 5 fields, found {len(toks)}", line=ln
            )
        matno = parse_int(toks[0], ln, "matrix number")
        blkno = parse_int(toks[1], ln, "block number")
        i = parse_int(toks[2], ln, "row index")
        j = parse_int(toks[3], ln, "column index")
        v = parse_float(toks[4], ln, "value")
        if not 0 <= matno <= m:
            raise SdpaParseError(f"matrix number {matno} out of range", line=ln)
        if not 1 <= blkno <= nblocks:
            raise SdpaParseError(f"block number {blkno} out of range", line=ln)
        kind, base, extent = block_info[blkno - 1]
        if not (1 <= i <= extent and 1 <= j <= extent):
            raise InconsistentBlockError(
                f"entry ({i},{j}) outside {extent}x{extent} block {blkno}",
                line=ln,
            )
        if i > j:
            raise SdpaParseError("entries must satisfy i <= j", line=ln)
        if kind == "lp":
            if i != j:
                raise InconsistentBlockError(
                    f"off-diagonal entry ({i},{j}) in diagonal block {blkno}",
                    line=ln,
                )
            col = base + i - 1
            coef = v
        else:
            col = base + (j - 1) * j // 2 + (i - 1)
            coef = v if i == j else v * SQRT2
        if matno == 0:
            # internal objective is minimized, the file convention maximizes
            c[col] -= coef
        else:
            rows.append(matno - 1)
            cols.append(col)
            vals.append(coef)

    A = sp.coo_matrix((vals, (rows, cols)), shape=(m, N)).tocsr()
    return ConicProblem(
        cone_dims=ConeDims(free=0, nonneg=nonneg_total, psd=psd_sides),
        A=A,
        b=b,
        c=c,
        name=path.stem,
        obj_sign=-1.0,
    )


def write_sdpa(problem: ConicProblem, path) -> None:
    """Write a problem in canonical SDPA sparse format.

    Blocks come out as one diagonal block holding all nonnegative scalars
    (when present) followed by the PSD blocks; entries are sorted by
    (matno, blkno, i, j) and printed with 17 significant digits, so a
    write/read cycle reproduces (A, b, c) exactly.

    The format fixes the objective convention (obj_sign = -1 on re-read):
    a generated problem keeps its data and solutions through the round
    trip but reports objectives with the file convention's sign.

    Free scalars cannot be represented; m must be at least 1.
    """
    if problem.cone_dims.free:
        raise ValueError("SDPA sparse format has no free cone")
    if problem.m < 1:
        raise ValueError("SDPA sparse format requires at least one constraint")

    nonneg = problem.cone_dims.nonneg
    psd = problem.cone_dims.psd
    sizes = ([-nonneg] if nonneg else []) + list(psd)
    if not sizes:
        raise ValueError("problem has no cone blocks to write")
    lp_block = 1 if nonneg else 0

    def entry_of(col):
        """(blkno, i, j, scale) for a vectorized column index."""
        if col < nonneg:
            return lp_block, col + 1, col + 1, 1.0
        off = nonneg
        for bi, side in enumerate(psd):
            L = svec_len(side)
            if col < off + L:
                k = col - off
                j = int((math.isqrt(8 * k + 1) - 1) // 2)
                i = k - j * (j + 1) // 2
                scale = 1.0 if i == j else SQRT2
                return lp_block + 1 + bi, i + 1, j + 1, scale
            off += L
        raise IndexError(col)

    entries = []
    for col in np.nonzero(problem.c)[0]:
        blk, i, j, scale = entry_of(int(col))
        entries.append((0, blk, i, j, -problem.c[col] / scale))
    coo = problem.A.tocoo()
    for r, col, v in zip(coo.row, coo.col, coo.data):
        if v == 0.0:
            continue
        blk, i, j, scale = entry_of(int(col))
        entries.append((int(r) + 1, blk, i, j, v / scale))
    entries.sort(key=lambda e: e[:4])

    lines = []
    if problem.name:
        lines.append(f'"{problem.name}')
    lines.append(str(problem.m))
    lines.append(str(len(sizes)))
    lines.append(" ".join(str(sz) for sz in sizes))
    lines.append(" ".join(f"{v:.17g}" for v in problem.b))
    for matno, blk, i, j, v in entries:
        lines.append(f"{matno} {blk} {i} {j} {v:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Generators


@dataclass(frozen=True)
class BlockArrowSpec:
    """Block-arrow pattern description: l diagonal blocks of side d plus an
    arrow head of width h occupying the last rows and columns; cone side
    n = l*d + h.  m constraints, seeded RNG."""

    l: int
    d: int
    h: int
    m: int
    seed: int = 0

    def __post_init__(self):
        if self.l < 1 or self.d < 1 or self.h < 0 or self.m < 1:
            raise ValueError("need l >= 1, d >= 1, h >= 0, m >= 1")

    @property
    def n(self) -> int:
        return self.l * self.d + self.h


def _block_arrow_entries(spec: BlockArrowSpec) -> list:
    """Upper-triangular pattern positions, column major.  Columns inside a
    diagonal block see their own block; columns in the head see everything."""
    out = []
    ld = spec.l * spec.d
    for j in range(1, ld + 1):
        b0 = ((j - 1) // spec.d) * spec.d + 1
        out.extend((i, j) for i in range(b0, j + 1))
    for j in range(ld + 1, spec.n + 1):
        out.extend((i, j) for i in range(1, j + 1))
    return out


def _feasible_on_entries(n, m, entries, rng, name, extra_meta=None):
    """Build a strictly feasible problem supported on the given pattern
    entries of a single n x n PSD block.

    Draw order (one stream): the m constraint matrices' pattern values,
    then the values of W (primal certificate X_f = W + alpha I), then the
    values of W' (dual certificate Z_f), then the dual multipliers y.
    All raw values are uniform on [0, 1).
    """
    npat = len(entries)
    iarr = np.fromiter((e[0] for e in entries), dtype=np.intp, count=npat)
    jarr = np.fromiter((e[1] for e in entries), dtype=np.intp, count=npat)
    colarr = (jarr - 1) * jarr // 2 + (iarr - 1)
    scale = np.where(iarr == jarr, 1.0, SQRT2)
    N = svec_len(n)

    rows = np.repeat(np.arange(m, dtype=np.intp), npat)
    cols = np.tile(colarr, m)
    vals = np.empty(m * npat)
    for k in range(m):
        vals[k * npat : (k + 1) * npat] = rng.uniform(size=npat) * scale
    A = sp.coo_matrix((vals, (rows, cols)), shape=(m, N)).tocsr()

    def psd_certificate():
        w = rng.uniform(size=npat)
        W = np.zeros((n, n))
        W[iarr - 1, jarr - 1] = w
        W[jarr - 1, iarr - 1] = w
        alpha = abs(float(np.linalg.eigvalsh(W).min())) + 1.0
        W[np.arange(n), np.arange(n)] += alpha
        x = np.zeros(N)
        x[colarr] = W[iarr - 1, jarr - 1] * scale
        return x

    x_feas = psd_certificate()
    z_feas = psd_certificate()
    y = rng.uniform(size=m)
    b = A @ x_feas
    c = z_feas + A.T @ y

    return ConicProblem(
        cone_dims=ConeDims(psd=(n,)),
        A=A,
        b=b,
        c=c,
        name=name,
        obj_sign=1.0,
    )


def gen_block_arrow(spec: BlockArrowSpec) -> ConicProblem:
    """Generate a strictly feasible SDP with block-arrow sparsity.

    Constraint matrices are random symmetric with the block-arrow
    pattern, entries uniform on [0, 1); b is chosen so X_f = W + alpha I
    (alpha = |min eig W| + 1) is primal feasible, and c = Z_f + sum y_i A_i
    makes (y, Z_f) strictly dual feasible.  Bitwise reproducible for a
    fixed seed (single seeded generator, documented draw order).

    After decomposition the pattern has exactly l maximal cliques of size
    d + h (one clique when l = 1 or h spans everything).
    """
    rng = np.random.default_rng(spec.seed)
    entries = _block_arrow_entries(spec)
    name = f"block-arrow-l{spec.l}-d{spec.d}-h{spec.h}-m{spec.m}-s{spec.seed}"
    return _feasible_on_entries(spec.n, spec.m, entries, rng, name)


def gen_random_chordal(n: int, density: float, m: int, seed: int = 0) -> ConicProblem:
    """Generate a strictly feasible SDP on a random chordal pattern.

    A random graph with the given edge density is extended to a chordal
    one, and data is drawn on the extended pattern with the same recipe
    as gen_block_arrow (so the decomposition introduces no extra fill).
    """
    from .pattern import SparsityPattern, chordal_extend

    if n < 1 or m < 1 or not 0.0 <= density <= 1.0:
        raise ValueError("need n >= 1, m >= 1, density in [0, 1]")
    rng = np.random.default_rng(seed)
    pairs = [(i, j) for j in range(1, n + 1) for i in range(1, j)]
    mask = rng.uniform(size=len(pairs)) < density
    g = SparsityPattern.from_edges(n, (p for p, keep in zip(pairs, mask) if keep))
    g = chordal_extend(g)
    entries = g.entries()
    name = f"random-chordal-n{n}-m{m}-s{seed}"
    return _feasible_on_entries(n, m, entries, rng, name)


# ---------------------------------------------------------------------------
# Result serialization


def write_result_json(result, path) -> None:
    """Serialize a SolveResult as versioned JSON (schema 1).

    Covers status, objectives, residuals, iteration count, per-phase
    timings, the solver options used, and clique statistics.  Infeasible
    results carry their certificate vector; objectives are null then
    (the conventional value is an infinity, which JSON cannot express
    portably).
    """

    def _num(v):
        if v is None:
            return None
        v = float(v)
        return v if math.isfinite(v) else None

    doc = {
        "schema": 1,
        "status": result.status,
        "primal_objective": _num(result.primal_objective),
        "dual_objective": _num(result.dual_objective),
        "residuals": {
            "eps_p": _num(result.eps_p),
            "eps_d": _num(result.eps_d),
            "eps_g": _num(result.eps_g),
            "eps_c": _num(result.eps_c),
            "eps_alpha": _num(result.eps_alpha),
        },
        "iterations": int(result.iterations),
        "timings": {k: float(v) for k, v in result.timings.items()},
        "options": result.options_dict(),
        "cliques": dict(result.clique_stats),
        "certificate": None
        if result.certificate is None
        else [float(v) for v in result.certificate],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
