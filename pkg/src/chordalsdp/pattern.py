"""Sparsity-pattern graph algorithms.

The pattern of a sparse symmetric matrix is an undirected graph with one
vertex per row/column index (1-based) and an edge for every off-diagonal
position that may hold a nonzero.  Diagonal positions always belong to
the pattern and are not stored as edges.

The solver pipeline uses four operations from this module: extract the
aggregate pattern of a problem's data, test chordality by maximum
cardinality search, extend a pattern to a chordal one with a
fill-reducing symbolic factorization, and enumerate the maximal cliques
of the chordal result together with a clique tree that has the running
intersection property.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Optional

import numpy as np

from ._svec import svec_len, svec_tables
from .errors import NotChordalError

if TYPE_CHECKING:
    from .problem_io import ConicProblem


@dataclass(frozen=True)
class SparsityPattern:
    """Undirected graph over matrix indices 1..n.

    Edges are unordered pairs of distinct indices stored once as
    (min, max).  Diagonal entries are implicitly present in every
    pattern, so an empty edge set describes diagonal matrices.
    """

    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("pattern needs at least one vertex")
        for i, j in self.edges:
            if not (1 <= i < j <= self.n):
                raise ValueError(f"edge ({i},{j}) out of range for n={self.n}")

    @classmethod
    def from_edges(cls, n: int, pairs: Iterable[tuple[int, int]]) -> "SparsityPattern":
        """Build a pattern from possibly unordered, possibly repeated pairs.

        Self-loops are dropped: the diagonal is always present anyway.
        """
        norm = set()
        for i, j in pairs:
            if i == j:
                continue
            norm.add((min(i, j), max(i, j)))
        return cls(n, frozenset(norm))

    def adjacency(self) -> list:
        """Neighbor sets indexed 1..n; index 0 is unused."""
        adj = [set() for _ in range(self.n + 1)]
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return adj

    def entries(self) -> list:
        """Upper-triangular pattern positions (i, j) with i <= j, diagonal
        included, in column-major order.  This fixes the reduced vector
        coordinates used throughout the solver."""
        out = []
        for j in range(1, self.n + 1):
            for i in range(1, j):
                if (i, j) in self.edges:
                    out.append((i, j))
            out.append((j, j))
        return out

    @property
    def reduced_dim(self) -> int:
        return self.n + len(self.edges)

    def contains(self, other: "SparsityPattern") -> bool:
        return self.n == other.n and other.edges <= self.edges


@dataclass(frozen=True, eq=False)
class CliqueDecomposition:
    """Maximal cliques of a chordal pattern, arranged in a clique tree.

    cliques:          sorted vertex tuples C_1..C_p (1-based), in
                      lexicographic order
    parent:           clique-tree parent index per clique, None at roots
    entry_selectors:  per clique, the flat index array mapping the
                      clique block's vectorized coordinates into the
                      pattern's reduced coordinates; realizes the
                      entry-selector operator as a pure gather
    nd:               total vectorized size of all clique blocks
    entries:          the reduced-coordinate position list (i, j), i <= j
    entry_index:      inverse lookup of entries

    Because clique vertices are sorted ascending, an off-diagonal clique
    coordinate always lands on an off-diagonal reduced coordinate and the
    sqrt(2) factors on both sides cancel, so the selectors carry no scale
    factors at all and their rows are orthonormal.
    """

    pattern: SparsityPattern
    cliques: tuple
    parent: tuple
    entry_selectors: tuple
    nd: int
    entries: tuple
    entry_index: dict = field(repr=False)

    @property
    def p(self) -> int:
        return len(self.cliques)

    @property
    def block_dims(self) -> tuple:
        return tuple(len(s) for s in self.entry_selectors)

    @property
    def reduced_dim(self) -> int:
        return len(self.entries)

    def separator(self, k: int) -> tuple:
        """Vertices shared with the parent clique; empty at roots."""
        pk = self.parent[k]
        if pk is None:
            return ()
        return tuple(sorted(set(self.cliques[k]) & set(self.cliques[pk])))


def _mcs(g: SparsityPattern):
    """Maximum cardinality search.

    Returns (peo, ok).  MCS repeatedly visits the unnumbered vertex with
    the most numbered neighbors (ties toward the smaller index); the
    visit order reversed is a perfect elimination order exactly when the
    graph is chordal, which the follower check below decides.
    """
    n, adj = g.n, g.adjacency()
    weight = [0] * (n + 1)
    numbered = [False] * (n + 1)
    heap = [(0, u) for u in range(1, n + 1)]
    heapq.heapify(heap)
    visit = []
    while len(visit) < n:
        w, v = heapq.heappop(heap)
        if numbered[v] or -w != weight[v]:
            continue
        numbered[v] = True
        visit.append(v)
        for u in adj[v]:
            if not numbered[u]:
                weight[u] += 1
                heapq.heappush(heap, (-weight[u], u))
    peo = visit[::-1]
    pos = {v: k for k, v in enumerate(peo)}
    ok = True
    for v in peo:
        later = [u for u in adj[v] if pos[u] > pos[v]]
        if not later:
            continue
        f = min(later, key=pos.__getitem__)
        # the elimination order is perfect iff v's later neighbors minus
        # the follower f are all adjacent to f
        if any(u != f and u not in adj[f] for u in later):
            ok = False
            break
    return peo, ok


def is_chordal(g: SparsityPattern) -> bool:
    """True iff every cycle of length four or more has a chord."""
    return _mcs(g)[1]


def chordal_extend(g: SparsityPattern) -> SparsityPattern:
    """Extend a pattern to a chordal one.

    The vertices are permuted by approximate minimum degree and a
    symbolic Cholesky elimination is run in that order; the returned
    pattern is the input plus the fill.  It always contains the input
    and always passes is_chordal.  The amount of fill depends on the
    ordering heuristic (finding the minimum fill is NP-complete).
    """
    from cvxopt import amd, spmatrix

    n = g.n
    rows = list(range(n))
    cols = list(range(n))
    for i, j in g.edges:
        rows += [i - 1, j - 1]
        cols += [j - 1, i - 1]
    S = spmatrix(1.0, rows, cols, (n, n))
    order = [int(v) for v in amd.order(S)]
    pos = [0] * n
    for k, v in enumerate(order):
        pos[v] = k

    # symbolic factorization in the permuted labels: the below-diagonal
    # structure of column k is its original later neighbors plus the
    # structures of its elimination-tree children
    padj = [set() for _ in range(n)]
    for i, j in g.edges:
        a, b = pos[i - 1], pos[j - 1]
        padj[a].add(b)
        padj[b].add(a)
    children = [[] for _ in range(n)]
    struct = [None] * n
    for k in range(n):
        s = {u for u in padj[k] if u > k}
        for c in children[k]:
            s |= struct[c]
        s.discard(k)
        struct[k] = s
        if s:
            children[min(s)].append(k)

    edges = set()
    for k in range(n):
        vk = order[k] + 1
        for u in struct[k]:
            vu = order[u] + 1
            edges.add((min(vk, vu), max(vk, vu)))
    return SparsityPattern(n, frozenset(edges))


def maximal_cliques(g: SparsityPattern) -> CliqueDecomposition:
    """Enumerate the maximal cliques of a chordal pattern and build the
    clique tree.

    Candidate cliques are read off a perfect elimination order (each
    vertex with its later neighbors); dropping the non-maximal
    candidates leaves exactly the maximal cliques.  The tree is a
    maximum-weight spanning forest of the clique-overlap graph with
    overlap sizes as weights and ties broken toward the lower clique
    index, rooted at the lowest-index clique of each component.  That
    construction guarantees the running intersection property.

    Raises NotChordalError when the input is not chordal.
    """
    peo, ok = _mcs(g)
    if not ok:
        raise NotChordalError("pattern has a chordless cycle; extend it first")
    adj = g.adjacency()
    pos = {v: k for k, v in enumerate(peo)}

    cands = set()
    for v in peo:
        cv = frozenset(u for u in adj[v] if pos[u] > pos[v]) | {v}
        cands.add(cv)
    ordered = sorted(cands, key=lambda c: (-len(c), tuple(sorted(c))))
    kept = []
    by_vertex = {}
    for c in ordered:
        probe = min(c, key=lambda v: len(by_vertex.get(v, ())))
        if any(c <= kept[k] for k in by_vertex.get(probe, ())):
            continue
        ki = len(kept)
        kept.append(c)
        for v in c:
            by_vertex.setdefault(v, []).append(ki)
    cliques = tuple(sorted(tuple(sorted(c)) for c in kept))
    p = len(cliques)

    parent = _clique_tree(cliques)

    entries = tuple(g.entries())
    entry_index = {e: k for k, e in enumerate(entries)}
    selectors = []
    for c in cliques:
        q = len(c)
        idx = np.empty(svec_len(q), dtype=np.intp)
        t = 0
        for b in range(q):
            for a in range(b + 1):
                idx[t] = entry_index[(c[a], c[b])]
                t += 1
        idx.setflags(write=False)
        selectors.append(idx)
    nd = int(sum(len(s) for s in selectors))

    return CliqueDecomposition(
        pattern=g,
        cliques=cliques,
        parent=tuple(parent),
        entry_selectors=tuple(selectors),
        nd=nd,
        entries=entries,
        entry_index=entry_index,
    )


def _clique_tree(cliques):
    """Parent indices of a maximum-weight spanning forest of the
    clique-overlap graph (weights |C_a ∩ C_b|), each component rooted at
    its lowest clique index."""
    p = len(cliques)
    csets = [set(c) for c in cliques]

    # candidate pairs share at least one vertex
    holder = {}
    for k, c in enumerate(cliques):
        for v in c:
            holder.setdefault(v, []).append(k)
    pairs = set()
    for ks in holder.values():
        for a in range(len(ks)):
            for b in range(a + 1, len(ks)):
                pairs.add((ks[a], ks[b]))
    weighted = sorted((-len(csets[a] & csets[b]), a, b) for a, b in pairs)

    root = list(range(p))

    def find(x):
        while root[x] != x:
            root[x] = root[root[x]]
            x = root[x]
        return x

    tree_adj = [[] for _ in range(p)]
    for negw, a, b in weighted:
        ra, rb = find(a), find(b)
        if ra != rb:
            root[ra] = rb
            tree_adj[a].append(b)
            tree_adj[b].append(a)

    parent = [None] * p
    seen = [False] * p
    for r in range(p):
        if seen[r]:
            continue
        seen[r] = True
        queue = [r]
        while queue:
            k = queue.pop(0)
            for nb in sorted(tree_adj[k]):
                if not seen[nb]:
                    seen[nb] = True
                    parent[nb] = k
                    queue.append(nb)
    return parent


def aggregate_pattern(problem: "ConicProblem", block: int = 0) -> SparsityPattern:
    """Aggregate pattern of one PSD block of a problem.

    The edge set is the union of the off-diagonal structural nonzeros of
    c and of every row of A, restricted to the block's columns.  Entries
    stored explicitly as 0.0 do not count.  An empty edge set is valid
    and means the data is diagonal.
    """
    sides = problem.cone_dims.psd
    if not sides:
        raise ValueError("problem has no PSD block")
    if not 0 <= block < len(sides):
        raise IndexError(f"PSD block {block} out of range ({len(sides)} blocks)")
    n = sides[block]
    off = problem.psd_offset(block)
    L = svec_len(n)
    rows, cols, _ = svec_tables(n)

    used = np.zeros(L, dtype=bool)
    used |= np.asarray(problem.c[off : off + L]) != 0.0
    sub = problem.A[:, off : off + L].tocoo()
    nz = sub.data != 0.0
    used[sub.col[nz]] = True

    edges = {
        (int(rows[k]) + 1, int(cols[k]) + 1)
        for k in np.nonzero(used)[0]
        if rows[k] != cols[k]
    }
    return SparsityPattern(n, frozenset(edges))
