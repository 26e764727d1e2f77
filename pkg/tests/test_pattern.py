"""Chordality testing, extension, clique extraction, clique trees."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chordalsdp import (
    NotChordalError,
    SparsityPattern,
    chordal_extend,
    is_chordal,
    maximal_cliques,
)
from oracles import (
    bron_kerbosch,
    is_chordal_ref,
    pattern_vec_ref,
    random_chordal_graph,
    random_graph,
    svec_ref,
)


def _cycle(n):
    return {(i, i + 1) for i in range(1, n)} | {(1, n)}


class TestChordality:
    def test_four_cycle_is_not_chordal(self):
        g = SparsityPattern.from_edges(4, _cycle(4))
        assert not is_chordal(g)

    def test_chord_fixes_the_four_cycle(self):
        g = SparsityPattern.from_edges(4, _cycle(4) | {(2, 4)})
        assert is_chordal(g)

    def test_complete_graph(self):
        edges = {(i, j) for i in range(1, 6) for j in range(i + 1, 6)}
        assert is_chordal(SparsityPattern.from_edges(5, edges))

    def test_trees_are_chordal(self):
        # star and path, no cycles at all
        assert is_chordal(SparsityPattern.from_edges(5, {(1, k) for k in range(2, 6)}))
        assert is_chordal(SparsityPattern.from_edges(5, {(k, k + 1) for k in range(1, 5)}))

    def test_empty_graph_is_chordal(self):
        assert is_chordal(SparsityPattern.from_edges(6, set()))

    def test_six_cycle_is_not_chordal(self):
        assert not is_chordal(SparsityPattern.from_edges(6, _cycle(6)))

    def test_matches_bruteforce_on_random_graphs(self):
        """Agreement with the exponential chordless-cycle search."""
        rng = np.random.default_rng(7)
        for _ in range(1200):
            n = int(rng.integers(4, 9))
            edges = random_graph(n, float(rng.uniform(0.15, 0.85)), rng)
            g = SparsityPattern.from_edges(n, edges)
            assert is_chordal(g) == is_chordal_ref(n, edges), (n, sorted(edges))

    def test_constructed_chordal_graphs_pass(self):
        rng = np.random.default_rng(11)
        for _ in range(400):
            n = int(rng.integers(2, 14))
            edges = random_chordal_graph(n, rng)
            assert is_chordal(SparsityPattern.from_edges(n, edges))


class TestExtension:
    def test_extension_contains_and_is_chordal(self):
        rng = np.random.default_rng(3)
        for _ in range(600):
            n = int(rng.integers(4, 10))
            edges = random_graph(n, float(rng.uniform(0.1, 0.7)), rng)
            g = SparsityPattern.from_edges(n, edges)
            ext = chordal_extend(g)
            assert ext.contains(g)
            # checked by the independent cycle search, not by is_chordal
            assert is_chordal_ref(n, ext.edges)

    def test_banded_pattern_is_a_fixed_point(self):
        n = 12
        edges = {(i, j) for i in range(1, n + 1) for j in range(i + 1, min(i + 3, n + 1))}
        g = SparsityPattern.from_edges(n, edges)
        assert chordal_extend(g).edges == g.edges

    def test_block_arrow_pattern_is_a_fixed_point(self):
        edges = {(1, 2), (3, 4), (5, 6), (7, 8)}
        for blk in [(1, 2), (3, 4), (5, 6)]:
            for v in blk:
                edges |= {(v, 7), (v, 8)}
        g = SparsityPattern.from_edges(8, edges)
        assert chordal_extend(g).edges == g.edges

    def test_four_cycle_gains_exactly_one_chord(self):
        g = SparsityPattern.from_edges(4, _cycle(4))
        ext = chordal_extend(g)
        assert len(ext.edges) == 5
        assert is_chordal(ext)

    def test_extension_contract_at_scale(self):
        """10000 random graphs up to n=30: extension chordal, contains input."""
        rng = np.random.default_rng(101)
        for _ in range(10_000):
            n = int(rng.integers(2, 31))
            g = SparsityPattern.from_edges(n, random_graph(n, float(rng.uniform(0.05, 0.6)), rng))
            ext = chordal_extend(g)
            assert ext.contains(g)
            assert is_chordal(ext)

    @settings(max_examples=120, deadline=None)
    @given(st.integers(0, 10**6), st.integers(4, 9))
    def test_reextending_keeps_chordality(self, seed, n):
        # no idempotence promise: the ordering heuristic may add fill even
        # to a chordal input, but the result must stay a chordal supergraph
        rng = np.random.default_rng(seed)
        g = SparsityPattern.from_edges(n, random_graph(n, 0.4, rng))
        ext = chordal_extend(g)
        ext2 = chordal_extend(ext)
        assert ext2.contains(ext)
        assert is_chordal_ref(n, ext2.edges)


class TestMaximalCliques:
    def test_paper_figure_pattern(self):
        # 4-cycle plus the (2,4) chord
        g = SparsityPattern.from_edges(4, _cycle(4) | {(2, 4)})
        dec = maximal_cliques(g)
        assert dec.cliques == ((1, 2, 4), (2, 3, 4))

    def test_complete_graph_single_clique(self):
        edges = {(i, j) for i in range(1, 6) for j in range(i + 1, 6)}
        dec = maximal_cliques(SparsityPattern.from_edges(5, edges))
        assert dec.cliques == ((1, 2, 3, 4, 5),)
        assert dec.parent == (None,)

    def test_path_graph(self):
        dec = maximal_cliques(SparsityPattern.from_edges(3, {(1, 2), (2, 3)}))
        assert dec.cliques == ((1, 2), (2, 3))
        assert dec.separator(1) == (2,)

    def test_isolated_vertices_become_singletons(self):
        dec = maximal_cliques(SparsityPattern.from_edges(4, {(1, 2)}))
        assert dec.cliques == ((1, 2), (3,), (4,))

    def test_rejects_nonchordal_input(self):
        with pytest.raises(NotChordalError):
            maximal_cliques(SparsityPattern.from_edges(4, _cycle(4)))

    def test_matches_bron_kerbosch(self):
        """Clique sets agree with the pivoted exponential enumeration."""
        rng = np.random.default_rng(19)
        for _ in range(500):
            n = int(rng.integers(2, 13))
            edges = random_chordal_graph(n, rng)
            dec = maximal_cliques(SparsityPattern.from_edges(n, edges))
            assert sorted(dec.cliques) == bron_kerbosch(n, edges)

    def test_cliques_cover_all_edges(self):
        rng = np.random.default_rng(23)
        for _ in range(300):
            n = int(rng.integers(2, 14))
            edges = random_chordal_graph(n, rng)
            dec = maximal_cliques(SparsityPattern.from_edges(n, edges))
            covered = set()
            for c in dec.cliques:
                covered |= {(a, b) for a in c for b in c if a < b}
            assert edges <= covered

    def test_running_intersection_property(self):
        """C_i cap C_j is contained in every clique on the tree path."""
        rng = np.random.default_rng(29)
        for _ in range(200):
            n = int(rng.integers(3, 13))
            edges = random_chordal_graph(n, rng)
            dec = maximal_cliques(SparsityPattern.from_edges(n, edges))
            p = dec.p

            def path_to_root(k):
                out = [k]
                while dec.parent[out[-1]] is not None:
                    out.append(dec.parent[out[-1]])
                return out

            for i in range(p):
                for j in range(i + 1, p):
                    shared = set(dec.cliques[i]) & set(dec.cliques[j])
                    if not shared:
                        continue
                    pi, pj = path_to_root(i), path_to_root(j)
                    # cliques sharing vertices sit in one tree component
                    meet = next(k for k in pi if k in set(pj))
                    path = pi[: pi.index(meet) + 1] + pj[: pj.index(meet)]
                    for k in path:
                        assert shared <= set(dec.cliques[k])


class TestSelectors:
    def test_selector_lengths_and_uniqueness(self):
        rng = np.random.default_rng(31)
        for _ in range(200):
            n = int(rng.integers(2, 12))
            dec = maximal_cliques(
                SparsityPattern.from_edges(n, random_chordal_graph(n, rng))
            )
            for c, sel in zip(dec.cliques, dec.entry_selectors):
                q = len(c)
                assert len(sel) == q * (q + 1) // 2
                assert len(np.unique(sel)) == len(sel)

    def test_selection_equals_submatrix_svec(self):
        """Gathering the selector indices from the pattern vector must
        produce exactly svec of the clique principal submatrix."""
        rng = np.random.default_rng(37)
        for _ in range(200):
            n = int(rng.integers(2, 12))
            edges = random_chordal_graph(n, rng)
            g = SparsityPattern.from_edges(n, edges)
            dec = maximal_cliques(g)
            X = np.zeros((n, n))
            for (i, j) in dec.entries:
                v = rng.normal()
                X[i - 1, j - 1] = X[j - 1, i - 1] = v
            xr = pattern_vec_ref(X, dec.entries)
            for c, sel in zip(dec.cliques, dec.entry_selectors):
                idx = np.array(c) - 1
                want = svec_ref(X[np.ix_(idx, idx)])
                np.testing.assert_allclose(xr[sel], want, atol=0, rtol=0)

    def test_entries_are_column_major(self):
        edges = {(1, 2), (1, 3), (2, 3)}
        g = SparsityPattern.from_edges(3, edges)
        dec = maximal_cliques(g)
        assert dec.entries == ((1, 1), (1, 2), (2, 2), (1, 3), (2, 3), (3, 3))


class TestCliqueTree:
    def test_forest_respects_components(self):
        # two disjoint triangles
        edges = {(1, 2), (1, 3), (2, 3), (4, 5), (4, 6), (5, 6)}
        dec = maximal_cliques(SparsityPattern.from_edges(6, edges))
        assert dec.cliques == ((1, 2, 3), (4, 5, 6))
        assert dec.parent == (None, None)

    def test_parent_edges_have_nonempty_separators(self):
        rng = np.random.default_rng(41)
        for _ in range(200):
            n = int(rng.integers(3, 13))
            dec = maximal_cliques(
                SparsityPattern.from_edges(n, random_chordal_graph(n, rng))
            )
            for k in range(dec.p):
                if dec.parent[k] is not None:
                    assert dec.separator(k)
