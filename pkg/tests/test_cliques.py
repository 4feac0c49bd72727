"""Clique enumeration, hyperedge coloring, factor extraction, cell packing."""

import itertools
from random import Random

import pytest

from knpack.cliques import (
    CellPackingFailed,
    clique_factor_collection,
    enumerate_cliques,
    merge_small_graphs,
    pack_into_clique,
    proper_hyperedge_coloring,
)
from knpack.graph import Graph, PackingLedger, pair_index


def complete(n):
    return Graph(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


def gnp(n, p, seed):
    rng = Random(seed)
    g = Graph(n)
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                g.add_edge(u, v)
    return g


class TestEnumerateCliques:
    def test_k4_triangles(self):
        h = enumerate_cliques(complete(4), 3)
        assert len(h.hyperedges) == 4
        assert all(c == 2 for c in h.per_edge_counts.values())

    def test_c5_no_triangles(self):
        c5 = Graph(5, [(i, (i + 1) % 5) for i in range(5)])
        h = enumerate_cliques(c5, 3)
        assert h.hyperedges == []

    def test_k5_four_cliques(self):
        h = enumerate_cliques(complete(5), 4)
        assert len(h.hyperedges) == 5

    def test_random_graph_edge_counts_concentrate(self):
        n, p = 100, 0.5
        g = gnp(n, p, 11)
        h = enumerate_cliques(g, 3)
        expect = (n - 2) * p * p
        within = sum(
            1 for c in h.per_edge_counts.values() if abs(c - expect) <= 0.4 * expect
        )
        assert within >= 0.95 * len(h.per_edge_counts)

    def test_cliques_are_cliques(self):
        g = gnp(30, 0.6, 3)
        h = enumerate_cliques(g, 4)
        for cl in h.hyperedges:
            assert all(g.has_edge(u, v) for u, v in itertools.combinations(cl, 2))


class TestColoring:
    def _assert_proper(self, hyperedges, colors):
        for i, j in itertools.combinations(range(len(hyperedges)), 2):
            if set(hyperedges[i]) & set(hyperedges[j]):
                assert colors[i] != colors[j]

    def test_matching_one_color(self):
        hes = [(0, 1, 2), (3, 4, 5), (6, 7, 8)]
        colors = proper_hyperedge_coloring(hes)
        assert set(colors) == {0}

    def test_sunflower_k_colors(self):
        k = 7
        hes = [(0, 10 + 2 * i, 11 + 2 * i) for i in range(k)]
        colors = proper_hyperedge_coloring(hes)
        assert len(set(colors)) == k
        self._assert_proper(hes, colors)

    def test_random_hypergraph_proper(self):
        g = gnp(40, 0.4, 5)
        hes = enumerate_cliques(g, 3).hyperedges
        colors = proper_hyperedge_coloring(hes, seed=1)
        self._assert_proper(hes, colors)

    def test_color_count_near_edge_degree(self):
        # conflicts for edge-disjoint harvesting: triangles sharing an edge
        g = gnp(60, 0.5, 9)
        h = enumerate_cliques(g, 3)
        hes = [
            tuple(
                pair_index(u, v, g.n) for u, v in itertools.combinations(cl, 2)
            )
            for cl in h.hyperedges
        ]
        colors = proper_hyperedge_coloring(hes, seed=0)
        self._assert_proper(hes, colors)
        assert max(colors) + 1 <= 2 * h.max_degree()


class TestFactorCollection:
    def test_k6_one_factorization(self):
        # K_6 with cell size 2 decomposes into 5 perfect matchings
        factors, stats = clique_factor_collection(
            complete(6), 2, 0.0, seed=0, count=5, min_cells=3, min_factors=5
        )
        assert len(factors) == 5
        used = set()
        for f in factors:
            assert len(f.cells) == 3
            assert f.vertices() == set(range(6))
            for cell in f.cells:
                idx = pair_index(cell[0], cell[1], 6)
                assert idx not in used
                used.add(idx)
        assert len(used) == 15

    def test_k4_single_cell(self):
        factors, _ = clique_factor_collection(
            complete(4), 4, 0.0, seed=0, count=1, min_cells=1, min_factors=1
        )
        assert len(factors) == 1
        assert sorted(factors[0].cells[0]) == [0, 1, 2, 3]

    def test_factors_edge_disjoint_and_cliques(self):
        g = gnp(60, 0.6, 2)
        factors, _ = clique_factor_collection(
            g, 3, 0.3, seed=1, count=4, min_cells=12, min_factors=4
        )
        used = set()
        for f in factors:
            cell_verts = [v for c in f.cells for v in c]
            assert len(cell_verts) == len(set(cell_verts))
            for cell in f.cells:
                for u, v in itertools.combinations(cell, 2):
                    assert g.has_edge(u, v)
                    idx = pair_index(u, v, g.n)
                    assert idx not in used
                    used.add(idx)

    def test_allowed_vertices_respected(self):
        g = complete(12)
        allowed = set(range(3, 12))
        factors, _ = clique_factor_collection(
            g, 3, 0.0, seed=0, count=2, min_cells=2,
            allowed_vertices=allowed, min_factors=2,
        )
        for f in factors:
            assert f.vertices() <= allowed


class TestPackIntoClique:
    def test_empty_guests(self):
        assert pack_into_clique(5, []) == []

    def test_three_matchings_into_k6(self):
        pm = Graph(6, [(0, 1), (2, 3), (4, 5)])
        guests = [pm, pm.copy(), pm.copy()]
        embs = pack_into_clique(6, guests, seed=0)
        ledger = PackingLedger(6)
        for g, e in zip(guests, embs):
            assert len(set(e.map.values())) == len(e.map)
            ledger.commit(g, e)
        assert ledger.used_count() == 9

    def test_infeasible_overflow_raises(self):
        tri = Graph(3, [(0, 1), (0, 2), (1, 2)])
        with pytest.raises(CellPackingFailed):
            pack_into_clique(3, [tri, tri.copy()], restarts=3)

    def test_isolated_vertices_get_slots(self):
        g = Graph(4, [(0, 1)])  # vertices 2, 3 isolated
        (emb,) = pack_into_clique(4, [g], seed=1)
        assert len(emb.map) == 4
        assert len(set(emb.map.values())) == 4


class TestMergeSmallGraphs:
    def test_two_tiny_guests_union(self):
        a = Graph(2, [(0, 1)])
        b = Graph(2, [(0, 1)])
        merged, prov = merge_small_graphs([a, b], ell=40, epsilon=0.2, K=3)
        assert len(merged) == 1
        assert merged[0].m == 2
        assert prov[0] == {0, 1}

    def test_large_guests_unchanged(self):
        gs = [complete(6) for _ in range(3)]  # 15 edges each, above the caps
        merged, prov = merge_small_graphs(gs, ell=8, epsilon=0.2, K=6)
        assert len(merged) == 3
        assert all(m.m == 15 for m in merged)

    def test_edge_totals_preserved(self):
        rng = Random(4)
        gs = []
        for _ in range(9):
            g = Graph(9)
            for s in range(0, 9, 3):
                if rng.random() < 0.8:
                    g.add_edge(s, s + 1)
                    g.add_edge(s + 1, s + 2)
                    g.add_edge(s, s + 2)
            gs.append(g)
        merged, prov = merge_small_graphs(gs, ell=24, epsilon=0.2, K=3)
        assert sum(m.m for m in merged) == sum(g.m for g in gs)
        covered = sorted(i for s in prov.values() for i in s)
        assert covered == list(range(9))
