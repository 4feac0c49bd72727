"""Core graph, embedding, ledger, and file format tests."""

import pytest

from knpack.graph import (
    Embedding,
    Graph,
    LedgerConflict,
    PackingLedger,
    connected_components,
    induced_subgraph,
    pair_index,
    read_graph,
    validate_embedding,
    write_graph,
)


def path(n):
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def complete(n):
    return Graph(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


class TestGraph:
    def test_edge_count_and_dedup(self):
        g = Graph(4, [(0, 1), (1, 0), (1, 2)])
        assert g.m == 2
        assert g.has_edge(0, 1) and g.has_edge(1, 0)

    def test_self_loop_rejected(self):
        with pytest.raises(ValueError):
            Graph(3, [(1, 1)])

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            Graph(3, [(0, 3)])

    def test_edges_lexicographic(self):
        g = Graph(4, [(2, 3), (0, 2), (0, 1), (1, 3)])
        assert list(g.edges()) == [(0, 1), (0, 2), (1, 3), (2, 3)]

    def test_bitmasks_match_adjacency(self):
        g = Graph(5, [(0, 1), (0, 4), (2, 3)])
        masks = g.bitmasks()
        for u in range(5):
            for v in range(5):
                assert bool(masks[u] >> v & 1) == g.has_edge(u, v) if u != v else True

    def test_copy_is_independent(self):
        g = path(4)
        h = g.copy()
        h.add_edge(0, 3)
        assert not g.has_edge(0, 3)
        assert g.m == 3 and h.m == 4

    def test_degree_helpers(self):
        g = Graph(5, [(0, 1), (0, 2), (0, 3)])
        assert g.degree(0) == 3
        assert g.max_degree() == 3
        assert g.non_isolated() == [0, 1, 2, 3]


class TestComponents:
    def test_connected_path(self):
        # path P_4: one component of size 4
        comps = connected_components(path(4))
        assert len(comps) == 1 and len(comps[0]) == 4

    def test_union_k3_k2(self):
        # K_3 + K_2: two components, sizes {3, 2}
        g = Graph(5, [(0, 1), (0, 2), (1, 2), (3, 4)])
        sizes = sorted(len(c) for c in connected_components(g))
        assert sizes == [2, 3]

    def test_exclude_cuts(self):
        comps = connected_components(path(5), exclude={2})
        sizes = sorted(len(c) for c in comps)
        assert sizes == [2, 2]

    def test_induced_subgraph(self):
        g = complete(4)
        h = induced_subgraph(g, {0, 1, 2})
        assert h.m == 3 and not h.has_edge(0, 3)


class TestEmbedding:
    def test_identity_k3(self):
        g = complete(3)
        e = Embedding(0, {0: 0, 1: 1, 2: 2})
        assert validate_embedding(g, g, e) == []

    def test_p3_into_k3_any_injection(self):
        guest = path(3)
        host = complete(3)
        e = Embedding(0, {0: 2, 1: 0, 2: 1})
        assert validate_embedding(guest, host, e) == []

    def test_k3_into_p3_missing_chord(self):
        guest = complete(3)
        host = path(3)
        e = Embedding(0, {0: 0, 1: 1, 2: 2})
        bad = validate_embedding(guest, host, e)
        assert any(v[0] == "missing_edge" for v in bad)

    def test_non_injective_flagged(self):
        guest = path(3)
        host = complete(4)
        e = Embedding(0, {0: 1, 1: 2, 2: 1})
        bad = validate_embedding(guest, host, e)
        assert any(v[0] == "not_injective" for v in bad)


class TestPairIndex:
    def test_bijection(self):
        n = 9
        seen = set()
        for u in range(n):
            for v in range(u + 1, n):
                seen.add(pair_index(u, v, n))
        assert seen == set(range(n * (n - 1) // 2))

    def test_symmetry(self):
        assert pair_index(5, 2, 8) == pair_index(2, 5, 8)


class TestLedger:
    def test_disjoint_triangles_commit(self):
        # triangles {0,1,2} then {0,3,4} in K_5 are edge-disjoint
        ledger = PackingLedger(5)
        t1 = Graph(5, [(0, 1), (0, 2), (1, 2)])
        t2 = Graph(5, [(0, 3), (0, 4), (3, 4)])
        ledger.commit(t1, Embedding(0, {0: 0, 1: 1, 2: 2}))
        ledger.commit(t2, Embedding(1, {0: 0, 3: 3, 4: 4}))
        assert ledger.used_count() == 6
        assert ledger.per_vertex_used_degree[0] == 4

    def test_same_triangle_twice_conflicts(self):
        ledger = PackingLedger(5)
        t = Graph(5, [(0, 1), (0, 2), (1, 2)])
        e = Embedding(0, {0: 0, 1: 1, 2: 2})
        ledger.commit(t, e)
        with pytest.raises(LedgerConflict):
            ledger.commit(t, e)

    def test_edgeless_commit_noop(self):
        ledger = PackingLedger(4)
        ledger.commit(Graph(4), Embedding(0, {0: 0}))
        assert ledger.used_count() == 0

    def test_failed_commit_changes_nothing(self):
        ledger = PackingLedger(5)
        ledger.commit_edges([(0, 1)])
        with pytest.raises(LedgerConflict):
            ledger.commit_edges([(2, 3), (0, 1)])
        assert ledger.used_count() == 1
        assert ledger.per_vertex_used_degree[2] == 0

    def test_host_edge_restriction(self):
        allowed = {pair_index(0, 1, 4)}
        ledger = PackingLedger(4, host_edges=allowed)
        ledger.commit_edges([(0, 1)])
        with pytest.raises(LedgerConflict):
            ledger.commit_edges([(2, 3)])

    def test_uses_after_commit(self):
        ledger = PackingLedger(4)
        ledger.commit_edges([(1, 3)])
        assert ledger.uses(3, 1)
        assert not ledger.uses(0, 1)


class TestGraphIO:
    def test_round_trip(self, tmp_path):
        g = Graph(6, [(0, 5), (1, 2), (2, 4)])
        p = str(tmp_path / "g.txt")
        write_graph(g, p)
        assert read_graph(p) == g

    def test_header_mismatch_rejected(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("3 2\n0 1\n")
        with pytest.raises(ValueError):
            read_graph(str(p))

    def test_comments_ignored(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("# header comment\n2 1\n0 1\n")
        g = read_graph(str(p))
        assert g.n == 2 and g.m == 1
