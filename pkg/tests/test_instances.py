"""Generators, separators, 2-independent sets, and instance preparation."""

import pytest

from knpack.graph import Graph, connected_components
from knpack.instances import (
    InfeasibleSelection,
    find_separator,
    find_two_independent,
    gen_bounded_tree,
    gen_oberwolfach,
    gen_tpc_sequence,
    load_instance_set,
    normalize_collection,
    prepare_instances,
    save_instance_set,
    separator_for_bound,
)


def path(n):
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


class TestTreeGenerator:
    def test_n1_isolated(self):
        g = gen_bounded_tree(1, 3, 0)
        assert g.n == 1 and g.m == 0

    def test_n2_single_edge(self):
        g = gen_bounded_tree(2, 3, 0)
        assert g.m == 1

    def test_large_tree_degree_and_edges(self):
        g = gen_bounded_tree(1000, 3, 7)
        assert g.m == 999
        assert g.max_degree() <= 3
        assert len(connected_components(g)) == 1

    def test_deterministic_per_seed(self):
        assert gen_bounded_tree(50, 3, 5) == gen_bounded_tree(50, 3, 5)
        assert gen_bounded_tree(50, 3, 5) != gen_bounded_tree(50, 3, 6)

    def test_degree_two_gives_path(self):
        g = gen_bounded_tree(20, 2, 1)
        degs = sorted(g.degree(v) for v in range(20))
        assert degs == [1, 1] + [2] * 18


class TestTpcSequence:
    def test_forced_small_sizes(self):
        seq = gen_tpc_sequence(3, 3, 1, 0)
        assert [g.m for g in seq] == [0, 1, 2]
        assert sum(g.m for g in seq) == 3

    def test_arithmetic_total(self):
        lo = 60
        seq = gen_tpc_sequence(200, 3, lo, 1)
        assert len(seq) == 141
        assert sum(g.m for g in seq) == sum(i - 1 for i in range(lo, 201))

    def test_single_spanning_tree(self):
        seq = gen_tpc_sequence(30, 3, 30, 2)
        assert len(seq) == 1 and seq[0].m == 29


class TestOberwolfach:
    def test_single_triangle(self):
        g = gen_oberwolfach(3, [3])
        assert g.m == 3 and g.max_degree() == 2

    def test_three_triangles(self):
        g = gen_oberwolfach(9, [3, 3, 3])
        assert len(connected_components(g)) == 3
        assert all(g.degree(v) == 2 for v in range(9))

    def test_desk_scale_two_regular(self):
        g = gen_oberwolfach(201, [3] * 67)
        assert g.m == 201
        assert all(g.degree(v) == 2 for v in range(201))

    def test_bad_lengths_rejected(self):
        with pytest.raises(ValueError):
            gen_oberwolfach(5, [3, 3])
        with pytest.raises(ValueError):
            gen_oberwolfach(4, [2, 2])


class TestSeparator:
    def test_path_100(self):
        s, k = find_separator(path(100), 0.1)
        assert len(s) <= 10
        assert all(len(c) <= k for c in connected_components(path(100), exclude=s))
        assert k <= 9

    def test_star_center(self):
        star = Graph(10, [(0, i) for i in range(1, 10)])
        s, k = find_separator(star, 0.1)
        assert s == {0} and k == 1

    def test_edgeless(self):
        s, k = find_separator(Graph(8), 0.1)
        assert s == set() and k == 1

    def test_separator_for_bound(self):
        g = path(30)
        s = separator_for_bound(g, 4)
        assert all(len(c) <= 4 for c in connected_components(g, exclude=s))


class TestTwoIndependent:
    def test_path_10(self):
        # greedy scan along P_10 picks indices 0, 3, 6
        assert find_two_independent(path(10), 3) == {0, 3, 6}

    def test_pairwise_distance(self):
        g = gen_bounded_tree(100, 3, 3)
        chosen = sorted(find_two_independent(g, 8))
        for i, u in enumerate(chosen):
            ball = {u} | g.adj[u] | {w for x in g.adj[u] for w in g.adj[x]}
            for v in chosen[i + 1 :]:
                assert v not in ball

    def test_k4_infeasible(self):
        k4 = Graph(4, [(u, v) for u in range(4) for v in range(u + 1, 4)])
        with pytest.raises(InfeasibleSelection):
            find_two_independent(k4, 2)

    def test_singleton_always_works(self):
        assert len(find_two_independent(path(5), 1)) == 1

    def test_avoid_respected(self):
        chosen = find_two_independent(path(10), 2, avoid={0, 1})
        assert chosen.isdisjoint({0, 1})


class TestNormalize:
    def test_two_triangles_merged(self):
        tri = Graph(3, [(0, 1), (0, 2), (1, 2)])
        inst_set = normalize_collection([tri, tri.copy()], 100)
        assert len(inst_set.instances) == 1
        merged = inst_set.instances[0].graph
        assert merged.n == 100 and merged.m == 6
        assert set(inst_set.provenance.values()) == {0}

    def test_spanning_tree_untouched(self):
        t = gen_bounded_tree(40, 3, 0)
        inst_set = normalize_collection([t], 40)
        assert len(inst_set.instances) == 1
        assert inst_set.instances[0].graph.m == 39

    def test_empty_list(self):
        inst_set = normalize_collection([], 10)
        assert inst_set.instances == []
        assert inst_set.total_edges == 0

    def test_edge_total_preserved(self):
        graphs = [gen_bounded_tree(5, 3, s) for s in range(6)]
        inst_set = normalize_collection(graphs, 60)
        assert inst_set.total_edges == sum(g.m for g in graphs)
        assert sum(i.graph.m for i in inst_set.instances) == inst_set.total_edges

    def test_oversized_rejected(self):
        with pytest.raises(ValueError):
            normalize_collection([path(11)], 10)


class TestPrepare:
    def test_decomposition_disjoint_and_bounded(self):
        trees = [gen_bounded_tree(60, 3, s) for s in range(4)]
        inst_set = normalize_collection(trees, 60)
        prepare_instances(inst_set, delta=0.27, gamma=0.15, component_bound=3)
        for inst in inst_set.instances:
            assert inst.separator.isdisjoint(inst.two_independent)
            assert len(inst.two_independent) == round(0.15 * 60)
            part = inst.part_vertices()
            comps = connected_components(
                inst.graph, exclude=inst.separator | inst.two_independent
            )
            assert all(len(c) <= 3 for c in comps if c & part)

    def test_anchors_inside_part(self):
        inst_set = normalize_collection([gen_bounded_tree(60, 3, 1)], 60)
        prepare_instances(inst_set, delta=0.27, gamma=0.15, component_bound=3)
        inst = inst_set.instances[0]
        part = inst.part_vertices()
        assert inst.anchors_S <= part
        assert inst.anchors_I <= part

    def test_gamma_zero_skips_selection(self):
        inst_set = normalize_collection([gen_oberwolfach(9, [3, 3, 3])], 9)
        prepare_instances(inst_set, delta=0.0, gamma=0.0, component_bound=3)
        assert inst_set.instances[0].two_independent == set()
        assert inst_set.instances[0].separator == set()


class TestInstanceIO:
    def test_round_trip(self, tmp_path):
        trees = [gen_bounded_tree(30, 3, s) for s in range(3)]
        inst_set = normalize_collection(trees, 30)
        prepare_instances(inst_set, delta=0.27, gamma=0.15, component_bound=3)
        d = str(tmp_path / "inst")
        save_instance_set(inst_set, d)
        back = load_instance_set(d)
        assert back.n == inst_set.n
        assert len(back.instances) == len(inst_set.instances)
        for a, b in zip(inst_set.instances, back.instances):
            assert a.graph == b.graph
            assert a.separator == b.separator
            assert a.two_independent == b.two_independent
