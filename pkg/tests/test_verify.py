"""Independent verification, brute-force oracle, divisibility pre-checks."""

import pytest

from knpack.graph import Embedding, Graph
from knpack.verify import brute_force_pack, divisibility_check, verify_packing


def complete_edges(n):
    return {(u, v) for u in range(n) for v in range(u + 1, n)}


def complete(n):
    return Graph(n, list(complete_edges(n)))


def star(leaves):
    return Graph(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


class TestVerifyPacking:
    def test_perfect_tree_packing_of_k3(self):
        # T_1, T_2, T_3 use 0 + 1 + 2 = 3 = C(3,2) edges
        guests = [Graph(1), Graph(2, [(0, 1)]), Graph(3, [(0, 1), (1, 2)])]
        embeddings = [
            Embedding(0, {0: 0}),
            Embedding(1, {0: 0, 1: 1}),
            Embedding(2, {0: 0, 1: 2, 2: 1}),
        ]
        rep = verify_packing(complete_edges(3), guests, embeddings, host_n=3)
        assert rep.valid
        assert rep.density == pytest.approx(1.0)
        assert rep.used_edges == 3

    def test_overlap_detected(self):
        guests = [Graph(2, [(0, 1)]), Graph(2, [(0, 1)])]
        embeddings = [Embedding(0, {0: 0, 1: 1}), Embedding(1, {0: 1, 1: 0})]
        rep = verify_packing(complete_edges(4), guests, embeddings, host_n=4)
        assert not rep.valid
        assert any(f[0] == "edge_reused" for f in rep.findings)

    def test_two_claws_into_k4_never_valid(self):
        # every claimed packing of two K_{1,3} into K_4 must have a finding
        guests = [star(3), star(3)]
        import itertools

        for perm1 in itertools.permutations(range(4)):
            for perm2 in itertools.permutations(range(4)):
                embeddings = [
                    Embedding(0, dict(enumerate(perm1))),
                    Embedding(1, dict(enumerate(perm2))),
                ]
                rep = verify_packing(complete_edges(4), guests, embeddings, host_n=4)
                assert not rep.valid

    def test_injectivity_finding(self):
        guests = [Graph(3, [(0, 1), (1, 2)])]
        embeddings = [Embedding(0, {0: 0, 1: 1, 2: 0})]
        rep = verify_packing(complete_edges(4), guests, embeddings, host_n=4)
        assert any(f[0] == "not_injective" for f in rep.findings)

    def test_totality_finding(self):
        guests = [Graph(3, [(0, 1), (1, 2)])]
        embeddings = [Embedding(0, {0: 0, 1: 1})]
        rep = verify_packing(complete_edges(4), guests, embeddings, host_n=4)
        assert any(f[0] == "not_total" for f in rep.findings)

    def test_edge_outside_host(self):
        guests = [Graph(3, [(0, 1), (1, 2), (0, 2)])]
        embeddings = [Embedding(0, {0: 0, 1: 1, 2: 2})]
        host = {(0, 1), (1, 2)}  # missing the chord
        rep = verify_packing(host, guests, embeddings, host_n=3)
        assert any(f[0] == "edge_outside_host" for f in rep.findings)


class TestBruteForce:
    def test_two_claws_infeasible(self):
        status, embs = brute_force_pack([star(3), star(3)], 4)
        assert status == "infeasible"
        assert embs is None

    def test_sts7_feasible(self):
        tri = Graph(3, [(0, 1), (0, 2), (1, 2)])
        status, embs = brute_force_pack([tri.copy() for _ in range(7)], 7)
        assert status == "feasible"
        guests = [tri] * 7
        rep = verify_packing(complete_edges(7), guests, embs, host_n=7)
        assert rep.valid
        assert rep.used_edges == 21

    def test_two_largest_trees_into_k5(self):
        # T_4 (a path on 4 vertices) and T_5 (a star on 5) pack into K_5
        p4 = Graph(4, [(i, i + 1) for i in range(3)])
        s4 = star(4)
        status, embs = brute_force_pack([p4, s4], 5)
        assert status == "feasible"
        rep = verify_packing(complete_edges(5), [p4, s4], embs, host_n=5)
        assert rep.valid

    def test_budget_exhausted_distinct(self):
        tri = Graph(3, [(0, 1), (0, 2), (1, 2)])
        status, _ = brute_force_pack([tri.copy() for _ in range(7)], 7, budget=5)
        assert status == "budget_exhausted"

    def test_empty_guest_list(self):
        status, embs = brute_force_pack([], 4)
        assert status == "feasible"
        assert embs == []

    def test_oversized_guest_infeasible(self):
        status, _ = brute_force_pack([complete(5)], 4)
        assert status == "infeasible"


class TestDivisibility:
    def test_k3_into_k7_passes(self):
        tri = Graph(3, [(0, 1), (0, 2), (1, 2)])
        ok, reasons = divisibility_check(tri, 7)
        assert ok and reasons == []

    def test_k3_into_k6_fails(self):
        tri = Graph(3, [(0, 1), (0, 2), (1, 2)])
        ok, reasons = divisibility_check(tri, 6)
        assert not ok
        assert reasons

    def test_claw_passes_but_packing_infeasible(self):
        # necessity is not sufficiency: the arithmetic passes for K_{1,3}
        # into K_4 while the oracle proves no packing of two copies exists
        ok, _ = divisibility_check(star(3), 4)
        assert ok
        status, _ = brute_force_pack([star(3), star(3)], 4)
        assert status == "infeasible"
