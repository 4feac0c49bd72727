"""Independent verification, tiny brute-force oracle, divisibility checks.

Nothing here shares state with the pipeline: the verifier rebuilds every
set it checks from the guests, the embeddings, and the raw host edges.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .graph import Embedding, Graph, pair_index
from .instances import InstanceGraph
from .slicer import SlicedHost


@dataclass
class VerifyReport:
    valid: bool
    findings: List[tuple]
    density: float
    used_edges: int
    max_vertex_spread: int
    max_pair_spread: int
    phase_violations: int = 0

    def summary(self) -> str:
        return (
            f"valid={self.valid} used={self.used_edges} density={self.density:.4f} "
            f"findings={len(self.findings)}"
        )


def verify_packing(
    host_edges: Set[Tuple[int, int]],
    guests: Sequence[Graph],
    embeddings: Sequence[Embedding],
    host_n: Optional[int] = None,
    sliced: Optional[SlicedHost] = None,
    instances: Optional[Sequence[InstanceGraph]] = None,
    batch_layer: Optional[Dict[int, int]] = None,
) -> VerifyReport:
    """Full independent check of a claimed packing.

    Checks, per embedding: totality over non-isolated guest vertices,
    injectivity, the homomorphism property into `host_edges`, and global
    pairwise edge-disjointness.  When the sliced host and the instance
    decompositions are supplied, every used edge is also classified by
    phase and checked against the layer that phase is entitled to.
    """
    findings: List[tuple] = []
    if host_n is None:
        host_n = 1 + max((max(u, v) for u, v in host_edges), default=0)
    norm_host = {(min(u, v), max(u, v)) for u, v in host_edges}
    used: Dict[int, Tuple[int, int, int]] = {}  # pair idx -> (instance, gu, gv)
    vertex_spread = [0] * host_n
    pair_spread: Dict[int, int] = {}

    for i, (guest, emb) in enumerate(zip(guests, embeddings)):
        img = list(emb.map.values())
        if len(set(img)) != len(img):
            findings.append(("not_injective", i))
        for v in guest.non_isolated():
            if v not in emb.map:
                findings.append(("not_total", i, v))
        for hv in img:
            if not (0 <= hv < host_n):
                findings.append(("range_out_of_range", i, hv))
        touched: Set[int] = set()
        for u, v in guest.edges():
            if u not in emb.map or v not in emb.map:
                continue
            hu, hv = emb.map[u], emb.map[v]
            if hu == hv:
                findings.append(("collapsed_edge", i, u, v))
                continue
            e = (min(hu, hv), max(hu, hv))
            if e not in norm_host:
                findings.append(("edge_outside_host", i, u, v, hu, hv))
            idx = pair_index(hu, hv, host_n)
            if idx in used and used[idx][0] != i:
                findings.append(("edge_reused", used[idx][0], i, e))
            used[idx] = (i, u, v)
            touched.add(hu)
            touched.add(hv)
        for hv in touched:
            vertex_spread[hv] += 1
        for a, b in itertools.combinations(sorted(touched), 2):
            if len(touched) > 60:
                break
            k = pair_index(a, b, host_n)
            pair_spread[k] = pair_spread.get(k, 0) + 1

    phase_violations = 0
    if sliced is not None and instances is not None:
        zones = sliced.zones
        for i, (inst, emb) in enumerate(zip(instances, embeddings)):
            k = (batch_layer or {}).get(i, 1)
            zone = zones[k - 1] if zones else set()
            for u, v in inst.graph.edges():
                if u not in emb.map or v not in emb.map:
                    continue
                hu, hv = emb.map[u], emb.map[v]
                if u in inst.two_independent or v in inst.two_independent:
                    ok = sliced.layers[0].has_edge(hu, hv)
                    tag = "phase3_outside_reserved"
                elif u in inst.separator or v in inst.separator:
                    ok = sliced.layers[k].has_edge(hu, hv) and (
                        hu in zone or hv in zone
                    )
                    tag = "phase2_outside_zone_layer"
                else:
                    ok = sliced.layers[k].has_edge(hu, hv) and not (
                        hu in zone or hv in zone
                    )
                    tag = "phase1_outside_layer"
                if not ok:
                    phase_violations += 1
                    findings.append((tag, i, u, v, hu, hv))

    total_guest_edges = sum(g.m for g in guests)
    density = total_guest_edges / len(norm_host) if norm_host else 0.0
    return VerifyReport(
        valid=not findings,
        findings=findings,
        density=density,
        used_edges=len(used),
        max_vertex_spread=max(vertex_spread, default=0),
        max_pair_spread=max(pair_spread.values(), default=0),
        phase_violations=phase_violations,
    )


def brute_force_pack(
    guests: Sequence[Graph],
    host_n: int,
    budget: int = 2_000_000,
) -> Tuple[str, Optional[List[Embedding]]]:
    """Exhaustive packing search for tiny hosts.

    Returns ("feasible", embeddings), ("infeasible", None), or
    ("budget_exhausted", None).  Sound and complete within the budget.
    When the guests must use every host edge, each guest placement is
    forced to cover the smallest currently-unused host edge, which prunes
    the symmetric branches without losing completeness.
    """
    order = sorted(range(len(guests)), key=lambda i: (-guests[i].m, i))
    total_edges = sum(g.m for g in guests)
    all_pairs = host_n * (host_n - 1) // 2
    perfect = total_edges == all_pairs
    used: Set[int] = set()
    steps = [0]
    solution: List[Optional[Dict[int, int]]] = [None] * len(guests)

    def smallest_unused() -> Optional[Tuple[int, int]]:
        for u in range(host_n):
            for v in range(u + 1, host_n):
                if pair_index(u, v, host_n) not in used:
                    return (u, v)
        return None

    def guest_maps(g: Graph, must_cover: Optional[Tuple[int, int]]):
        """All injective edge-free placements of g's non-isolated part."""
        verts = g.non_isolated()
        # BFS order for early pruning
        vorder: List[int] = []
        seen: Set[int] = set()
        for s in verts:
            if s in seen:
                continue
            queue = [s]
            seen.add(s)
            while queue:
                x = queue.pop(0)
                vorder.append(x)
                for w in sorted(g.adj[x]):
                    if w not in seen:
                        seen.add(w)
                        queue.append(w)
        placement: Dict[int, int] = {}
        taken: Set[int] = set()
        yield_maps: List[Dict[int, int]] = []
        used_plus = used

        def rec2(pos: int) -> None:
            steps[0] += 1
            if steps[0] > budget:
                raise TimeoutError
            if pos == len(vorder):
                if must_cover is not None:
                    a, b = must_cover
                    inv = {hv: gv for gv, hv in placement.items()}
                    if not (a in inv and b in inv and g.has_edge(inv[a], inv[b])):
                        return
                yield_maps.append(dict(placement))
                return
            gv = vorder[pos]
            for hv in range(host_n):
                if hv in taken:
                    continue
                bad = False
                for w in g.adj[gv]:
                    if w in placement and pair_index(placement[w], hv, host_n) in used_plus:
                        bad = True
                        break
                if not bad:
                    placement[gv] = hv
                    taken.add(hv)
                    rec2(pos + 1)
                    del placement[gv]
                    taken.discard(hv)

        rec2(0)
        return yield_maps

    def solve(gi: int) -> bool:
        if gi == len(order):
            return True
        g = guests[order[gi]]
        must = smallest_unused() if perfect and g.m > 0 else None
        for placement in guest_maps(g, must):
            pairs = [
                pair_index(placement[u], placement[v], host_n) for u, v in g.edges()
            ]
            if len(set(pairs)) != len(pairs):
                continue
            for p in pairs:
                used.add(p)
            solution[order[gi]] = placement
            if solve(gi + 1):
                return True
            solution[order[gi]] = None
            for p in pairs:
                used.discard(p)
        return False

    try:
        ok = solve(0)
    except TimeoutError:
        return ("budget_exhausted", None)
    if not ok:
        return ("infeasible", None)
    embeddings = []
    for i, g in enumerate(guests):
        emb = Embedding(instance_id=i, map=dict(solution[i] or {}))
        # park isolated vertices on distinct unused host slots
        free = iter(v for v in range(host_n) if v not in emb.image())
        for v in range(g.n):
            if v not in emb.map and not g.adj[v]:
                try:
                    emb.extend(v, next(free))
                except StopIteration:
                    break
        embeddings.append(emb)
    return ("feasible", embeddings)


def divisibility_check(h: Graph, n: int) -> Tuple[bool, List[str]]:
    """Necessary conditions for perfectly packing copies of h into K_n."""
    if h.m < 1:
        raise ValueError("h must have at least one edge")
    reasons = []
    total = n * (n - 1) // 2
    if total % h.m != 0:
        reasons.append(f"e(H)={h.m} does not divide C({n},2)={total}")
    degs = [h.degree(v) for v in h.non_isolated()]
    g = 0
    for d in degs:
        g = math.gcd(g, d)
    if g and (n - 1) % g != 0:
        reasons.append(f"gcd(H)={g} does not divide n-1={n - 1}")
    return (not reasons, reasons)
