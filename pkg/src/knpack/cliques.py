"""Phase I machinery: clique factors, hypergraph coloring, per-cell packing."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from random import Random
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .balance import ToleranceUnmet, WeightVector, balanced_partition, split_components
from .graph import (
    Embedding,
    Graph,
    LedgerConflict,
    PackingLedger,
    connected_components,
    validate_embedding,
)
from .instances import InstanceGraph
from .slicer import PipelineConstants, SlicedHost, derive_seed


class InsufficientFactors(Exception):
    def __init__(self, achieved: int, wanted: int):
        super().__init__(f"found {achieved} factors, wanted {wanted}")
        self.achieved = achieved
        self.wanted = wanted


class CellPackingFailed(Exception):
    pass


class SpreadViolation(Exception):
    def __init__(self, what: str, value: float, cap: float):
        super().__init__(f"{what}: {value} exceeds cap {cap}")
        self.what = what
        self.value = value
        self.cap = cap


@dataclass
class CliqueFactor:
    """Pairwise vertex-disjoint clique cells extracted from one layer."""

    cells: List[Tuple[int, ...]]
    factor_id: int

    def vertices(self) -> Set[int]:
        return {v for cell in self.cells for v in cell}


@dataclass
class CliqueHypergraph:
    ground_size: int
    hyperedges: List[Tuple[int, ...]]
    per_edge_counts: Dict[Tuple[int, int], int] = field(default_factory=dict)
    per_vertex_counts: Dict[int, int] = field(default_factory=dict)
    max_pair_cocount: int = 0

    def max_degree(self) -> int:
        return max(self.per_edge_counts.values(), default=0)

    def min_degree(self) -> int:
        return min(self.per_edge_counts.values(), default=0)


def enumerate_cliques(g: Graph, ell: int) -> CliqueHypergraph:
    """All ell-cliques of g, with the containment statistics per edge/vertex."""
    if ell < 2:
        raise ValueError("ell must be >= 2")
    cliques: List[Tuple[int, ...]] = []
    if ell == 2:
        cliques = [e for e in g.edges()]
    else:
        masks = g.bitmasks()

        def extend(base: List[int], cand: int) -> None:
            if len(base) == ell:
                cliques.append(tuple(base))
                return
            m = cand
            while m:
                low = m & -m
                v = low.bit_length() - 1
                m ^= low
                extend(base + [v], cand & masks[v] & ~((1 << (v + 1)) - 1))

        for u in range(g.n):
            extend([u], masks[u] & ~((1 << (u + 1)) - 1))

    per_edge: Dict[Tuple[int, int], int] = {e: 0 for e in g.edges()}
    per_vertex: Dict[int, int] = {v: 0 for v in range(g.n)}
    for cl in cliques:
        for v in cl:
            per_vertex[v] += 1
        for u, v in itertools.combinations(cl, 2):
            per_edge[(u, v) if u < v else (v, u)] += 1
    # max co-count over pairs of distinct edges sharing a clique
    pair_counts: Dict[Tuple[Tuple[int, int], Tuple[int, int]], int] = {}
    max_co = 0
    if len(cliques) and ell >= 3:
        for cl in cliques:
            edges = [tuple(sorted(e)) for e in itertools.combinations(cl, 2)]
            for a, b in itertools.combinations(edges, 2):
                key = (a, b)
                pair_counts[key] = pair_counts.get(key, 0) + 1
                max_co = max(max_co, pair_counts[key])
    return CliqueHypergraph(
        ground_size=g.n,
        hyperedges=cliques,
        per_edge_counts=per_edge,
        per_vertex_counts=per_vertex,
        max_pair_cocount=max_co,
    )


def proper_hyperedge_coloring(
    hyperedges: Sequence[Tuple[int, ...]],
    seed: int = 0,
    reduction_passes: int = 2,
) -> List[int]:
    """Greedy proper coloring: hyperedges sharing a ground element conflict.

    Hard guarantee: properness.  The reduction passes try to empty the
    largest color indices by recoloring their members lower.
    """
    rng = Random(seed)
    order = list(range(len(hyperedges)))
    rng.shuffle(order)
    element_colors: Dict[int, Set[int]] = {}
    colors = [-1] * len(hyperedges)

    def conflict_set(he: Tuple[int, ...]) -> Set[int]:
        out: Set[int] = set()
        for x in he:
            out |= element_colors.get(x, set())
        return out

    def assign(idx: int, color: int) -> None:
        colors[idx] = color
        for x in hyperedges[idx]:
            element_colors.setdefault(x, set()).add(color)

    def unassign(idx: int) -> None:
        c = colors[idx]
        colors[idx] = -1
        for x in hyperedges[idx]:
            # another incident hyperedge may share the color only if improper,
            # so removal is safe
            element_colors[x].discard(c)

    for idx in order:
        used = conflict_set(hyperedges[idx])
        c = 0
        while c in used:
            c += 1
        assign(idx, c)

    for _ in range(reduction_passes):
        ncolors = max(colors) + 1 if colors else 0
        moved = False
        for idx in range(len(hyperedges)):
            if colors[idx] < ncolors - ncolors // 4:
                continue
            old = colors[idx]
            unassign(idx)
            used = conflict_set(hyperedges[idx])
            c = 0
            while c in used:
                c += 1
            assign(idx, min(c, old) if c < old else old)
            if colors[idx] != old:
                moved = True
        if not moved:
            break
    return colors


def _bits(mask: int) -> List[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def _rand_bit(mask: int, rng: Random) -> int:
    bits = _bits(mask)
    return bits[rng.randrange(len(bits))]


def _try_cell(avail: List[int], universe: int, v: int, ell: int, rng: Random) -> Optional[Tuple[int, ...]]:
    """One randomized attempt to grow an ell-clique containing v."""
    if ell == 1:
        return (v,)
    for _ in range(8):
        clique = [v]
        cand = avail[v] & universe
        ok = True
        while len(clique) < ell:
            if not cand:
                ok = False
                break
            w = _rand_bit(cand, rng)
            clique.append(w)
            cand &= avail[w]
        if ok:
            return tuple(clique)
    return None


def _extract_factor_attempt(
    avail: List[int],
    allowed: int,
    ell: int,
    rng: Random,
    min_cells: int,
    repair_rounds: int = 4,
    order: Optional[List[int]] = None,
) -> List[Tuple[int, ...]]:
    """Greedy near-spanning factor extraction with swap repair."""
    universe = allowed
    cells: List[Tuple[int, ...]] = []
    if order is None:
        order = _bits(allowed)
        rng.shuffle(order)
    for v in order:
        if not (universe >> v) & 1:
            continue
        cell = _try_cell(avail, universe & ~(1 << v), v, ell, rng)
        if cell is not None:
            cells.append(cell)
            for w in cell:
                universe &= ~(1 << w)

    for _ in range(repair_rounds):
        leftovers = _bits(universe)
        if not leftovers:
            break
        progress = False
        rng.shuffle(leftovers)
        for u in leftovers:
            if not (universe >> u) & 1:
                continue
            # direct retry first (the universe may have changed)
            cell = _try_cell(avail, universe & ~(1 << u), u, ell, rng)
            if cell is not None:
                cells.append(cell)
                for w in cell:
                    universe &= ~(1 << w)
                progress = True
                continue
            # swap u into an existing cell, re-seating the displaced vertex
            cand_cells = list(range(len(cells)))
            rng.shuffle(cand_cells)
            done = False
            for ci in cand_cells[: min(len(cand_cells), 120)]:
                cell = cells[ci]
                for pos, w in enumerate(cell):
                    rest = [x for x in cell if x != w]
                    if all((avail[r] >> u) & 1 for r in rest):
                        # u replaces w; w must re-seat among leftovers
                        seat_universe = (universe | (1 << w)) & ~(1 << u)
                        new_cell = _try_cell(avail, seat_universe & ~(1 << w), w, ell, rng)
                        if new_cell is not None:
                            cells[ci] = tuple(rest + [u])
                            cells.append(new_cell)
                            universe = seat_universe
                            for x in new_cell:
                                universe &= ~(1 << x)
                            done = True
                            progress = True
                            break
                if done:
                    break
        if not progress:
            break
    return cells


def clique_factor_collection(
    layer: Graph,
    ell: int,
    epsilon: float,
    seed: int,
    count: Optional[int] = None,
    min_cells: Optional[int] = None,
    allowed_vertices: Optional[Set[int]] = None,
    min_factors: int = 0,
    restarts: int = 30,
    method: str = "sequential",
) -> Tuple[List[CliqueFactor], Dict[str, float]]:
    """Edge-disjoint near-spanning clique factors of one layer.

    The sequential method repeatedly extracts a factor from the remaining
    edges (greedy + swap repair, restarts on shortfall).  The coloring
    method follows the two-stage hypergraph-coloring construction and is
    practical at small sizes.
    """
    n = layer.n
    allowed_set = allowed_vertices if allowed_vertices is not None else set(range(n))
    allowed = 0
    for v in allowed_set:
        allowed |= 1 << v
    nv = len(allowed_set)
    pairs = nv * (nv - 1) / 2
    density = (layer.m / pairs) if pairs else 0.0
    if count is None:
        count = max(1, int((1 - epsilon) * nv * density / max(1, ell - 1)))
    if min_cells is None:
        min_cells = max(1, int((1 - epsilon) * nv / ell))
    factors: List[CliqueFactor] = []
    if method == "coloring":
        factors = _factors_by_coloring(layer, ell, seed, count, min_cells, allowed_set)
    else:
        base_masks = layer.bitmasks()
        collection_restarts = 8
        best_factors: List[CliqueFactor] = []
        for coll_attempt in range(collection_restarts):
            rng = Random(derive_seed(seed, f"factors-{coll_attempt}"))
            avail = [base_masks[v] & allowed for v in range(n)]
            factors = []
            cover = [0] * n
            while len(factors) < count:
                best: List[Tuple[int, ...]] = []
                for _ in range(restarts):
                    # visit under-covered vertices first so coverage evens out
                    order = sorted(allowed_set, key=lambda v: (cover[v], rng.random()))
                    cells = _extract_factor_attempt(avail, allowed, ell, rng, min_cells, order=order)
                    if len(cells) > len(best):
                        best = cells
                    if len(best) * ell >= nv - (nv % ell):
                        break
                if len(best) < min_cells:
                    break
                factors.append(CliqueFactor(cells=best, factor_id=len(factors)))
                for cell in best:
                    for v in cell:
                        cover[v] += 1
                    for u, v in itertools.combinations(cell, 2):
                        avail[u] &= ~(1 << v)
                        avail[v] &= ~(1 << u)
            if len(factors) > len(best_factors):
                best_factors = factors
            if len(best_factors) >= count:
                break
        factors = best_factors

    if len(factors) < min_factors:
        raise InsufficientFactors(len(factors), min_factors)
    coverage = [0] * n
    for f in factors:
        for v in f.vertices():
            coverage[v] += 1
    nf = max(1, len(factors))
    cov_fracs = [coverage[v] / nf for v in allowed_set]
    stats = {
        "factors": float(len(factors)),
        "min_coverage_fraction": min(cov_fracs, default=0.0),
        "mean_coverage_fraction": (sum(cov_fracs) / len(cov_fracs)) if cov_fracs else 0.0,
        "mean_cells": (sum(len(f.cells) for f in factors) / nf) if factors else 0.0,
    }
    return factors, stats


def _factors_by_coloring(
    layer: Graph,
    ell: int,
    seed: int,
    count: int,
    min_cells: int,
    allowed_set: Set[int],
) -> List[CliqueFactor]:
    """Two-stage construction: color clique-edge conflicts, harvest an
    edge-disjoint clique collection, then color vertex conflicts into factors."""
    sub = Graph(layer.n)
    for u, v in layer.edges():
        if u in allowed_set and v in allowed_set:
            sub.add_edge(u, v)
    hyper = enumerate_cliques(sub, ell)
    if not hyper.hyperedges:
        return []
    edge_ids = {e: i for i, e in enumerate(sub.edges())}
    as_edge_sets = [
        tuple(edge_ids[tuple(sorted(p))] for p in itertools.combinations(cl, 2))
        for cl in hyper.hyperedges
    ]
    colors = proper_hyperedge_coloring(as_edge_sets, seed=derive_seed(seed, "stage-a"))
    classes: Dict[int, List[int]] = {}
    for i, c in enumerate(colors):
        classes.setdefault(c, []).append(i)
    # harvest: scan classes largest-first, keep cliques whose edges are free
    used_edges: Set[int] = set()
    collection: List[Tuple[int, ...]] = []
    for c in sorted(classes, key=lambda c: -len(classes[c])):
        for i in classes[c]:
            if all(e not in used_edges for e in as_edge_sets[i]):
                collection.append(hyper.hyperedges[i])
                used_edges.update(as_edge_sets[i])
    # stage b: group the collection into vertex-disjoint factors
    vertex_colors = proper_hyperedge_coloring(collection, seed=derive_seed(seed, "stage-b"))
    groups: Dict[int, List[Tuple[int, ...]]] = {}
    for cl, c in zip(collection, vertex_colors):
        groups.setdefault(c, []).append(cl)
    ordered = sorted(groups.values(), key=len, reverse=True)
    factors = [
        CliqueFactor(cells=list(cells), factor_id=i)
        for i, cells in enumerate(ordered)
        if len(cells) >= min_cells
    ]
    return factors[:count]


def _components_with_edges(g: Graph) -> List[Tuple[Set[int], List[Tuple[int, int]]]]:
    comps = connected_components(g)
    out = []
    for comp in comps:
        edges = [(u, v) for u in comp for v in g.adj[u] if u < v]
        out.append((comp, edges))
    return out


def _place_component(
    comp: Set[int],
    edges: List[Tuple[int, int]],
    free_vertices: List[int],
    ledger: PackingLedger,
    rng: Random,
    budget: int,
) -> Optional[Dict[int, int]]:
    """Backtracking placement of one component onto free cell vertices."""
    comp_order = sorted(comp)
    adj: Dict[int, List[int]] = {v: [] for v in comp_order}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    # BFS order so each vertex lands next to an already-placed neighbour
    order: List[int] = []
    seen: Set[int] = set()
    for start in comp_order:
        if start in seen:
            continue
        queue = [start]
        seen.add(start)
        while queue:
            u = queue.pop(0)
            order.append(u)
            for w in sorted(adj[u]):
                if w not in seen:
                    seen.add(w)
                    queue.append(w)

    placement: Dict[int, int] = {}
    used: Set[int] = set()
    attempts = [0]

    def feasible(gv: int, hv: int) -> bool:
        for w in adj[gv]:
            if w in placement:
                hw = placement[w]
                if ledger.uses(hv, hw):
                    return False
        return True

    def backtrack(pos: int) -> bool:
        if pos == len(order):
            return True
        attempts[0] += 1
        if attempts[0] > budget:
            return False
        gv = order[pos]
        cands = [hv for hv in free_vertices if hv not in used and feasible(gv, hv)]
        rng.shuffle(cands)
        for hv in cands:
            placement[gv] = hv
            used.add(hv)
            if backtrack(pos + 1):
                return True
            del placement[gv]
            used.discard(hv)
        return False

    if backtrack(0):
        return dict(placement)
    return None


def pack_into_clique(
    cell_size: int,
    guests: Sequence[Graph],
    seed: int = 0,
    restarts: int = 20,
    backtrack_budget: int = 4000,
) -> List[Embedding]:
    """Edge-disjoint embeddings of the guests into a fresh complete cell.

    Randomized greedy, component by component, with per-guest backtracking
    and bounded whole-cell restarts.
    """
    order = sorted(range(len(guests)), key=lambda i: (-guests[i].m, i))
    for attempt in range(restarts):
        rng = Random(derive_seed(seed, f"cell-{attempt}"))
        ledger = PackingLedger(cell_size)
        embeddings: Dict[int, Embedding] = {}
        ok = True
        for gi in order:
            guest = guests[gi]
            emb = Embedding(instance_id=gi)
            failed = False
            for comp, edges in _components_with_edges(guest):
                if len(comp) == 1 and not edges:
                    # isolated vertices need a slot but no edges
                    free = [v for v in range(cell_size) if v not in emb.image()]
                    if not free:
                        failed = True
                        break
                    emb.extend(next(iter(comp)), free[0])
                    continue
                free = [v for v in range(cell_size) if v not in emb.image()]
                placement = _place_component(comp, edges, free, ledger, rng, backtrack_budget)
                if placement is None:
                    failed = True
                    break
                for gv, hv in placement.items():
                    emb.extend(gv, hv)
                ledger.commit_edges(
                    [(placement[u], placement[v]) for u, v in edges]
                )
            if failed:
                ok = False
                break
            embeddings[gi] = emb
        if ok:
            return [embeddings[i] for i in range(len(guests))]
    raise CellPackingFailed(f"no packing after {restarts} restarts")


def merge_small_graphs(
    guests: Sequence[Graph],
    ell: int,
    epsilon: float,
    K: int,
    C: int = 8,
    seed: int = 0,
) -> Tuple[List[Graph], Dict[int, Set[int]]]:
    """Reduce a guest list by disjoint unions and bucket superpositions.

    Phase one repeatedly merges two graphs with few edges by disjoint union;
    phase two edge-disjointly superposes triples of mid-size graphs bucket
    by bucket.  Returns the new list plus provenance (output -> input ids).
    """
    small_cap = (1 - epsilon) * ell / 4
    mid_cap = (1 - epsilon) * 3 * ell / 4

    def strip(g: Graph) -> Graph:
        live = sorted(g.non_isolated())
        relabel = {v: i for i, v in enumerate(live)}
        return Graph(len(live), [(relabel[u], relabel[v]) for u, v in g.edges()])

    work: List[Tuple[Graph, Set[int]]] = [(strip(g), {i}) for i, g in enumerate(guests)]

    def disjoint_union(a: Graph, b: Graph) -> Graph:
        g = Graph(a.n + b.n)
        for u, v in a.edges():
            g.add_edge(u, v)
        for u, v in b.edges():
            g.add_edge(a.n + u, a.n + v)
        return g

    # phase one: unions of small graphs
    while True:
        smalls = [i for i, (g, _) in enumerate(work) if g.m <= small_cap]
        if len(smalls) < 2:
            break
        i, j = smalls[0], smalls[1]
        merged = (disjoint_union(work[i][0], work[j][0]), work[i][1] | work[j][1])
        work[j] = merged
        del work[i]

    # phase two: superpose triples of mid-size graphs
    rng = Random(derive_seed(seed, "merge"))
    c_local = C
    while True:
        mids = [i for i, (g, _) in enumerate(work) if small_cap < g.m <= mid_cap]
        if len(mids) < 3:
            break
        i, j, k = mids[0], mids[1], mids[2]
        r = max(1, int((1 - epsilon / 2) * ell / (c_local * K)))
        bucket_cap = int((1 - epsilon / 4) * c_local * K)

        def buckets(g: Graph) -> List[Graph]:
            groups: List[List[Set[int]]] = [[] for _ in range(r)]
            loads = [0] * r
            comps = sorted(connected_components(g), key=len, reverse=True)
            for comp in comps:
                q = min(range(r), key=lambda x: (loads[x], x))
                if loads[q] + len(comp) > bucket_cap:
                    raise CellPackingFailed("bucket overflow")
                groups[q].append(comp)
                loads[q] += len(comp)
            out = []
            for grp in groups:
                verts = sorted(v for c in grp for v in c)
                relabel = {v: x for x, v in enumerate(verts)}
                out.append(
                    Graph(
                        len(verts),
                        [
                            (relabel[u], relabel[v])
                            for c in grp
                            for u in c
                            for v in g.adj[u]
                            if u < v and v in c
                        ],
                    )
                )
            return out

        try:
            bi, bj, bk = buckets(work[i][0]), buckets(work[j][0]), buckets(work[k][0])
            pieces: List[Graph] = []
            for m in range(r):
                trio = [bi[m], bj[m], bk[m]]
                embs = pack_into_clique(c_local * K, trio, seed=rng.getrandbits(32))
                merged = Graph(c_local * K)
                for g, emb in zip(trio, embs):
                    for u, v in g.edges():
                        merged.add_edge(emb.map[u], emb.map[v])
                pieces.append(strip(merged))
            total = pieces[0]
            for piece in pieces[1:]:
                total = disjoint_union(total, piece)
            work.append((total, work[i][1] | work[j][1] | work[k][1]))
            for idx in sorted((i, j, k), reverse=True):
                del work[idx]
        except (CellPackingFailed, LedgerConflict):
            c_local *= 2  # retry with a larger superposition constant
            if c_local > 64 * C:
                raise

    provenance = {out_idx: members for out_idx, (_, members) in enumerate(work)}
    return [g for g, _ in work], provenance


def _ffd_cells(
    comps: List[Set[int]], b: int, ell: int
) -> Optional[List[List[Set[int]]]]:
    """Best-fit decreasing assignment of components into b cells of size ell."""
    order = sorted(range(len(comps)), key=lambda i: (-len(comps[i]), i))
    cells: List[List[Set[int]]] = [[] for _ in range(b)]
    loads = [0] * b
    for i in order:
        s = len(comps[i])
        best = -1
        for j in range(b):
            if loads[j] + s <= ell and (best < 0 or loads[j] > loads[best]):
                best = j
        if best < 0:
            return None
        cells[best].append(comps[i])
        loads[best] += s
    return cells


def _bin_demand(comps: List[Set[int]], ell: int) -> int:
    """Cells needed to host the components at capacity ell (FFD estimate)."""
    if not comps:
        return 0
    cells = _ffd_cells(comps, len(comps), ell)
    return sum(1 for c in cells if c)


def _part_components(inst: InstanceGraph) -> List[Set[int]]:
    excluded = inst.separator | inst.two_independent
    comps = connected_components(inst.graph, exclude=excluded)
    return [c for c in comps if c]


@dataclass
class LayerPackReport:
    factors: int
    mean_cells: float
    max_anchor_hits: int
    max_complement_hits: int
    max_pair_hits: int
    anchor_cap: float
    complement_cap: float
    pair_cap: float
    violations: int


def pack_layer(
    host: SlicedHost,
    k: int,
    batch: Sequence[Tuple[int, InstanceGraph]],
    ledger: PackingLedger,
    seed: int,
    cap_slack: float = 2.0,
    enforce_caps: bool = False,
    factor_restarts: int = 30,
) -> Tuple[Dict[int, Embedding], LayerPackReport]:
    """Pack the parts G_i - S_i - I_i of one batch into layer k.

    Realizes the factor pipeline: factor extraction, balanced assignment of
    instances to factors, component spread over cells, per-cell embedding,
    then a uniform cell permutation composed into every embedding.
    """
    c = host.constants
    layer_view = host.phase1_graph(k)
    zone = host.zones[k - 1] if host.zones else set()
    allowed = set(range(c.n)) - zone
    rng = Random(derive_seed(seed, f"layer-{k}"))

    parts = []
    for inst_id, inst in batch:
        pv = inst.part_vertices()
        parts.append((inst_id, inst, pv))
    if not parts:
        return {}, LayerPackReport(0, 0.0, 0, 0, 0, 0.0, 0.0, 0.0, 0)

    # one factor per instance at desk scale; each factor needs enough cells
    # to bin-pack the instance's components at capacity ell
    demands = {
        inst_id: _bin_demand(_part_components(inst), c.ell)
        for inst_id, inst, _ in parts
    }
    min_cells = max(1, max(demands.values()))
    if min_cells * c.ell > len(allowed):
        raise CellPackingFailed(
            f"component bin demand {min_cells} exceeds {len(allowed)} non-zone vertices"
        )
    factors, fstats = clique_factor_collection(
        layer_view,
        c.ell,
        c.epsilon,
        seed=derive_seed(seed, f"layer-{k}-factors"),
        count=len(parts),
        min_cells=min_cells,
        allowed_vertices=allowed,
        min_factors=len(parts),
        restarts=factor_restarts,
    )

    # balanced assignment of instances to factors (one each, heaviest first)
    order = sorted(range(len(parts)), key=lambda i: (-parts[i][1].graph.m, i))
    factor_order = sorted(range(len(factors)), key=lambda s: (-len(factors[s].cells), s))
    embeddings: Dict[int, Embedding] = {}
    for rank, pi in enumerate(order):
        inst_id, inst, pv = parts[pi]
        factor = factors[factor_order[rank]]
        part_graph = inst.graph
        b = len(factor.cells)
        try:
            cells_assignment, _ = split_components(
                part_graph,
                pv,
                inst.anchors_S,
                inst.anchors_I,
                inst.component_bound,
                b,
                tolerance=float(c.n),
                seed=derive_seed(seed, f"split-{k}-{inst_id}"),
                vertex_cap=c.ell,
            )
        except ToleranceUnmet:
            # the balanced split could not respect the vertex cap; fall back
            # to a plain best-fit decreasing bin packing
            ffd = _ffd_cells(_part_components(inst), b, c.ell)
            if ffd is None:
                raise CellPackingFailed(
                    f"instance {inst_id} does not bin-pack into {b} cells"
                )
            cells_assignment = ffd
        emb = Embedding(instance_id=inst_id, phase="phase1")
        pairs: List[Tuple[int, int]] = []
        for j, comps in enumerate(cells_assignment):
            if not comps:
                continue
            cell = list(factor.cells[j])
            # uniform cell automorphism composed into the placement
            perm = list(range(len(cell)))
            rng.shuffle(perm)
            cell = [cell[x] for x in perm]
            slot = 0
            for comp in comps:
                for gv in sorted(comp):
                    emb.extend(gv, cell[slot])
                    slot += 1
            for comp in comps:
                for u in comp:
                    for v in part_graph.adj[u]:
                        if u < v and v in comp:
                            pairs.append((emb.map[u], emb.map[v]))
        try:
            ledger.commit_edges(pairs)
        except LedgerConflict:
            raise CellPackingFailed("factor cells were not edge-disjoint")
        embeddings[inst_id] = emb

    # spread tallies: anchor hits (P1) and complement hits (P1)/(P2)
    anchor_hits = [0] * c.n
    comp_hits = [0] * c.n
    images: List[Tuple[Set[int], Set[int]]] = []
    for inst_id, inst, pv in parts:
        emb = embeddings[inst_id]
        img = emb.image()
        a_img = {emb.map[v] for v in inst.anchors_S if v in emb.map}
        b_img = {emb.map[v] for v in inst.anchors_I if v in emb.map}
        complement = (set(range(c.n)) - zone - img) | b_img
        for v in a_img:
            anchor_hits[v] += 1
        for v in complement:
            comp_hits[v] += 1
        images.append((a_img, complement))
    pair_rng = Random(derive_seed(seed, f"pairs-{k}"))
    max_pair = 0
    nonzone = sorted(allowed)
    for _ in range(min(200, len(nonzone) * (len(nonzone) - 1) // 2)):
        u, v = pair_rng.sample(nonzone, 2)
        cnt = sum(1 for _, comp in images if u in comp and v in comp)
        max_pair = max(max_pair, cnt)

    anchor_cap = cap_slack * 6 * c.max_degree * c.delta * c.gamma**2 * c.n
    comp_cap = cap_slack * 50 * c.max_degree * c.gamma**3 * c.n
    pair_cap = cap_slack * 200 * c.max_degree**2 * c.gamma**4 * c.n
    report = LayerPackReport(
        factors=len(factors),
        mean_cells=fstats["mean_cells"],
        max_anchor_hits=max(anchor_hits),
        max_complement_hits=max(comp_hits),
        max_pair_hits=max_pair,
        anchor_cap=anchor_cap,
        complement_cap=comp_cap,
        pair_cap=pair_cap,
        violations=0,
    )
    if enforce_caps:
        if max(anchor_hits) > anchor_cap:
            raise SpreadViolation("anchor_hits", max(anchor_hits), anchor_cap)
        if max(comp_hits) > comp_cap:
            raise SpreadViolation("complement_hits", max(comp_hits), comp_cap)
        if max_pair > pair_cap:
            raise SpreadViolation("pair_hits", max_pair, pair_cap)
    return embeddings, report
