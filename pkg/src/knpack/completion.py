"""Phase II (separators into zones) and Phase III (matching completion)."""

from __future__ import annotations

import csv
import heapq
from dataclasses import dataclass, field
from random import Random
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from .graph import PHASE2, PHASE3, Embedding, Graph, LedgerConflict, PackingLedger
from .instances import InstanceGraph, InstanceSet
from .slicer import SlicedHost, derive_seed


class NoCandidate(Exception):
    def __init__(self, instance: int, vertex: int, trace: Dict[str, int]):
        super().__init__(f"instance {instance}, separator vertex {vertex}: {trace}")
        self.instance = instance
        self.vertex = vertex
        self.trace = trace


class AuxSizeMismatch(Exception):
    pass


class CompletionFailed(Exception):
    def __init__(self, instance: int):
        super().__init__(f"no eligible completion for instance {instance}")
        self.instance = instance


@dataclass
class PhaseState:
    sliced: SlicedHost
    instances: InstanceSet
    embeddings: Dict[int, Embedding]
    ledger: PackingLedger
    zone_load: Dict[Tuple[int, int], int] = field(default_factory=dict)
    assertion_failures: int = 0


def embed_separators(state: PhaseState, k: int, batch: Sequence[int], seed: int = 0) -> None:
    """Greedily map each separator vertex into zone k.

    A candidate zone vertex must be a common layer-k neighbour of the images
    of the already-embedded neighbours, must not collide with the instance's
    image, must not force an already-used host edge, and must sit below the
    zone load cap.  Tie-break: minimal load, then minimal index.
    """
    host = state.sliced
    c = host.constants
    zone = sorted(host.zones[k - 1]) if host.zones else []
    layer = host.layers[k]
    cap = c.zone_load_cap()
    for i in batch:
        inst = state.instances.instances[i]
        emb = state.embeddings[i]
        for v in sorted(inst.separator):
            placed_nbrs = [w for w in inst.graph.adj[v] if w in emb.map]
            image = emb.image()
            best: Optional[int] = None
            best_load = cap + 1
            trace = {"zone": len(zone), "common": 0, "fresh": 0, "under_cap": 0}
            for z in zone:
                if z in image:
                    continue
                if any(not layer.has_edge(emb.map[w], z) for w in placed_nbrs):
                    continue
                trace["common"] += 1
                if any(state.ledger.uses(emb.map[w], z) for w in placed_nbrs):
                    continue
                trace["fresh"] += 1
                load = state.zone_load.get((z, k), 0)
                if load >= cap:
                    continue
                trace["under_cap"] += 1
                if load < best_load:
                    best, best_load = z, load
            if best is None:
                raise NoCandidate(i, v, trace)
            emb.extend(v, best)
            state.ledger.commit_edges([(emb.map[w], best) for w in placed_nbrs])
            state.zone_load[(best, k)] = best_load + 1
            if state.zone_load[(best, k)] > cap:
                state.assertion_failures += 1


def check_balance(
    state: PhaseState,
    slack: float = 2.0,
    pair_samples: int = 200,
    seed: int = 0,
) -> Dict[str, float]:
    """Concentration counters over the partially built embeddings.

    For each host vertex, the number of instances whose neighbourhood-of-I
    image or image complement contains it; maxima compared (report-only)
    against gamma^0.9 * n and gamma^1.9 * n with the configured slack.
    """
    c = state.sliced.constants
    n = c.n
    per_vertex = [0] * n
    member_sets: List[Set[int]] = []
    for i, inst in enumerate(state.instances.instances):
        emb = state.embeddings.get(i)
        if emb is None:
            continue
        img = emb.image()
        nbr_img = {
            emb.map[w]
            for v in inst.two_independent
            for w in inst.graph.adj[v]
            if w in emb.map
        }
        members = nbr_img | (set(range(n)) - img)
        member_sets.append(members)
        for x in members:
            per_vertex[x] += 1
    rng = Random(derive_seed(seed, "balance-pairs"))
    max_pair = 0
    if n >= 2 and member_sets:
        for _ in range(pair_samples):
            u, v = rng.sample(range(n), 2)
            cnt = sum(1 for s in member_sets if u in s and v in s)
            max_pair = max(max_pair, cnt)
    vertex_cap = slack * (c.gamma**0.9) * n if c.gamma > 0 else float(len(member_sets))
    pair_cap = slack * (c.gamma**1.9) * n if c.gamma > 0 else float(len(member_sets))
    return {
        "max_vertex_count": float(max(per_vertex, default=0)),
        "max_pair_count": float(max_pair),
        "vertex_cap": vertex_cap,
        "pair_cap": pair_cap,
        "vertex_cap_ok": float(max(per_vertex, default=0) <= vertex_cap),
        "pair_cap_ok": float(max_pair <= pair_cap),
    }


@dataclass
class AuxBipartite:
    instance_id: int
    left_vertices: List[int]  # the I_i vertices, in ascending order
    left_sets: List[FrozenSet[int]]  # X = g_i(N(v)) per left vertex
    right: List[int]  # host vertices outside Im g_i
    edges: List[Set[int]]  # adjacency: left index -> set of right indices


@dataclass
class MatchingCollection:
    matchings: List[Dict[int, int]]  # left index -> right index
    shortfall: bool


def build_aux_bipartite(state: PhaseState, i: int) -> AuxBipartite:
    """Bipartite completion graph for instance i over the reserved layer.

    Left sets are image neighbourhoods of the I vertices; the right side is
    the image complement; (X, x) is an edge iff x is a reserved-layer
    neighbour of every member of X.  An empty X is adjacent to everything.
    """
    inst = state.instances.instances[i]
    emb = state.embeddings[i]
    layer0 = state.sliced.layers[0]
    n = state.sliced.constants.n
    left_vertices = sorted(inst.two_independent)
    left_sets = [
        frozenset(emb.map[w] for w in inst.graph.adj[v] if w in emb.map)
        for v in left_vertices
    ]
    img = emb.image()
    right = sorted(set(range(n)) - img)
    if len(left_vertices) != len(right):
        raise AuxSizeMismatch(
            f"instance {i}: |left|={len(left_vertices)} but |right|={len(right)}"
        )
    edges: List[Set[int]] = []
    for X in left_sets:
        row = {
            ri
            for ri, x in enumerate(right)
            if all(layer0.has_edge(y, x) for y in X)
        }
        edges.append(row)
    return AuxBipartite(i, left_vertices, left_sets, right, edges)


def filter_eligible(aux: AuxBipartite, ledger: PackingLedger) -> AuxBipartite:
    """Drop aux edges whose realization would reuse a committed host edge."""
    edges = [
        {
            ri
            for ri in row
            if not any(ledger.uses(y, aux.right[ri]) for y in aux.left_sets[li])
        }
        for li, row in enumerate(aux.edges)
    ]
    return AuxBipartite(aux.instance_id, aux.left_vertices, aux.left_sets, aux.right, edges)


def max_matching(adjacency: Sequence[Set[int]], n_right: int) -> Dict[int, int]:
    """Hopcroft-Karp maximum matching, deterministic given adjacency order.

    `adjacency[li]` holds right indices; returns left index -> right index.
    """
    INF = float("inf")
    n_left = len(adjacency)
    adj_sorted = [sorted(row) for row in adjacency]
    match_l = [-1] * n_left
    match_r = [-1] * n_right
    while True:
        # BFS layering from free left vertices
        dist = [INF] * n_left
        queue = [u for u in range(n_left) if match_l[u] == -1]
        for u in queue:
            dist[u] = 0
        found = False
        qi = 0
        while qi < len(queue):
            u = queue[qi]
            qi += 1
            for r in adj_sorted[u]:
                w = match_r[r]
                if w == -1:
                    found = True
                elif dist[w] is INF:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        if not found:
            break

        def dfs(u: int) -> bool:
            for r in adj_sorted[u]:
                w = match_r[r]
                if w == -1 or (dist[w] == dist[u] + 1 and dfs(w)):
                    match_l[u] = r
                    match_r[r] = u
                    return True
            dist[u] = INF
            return False

        for u in range(n_left):
            if match_l[u] == -1:
                dfs(u)
    return {u: match_l[u] for u in range(n_left) if match_l[u] != -1}


def edge_disjoint_perfect_matchings(aux: AuxBipartite, count: int) -> MatchingCollection:
    """Extract-and-delete up to `count` edge-disjoint perfect matchings."""
    n_left = len(aux.left_vertices)
    rows = [set(r) for r in aux.edges]
    out: List[Dict[int, int]] = []
    while len(out) < count:
        m = max_matching(rows, len(aux.right))
        if len(m) < n_left:
            break
        out.append(m)
        for li, ri in m.items():
            rows[li].discard(ri)
    return MatchingCollection(out, shortfall=len(out) < count)


def complete_embeddings(
    state: PhaseState,
    seed: int = 0,
    m_star: Optional[int] = None,
    retry_budget: int = 5,
) -> Dict[str, float]:
    """Phase III: finish every instance by realizing one eligible matching.

    Instances are processed in descending edge order.  For each, the
    eligible aux graph yields a collection of edge-disjoint perfect
    matchings; one is drawn uniformly and committed.  Commit conflicts
    burn a retry (rebuild aux against the fresher ledger).
    """
    c = state.sliced.constants
    if m_star is None:
        m_star = max(1, round((c.gamma**1.2) * c.n)) if c.gamma > 0 else 1
    rng = Random(derive_seed(seed, "phase3"))
    order = sorted(
        range(len(state.instances.instances)),
        key=lambda i: (-state.instances.instances[i].graph.m, i),
    )
    collection_sizes: List[int] = []
    for i in order:
        inst = state.instances.instances[i]
        if not inst.two_independent:
            collection_sizes.append(0)
            continue
        done = False
        for _ in range(retry_budget):
            aux = filter_eligible(build_aux_bipartite(state, i), state.ledger)
            coll = edge_disjoint_perfect_matchings(aux, m_star)
            if not coll.matchings:
                continue
            matching = coll.matchings[rng.randrange(len(coll.matchings))]
            emb = state.embeddings[i]
            pairs = []
            for li, ri in matching.items():
                x = aux.right[ri]
                pairs.extend((y, x) for y in aux.left_sets[li])
            try:
                state.ledger.commit_edges(pairs)
            except LedgerConflict:
                state.assertion_failures += 1
                continue
            for li, ri in matching.items():
                emb.extend(aux.left_vertices[li], aux.right[ri])
            collection_sizes.append(len(coll.matchings))
            done = True
            break
        if not done:
            raise CompletionFailed(i)
    return {
        "mean_collection_size": (
            sum(collection_sizes) / len(collection_sizes) if collection_sizes else 0.0
        ),
        "min_collection_size": float(min(collection_sizes, default=0)),
        "m_star": float(m_star),
    }


def estimate_resilience(
    n: int,
    p: float,
    deletion_fraction: float,
    trials: int,
    seed: int = 0,
) -> Dict[str, float]:
    """Empirical local-resilience probe for perfect matchings in B(n, p).

    The adversary holds a per-vertex budget of floor(f * np / 2) deletions
    and greedily removes edges at a currently-minimum-degree right vertex,
    cutting the tie toward high-degree left endpoints.
    """
    if not (0.0 <= deletion_fraction < 1.0):
        raise ValueError("deletion_fraction must be in [0, 1)")
    budget_per_vertex = int(deletion_fraction * n * p / 2)
    survived = 0
    rows: List[Tuple[int, float, float, int, int, int]] = []
    for trial in range(trials):
        rng = Random(derive_seed(seed, f"resilience-{trial}"))
        adj: List[Set[int]] = [set() for _ in range(n)]  # left -> right
        radj: List[Set[int]] = [set() for _ in range(n)]
        for u in range(n):
            for v in range(n):
                if rng.random() < p:
                    adj[u].add(v)
                    radj[v].add(u)
        spent_l = [0] * n
        spent_r = [0] * n
        heap = [(len(radj[v]), v) for v in range(n)]
        heapq.heapify(heap)
        while heap:
            deg, v = heapq.heappop(heap)
            if deg != len(radj[v]):
                heapq.heappush(heap, (len(radj[v]), v))
                continue
            if spent_r[v] >= budget_per_vertex or not radj[v]:
                continue
            nbrs = [u for u in radj[v] if spent_l[u] < budget_per_vertex]
            if not nbrs:
                continue
            u = max(nbrs, key=lambda x: (len(adj[x]), x))
            adj[u].discard(v)
            radj[v].discard(u)
            spent_l[u] += 1
            spent_r[v] += 1
            heapq.heappush(heap, (len(radj[v]), v))
        m = max_matching(adj, n)
        ok = int(len(m) == n)
        survived += ok
        rows.append((n, p, deletion_fraction, trial, ok, seed))
    stats = {
        "trials": float(trials),
        "survived": float(survived),
        "survival_rate": survived / trials if trials else 0.0,
        "budget_per_vertex": float(budget_per_vertex),
    }
    stats["rows"] = rows  # type: ignore[assignment]
    return stats


def write_resilience_csv(stats: Dict[str, float], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "p", "deletion_fraction", "trial", "pm_survived", "seed"])
        for row in stats["rows"]:  # type: ignore[index]
            writer.writerow(row)
