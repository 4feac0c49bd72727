"""Input collections: generators, separators, 2-independent sets, normalization."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from random import Random
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .graph import Graph, connected_components, read_graph, write_graph


class InfeasibleSelection(Exception):
    """Greedy 2-independent scan ran out of vertices before reaching m."""

    def __init__(self, requested: int, found: int):
        super().__init__(f"requested {requested}, greedy found only {found}")
        self.requested = requested
        self.found = found


class UnsupportedFamily(Exception):
    """find_separator got a graph outside the supported separable families."""


@dataclass
class InstanceGraph:
    """One input graph together with its separator and completion structure.

    anchors_S / anchors_I live in G - S - I and are the neighbourhoods of the
    separator and of the 2-independent set there.
    """

    graph: Graph
    separator: Set[int] = field(default_factory=set)
    two_independent: Set[int] = field(default_factory=set)
    anchors_S: Set[int] = field(default_factory=set)
    anchors_I: Set[int] = field(default_factory=set)
    component_bound: int = 1

    def part_vertices(self) -> Set[int]:
        """Vertices of G - S - I (the Phase I part)."""
        out = set(range(self.graph.n))
        out -= self.separator
        out -= self.two_independent
        return out

    def compute_anchors(self) -> None:
        g = self.graph
        part = self.part_vertices()
        self.anchors_S = {v for s in self.separator for v in g.adj[s] if v in part}
        self.anchors_I = {v for i in self.two_independent for v in g.adj[i] if v in part}


@dataclass
class InstanceSet:
    instances: List[InstanceGraph]
    n: int
    max_degree: int
    total_edges: int
    provenance: Dict[int, int] = field(default_factory=dict)


def gen_bounded_tree(n: int, dmax: int, seed: int) -> Graph:
    """Random labelled tree on n vertices with maximum degree <= dmax.

    Random attachment with degree-cap rejection; deterministic per seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n >= 3 and dmax < 2:
        raise ValueError("max degree < 2 cannot host a tree on >= 3 vertices")
    rng = Random(seed)
    g = Graph(n)
    if n == 1:
        return g
    open_slots = [0]  # vertices with remaining degree capacity
    g.add_edge(0, 1)
    if dmax >= 2:
        open_slots.append(1)
    if n > 2 and g.degree(0) >= dmax:
        open_slots.remove(0)
    for v in range(2, n):
        idx = rng.randrange(len(open_slots))
        parent = open_slots[idx]
        g.add_edge(parent, v)
        if g.degree(parent) >= dmax:
            # swap-remove keeps the pick O(1)
            open_slots[idx] = open_slots[-1]
            open_slots.pop()
        if g.degree(v) < dmax:
            open_slots.append(v)
    return g


def gen_tpc_sequence(n: int, dmax: int, lo: int, seed: int) -> List[Graph]:
    """Trees T_lo .. T_n with v(T_i) = i, each with maximum degree <= dmax."""
    if not (1 <= lo <= n):
        raise ValueError("need 1 <= lo <= n")
    rng = Random(seed)
    return [gen_bounded_tree(i, dmax, rng.getrandbits(48)) for i in range(lo, n + 1)]


def gen_oberwolfach(n: int, cycle_lengths: Sequence[int]) -> Graph:
    """Disjoint union of cycles with the given lengths; 2-regular on n vertices."""
    if sum(cycle_lengths) != n:
        raise ValueError("cycle lengths must sum to n")
    g = Graph(n)
    base = 0
    for length in cycle_lengths:
        if length < 3:
            raise ValueError("cycle length must be >= 3")
        for i in range(length):
            g.add_edge(base + i, base + (i + 1) % length)
        base += length
    return g


def _is_forest(g: Graph) -> bool:
    comps = connected_components(g)
    return g.m == g.n - len(comps)


def _is_two_regular(g: Graph) -> bool:
    return all(len(g.adj[v]) in (0, 2) for v in range(g.n)) and g.m > 0


def _cut_forest(g: Graph, bound: int) -> Set[int]:
    """Cut a forest into components of size <= bound.

    Iterative post-order: a vertex whose retained subtree would exceed the
    bound joins the separator, detaching the pieces below it.
    """
    sep: Set[int] = set()
    visited = [False] * g.n
    for root in range(g.n):
        if visited[root]:
            continue
        order: List[int] = []
        parent = {root: -1}
        stack = [root]
        visited[root] = True
        while stack:
            u = stack.pop()
            order.append(u)
            for v in sorted(g.adj[u]):
                if not visited[v]:
                    visited[v] = True
                    parent[v] = u
                    stack.append(v)
        weight = [1] * g.n  # retained subtree size
        for u in reversed(order):
            if weight[u] > bound:
                sep.add(u)
                weight[u] = 0
            p = parent[u]
            if p >= 0:
                weight[p] += weight[u]
    return sep


def _cut_cycles(g: Graph, bound: int) -> Set[int]:
    """Evenly spaced cuts turning every cycle into arcs of length <= bound."""
    sep: Set[int] = set()
    for comp in connected_components(g):
        comp_list = sorted(comp)
        if len(comp_list) == 1 or all(not g.adj[v] for v in comp_list):
            continue
        # walk the cycle from its smallest vertex
        start = comp_list[0]
        cycle = [start]
        prev, cur = -1, start
        while True:
            nxt = min(v for v in g.adj[cur] if v != prev) if prev >= 0 else min(g.adj[cur])
            if nxt == start:
                break
            cycle.append(nxt)
            prev, cur = cur, nxt
        L = len(cycle)
        cuts = -(-L // (bound + 1))  # ceil
        for j in range(cuts):
            sep.add(cycle[j * L // cuts])
    return sep


def find_separator(g: Graph, delta: float) -> Tuple[Set[int], int]:
    """Separator of size <= delta * v(g) leaving components of size <= K.

    Supports forests, 2-regular graphs, and graphs whose components are
    already small.  Returns (S, achieved K).
    """
    budget = int(delta * g.n)
    if g.m == 0:
        return set(), 1
    if _is_forest(g):
        cutter = _cut_forest
    elif _is_two_regular(g):
        cutter = _cut_cycles
    else:
        comps = connected_components(g)
        K = max(len(c) for c in comps)
        return set(), K  # bounded-component inputs need no separator
    # smallest K whose cut fits the budget
    lo, hi = 1, g.n
    best: Optional[Tuple[Set[int], int]] = None
    while lo <= hi:
        mid = (lo + hi) // 2
        sep = cutter(g, mid)
        if len(sep) <= budget:
            best = (sep, mid)
            hi = mid - 1
        else:
            lo = mid + 1
    if best is None:
        raise UnsupportedFamily(f"no separator of size <= {budget} found")
    sep, _ = best
    comps = connected_components(g, exclude=sep)
    K = max((len(c) for c in comps), default=1)
    return sep, K


def separator_for_bound(g: Graph, bound: int) -> Set[int]:
    """Smallest-effort separator leaving components of size <= bound."""
    if g.m == 0:
        return set()
    comps = connected_components(g)
    if max(len(c) for c in comps) <= bound:
        return set()
    if _is_forest(g):
        return _cut_forest(g, bound)
    if _is_two_regular(g):
        return _cut_cycles(g, bound)
    raise UnsupportedFamily("component too large and not tree/cycle decomposable")


def find_two_independent(
    g: Graph,
    m: int,
    avoid: Set[int] = frozenset(),
    order: Optional[Sequence[int]] = None,
) -> Set[int]:
    """Greedy 2-independent set of size exactly m, disjoint from `avoid`.

    The scan order defaults to ascending vertex index; callers may supply a
    different deterministic order (e.g. ascending degree).
    """
    chosen: Set[int] = set()
    blocked: Set[int] = set(avoid)
    scan = order if order is not None else range(g.n)
    for v in scan:
        if len(chosen) >= m:
            break
        if v in blocked:
            continue
        chosen.add(v)
        blocked.add(v)
        for u in g.adj[v]:
            blocked.add(u)
            blocked.update(g.adj[u])
    if len(chosen) < m:
        raise InfeasibleSelection(m, len(chosen))
    return chosen


def normalize_collection(graphs: Sequence[Graph], n: int) -> InstanceSet:
    """Pad to exactly n vertices and merge small graphs pairwise.

    Two graphs whose non-isolated vertex counts are both below n/2 are merged
    into one disjoint union, until at most one output has fewer than n/4
    edges.  The total edge multiset is preserved; `provenance` maps each
    input index to its output instance.
    """
    for g in graphs:
        if g.n > n:
            raise ValueError(f"input graph has {g.n} > n = {n} vertices")

    # working entries: (edge list in local labels, non-isolated count, members)
    entries: List[Tuple[List[Tuple[int, int]], int, List[int]]] = []
    for idx, g in enumerate(graphs):
        entries.append(([tuple(e) for e in g.edges()], len(g.non_isolated()), [idx]))

    def merge(a, b):
        edges_a, na, mem_a = a
        edges_b, nb, mem_b = b
        # relabel b's non-isolated vertices into fresh slots after a's
        verts_b = sorted({v for e in edges_b for v in e})
        relabel = {v: na + i for i, v in enumerate(verts_b)}
        edges = list(edges_a) + [(relabel[u], relabel[v]) for u, v in edges_b]
        return (edges, na + nb, mem_a + mem_b)

    changed = True
    while changed:
        changed = False
        small = [
            i
            for i, (edges, nv, _) in enumerate(entries)
            if nv < n / 2 and len(edges) < n / 4
        ]
        if len(small) >= 2:
            i, j = small[0], small[1]
            merged = merge(entries[i], entries[j])
            if merged[1] <= n:
                entries[j] = merged
                del entries[i]
                changed = True

    instances: List[InstanceGraph] = []
    provenance: Dict[int, int] = {}
    total_edges = 0
    max_degree = 0
    for out_idx, (edges, _, members) in enumerate(entries):
        g = Graph(n, [(min(u, v), max(u, v)) for u, v in edges])
        instances.append(InstanceGraph(graph=g))
        for m_idx in members:
            provenance[m_idx] = out_idx
        total_edges += g.m
        max_degree = max(max_degree, g.max_degree())
    return InstanceSet(
        instances=instances,
        n=n,
        max_degree=max_degree,
        total_edges=total_edges,
        provenance=provenance,
    )


def _bins_needed(sizes: Sequence[int], cap: int) -> int:
    """Best-fit decreasing bin count for component sizes at capacity cap."""
    loads: List[int] = []
    for s in sorted(sizes, reverse=True):
        best = -1
        for j, l in enumerate(loads):
            if l + s <= cap and (best < 0 or loads[best] < l):
                best = j
        if best < 0:
            loads.append(s)
        else:
            loads[best] += s
    return len(loads)


def prepare_instances(
    inst_set: InstanceSet,
    delta: float,
    gamma: float,
    component_bound: Optional[int] = None,
    prefer_low_degree: bool = True,
    cell_size: Optional[int] = None,
    cell_budget: Optional[int] = None,
) -> None:
    """Compute separators, 2-independent sets, and anchors in place.

    When `component_bound` is given the separator targets that bound directly
    (and the delta budget is reported, not enforced); otherwise the separator
    spends the delta budget and the achieved bound is recorded.

    With `cell_size` and `cell_budget` set, a repair pass grows the separator
    (within the delta budget) by dissolving components that waste cell space,
    until the components bin-pack into the budgeted number of cells.
    """
    n = inst_set.n
    m_target = int(round(gamma * n))
    for inst in inst_set.instances:
        g = inst.graph
        if component_bound is not None:
            sep = separator_for_bound(g, component_bound)
            K = component_bound
        else:
            sep, K = find_separator(g, delta)
        inst.separator = sep
        inst.component_bound = K
        if m_target > 0:
            if prefer_low_degree:
                # prefer vertices whose removal does not fragment the part:
                # singleton components first, then 2-components (removing one
                # endpoint leaves a harmless singleton), then the interior of
                # larger components
                comp_of: Dict[int, int] = {}
                in_deg: Dict[int, int] = {}
                for comp in connected_components(g, exclude=sep):
                    for v in comp:
                        comp_of[v] = len(comp)
                        in_deg[v] = sum(1 for w in g.adj[v] if w in comp)
                # degree-1 vertices first: their completion neighbourhoods
                # are singletons, which keeps the auxiliary bipartite rows
                # dense; break ties toward vertices whose removal does not
                # leave awkward component sizes
                order = sorted(
                    (v for v in range(g.n) if v not in sep),
                    key=lambda v: (
                        min(len(g.adj[v]), 2),
                        comp_of[v],
                        -in_deg[v],
                        len(g.adj[v]),
                        v,
                    ),
                )
            else:
                order = None
            inst.two_independent = find_two_independent(g, m_target, avoid=sep, order=order)
        else:
            inst.two_independent = set()
        if cell_size is not None and cell_budget is not None:
            budget = int(delta * n)
            excluded = inst.separator | inst.two_independent
            comps = sorted(
                connected_components(g, exclude=excluded), key=lambda c: min(c)
            )
            # dissolve the worst space-wasters (size cap-1 components) by
            # promoting one endpoint into the separator
            while (
                _bins_needed([len(c) for c in comps], cell_size) > cell_budget
                and len(inst.separator) < budget
            ):
                waster = next(
                    (c for c in comps if len(c) == cell_size - 1 and len(c) > 1),
                    None,
                )
                if waster is None:
                    break
                victim = min(waster)
                inst.separator.add(victim)
                comps.remove(waster)
                rest = waster - {victim}
                if rest:
                    comps.append(rest)
        inst.compute_anchors()


def save_instance_set(inst_set: InstanceSet, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    manifest = {
        "n": inst_set.n,
        "delta_max_degree": inst_set.max_degree,
        "total_edges": inst_set.total_edges,
        "instances": [],
    }
    for i, inst in enumerate(inst_set.instances):
        fname = f"instance_{i:04d}.txt"
        write_graph(inst.graph, os.path.join(directory, fname))
        manifest["instances"].append(
            {
                "file": fname,
                "separator": sorted(inst.separator),
                "two_independent": sorted(inst.two_independent),
                "component_bound": inst.component_bound,
            }
        )
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_instance_set(directory: str) -> InstanceSet:
    with open(os.path.join(directory, "manifest.json")) as fh:
        manifest = json.load(fh)
    instances = []
    for entry in manifest["instances"]:
        g = read_graph(os.path.join(directory, entry["file"]))
        inst = InstanceGraph(
            graph=g,
            separator=set(entry["separator"]),
            two_independent=set(entry["two_independent"]),
            component_bound=entry["component_bound"],
        )
        inst.compute_anchors()
        instances.append(inst)
    return InstanceSet(
        instances=instances,
        n=manifest["n"],
        max_degree=manifest["delta_max_degree"],
        total_edges=manifest["total_edges"],
    )
