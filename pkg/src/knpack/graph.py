"""Core graph machinery: simple graphs, embeddings, and the global edge ledger.

All vertex indices are dense 0-based integers.  Graphs are immutable by
convention after construction; the ledger is the single mutable object that
enforces edge-disjointness across the whole pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

PHASE1 = "phase1"
PHASE2 = "phase2"
PHASE3 = "phase3"


class LedgerConflict(Exception):
    """A commit tried to reuse a host edge.  The ledger is left unchanged."""

    def __init__(self, edge: Tuple[int, int]):
        super().__init__(f"host edge {edge} already used")
        self.edge = edge


class Graph:
    """Undirected simple graph with a cached edge count."""

    __slots__ = ("n", "adj", "m")

    def __init__(self, n: int, edges: Iterable[Tuple[int, int]] = ()):
        if n < 0:
            raise ValueError("vertex count must be non-negative")
        self.n = n
        self.adj: List[Set[int]] = [set() for _ in range(n)]
        self.m = 0
        for u, v in edges:
            self.add_edge(u, v)

    def add_edge(self, u: int, v: int) -> None:
        if u == v:
            raise ValueError(f"self-loop at {u}")
        if not (0 <= u < self.n and 0 <= v < self.n):
            raise ValueError(f"edge ({u},{v}) out of range for n={self.n}")
        if v not in self.adj[u]:
            self.adj[u].add(v)
            self.adj[v].add(u)
            self.m += 1

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adj[u]

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def max_degree(self) -> int:
        return max((len(a) for a in self.adj), default=0)

    def edges(self) -> Iterator[Tuple[int, int]]:
        """Yield edges as (u, v) with u < v, in lexicographic order."""
        for u in range(self.n):
            for v in sorted(self.adj[u]):
                if u < v:
                    yield (u, v)

    def non_isolated(self) -> List[int]:
        return [v for v in range(self.n) if self.adj[v]]

    def copy(self) -> "Graph":
        g = Graph(self.n)
        for u in range(self.n):
            g.adj[u] = set(self.adj[u])
        g.m = self.m
        return g

    def bitmasks(self) -> List[int]:
        """Adjacency as one int bitmask per vertex (bit v set iff edge)."""
        masks = [0] * self.n
        for u in range(self.n):
            acc = 0
            for v in self.adj[u]:
                acc |= 1 << v
            masks[u] = acc
        return masks

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and self.adj == other.adj

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"


def induced_subgraph(g: Graph, keep: Set[int]) -> Graph:
    """Subgraph on the same index space keeping only edges inside `keep`."""
    out = Graph(g.n)
    for u in keep:
        for v in g.adj[u]:
            if u < v and v in keep:
                out.add_edge(u, v)
    return out


def connected_components(g: Graph, exclude: Set[int] = frozenset()) -> List[Set[int]]:
    """Components of g minus `exclude`, ordered by smallest contained index."""
    seen: Set[int] = set(exclude)
    comps: List[Set[int]] = []
    for start in range(g.n):
        if start in seen:
            continue
        comp = {start}
        seen.add(start)
        stack = [start]
        while stack:
            u = stack.pop()
            for v in g.adj[u]:
                if v not in seen:
                    seen.add(v)
                    comp.add(v)
                    stack.append(v)
        comps.append(comp)
    return comps


@dataclass
class Embedding:
    """Partial injective map from guest vertices to host vertices."""

    instance_id: int
    map: Dict[int, int] = field(default_factory=dict)
    phase: str = PHASE1

    def extend(self, guest_vertex: int, host_vertex: int) -> None:
        self.map[guest_vertex] = host_vertex

    def image(self) -> Set[int]:
        return set(self.map.values())

    def is_injective(self) -> bool:
        return len(set(self.map.values())) == len(self.map)


def validate_embedding(guest: Graph, host: Graph, e: Embedding) -> List[tuple]:
    """Check injectivity and edge preservation; violations come back as data.

    An empty list means the embedding is valid on its current domain.
    """
    violations: List[tuple] = []
    seen: Dict[int, int] = {}
    for gv, hv in e.map.items():
        if not (0 <= gv < guest.n):
            violations.append(("domain_out_of_range", gv))
        if not (0 <= hv < host.n):
            violations.append(("range_out_of_range", gv, hv))
            continue
        if hv in seen:
            violations.append(("not_injective", seen[hv], gv, hv))
        else:
            seen[hv] = gv
    for u, v in guest.edges():
        if u in e.map and v in e.map:
            hu, hv = e.map[u], e.map[v]
            if hu == hv or not host.has_edge(hu, hv):
                violations.append(("missing_edge", u, v, hu, hv))
    return violations


def pair_index(u: int, v: int, n: int) -> int:
    """Flat triangular index of the unordered host pair {u, v}."""
    if u > v:
        u, v = v, u
    return u * (2 * n - u - 1) // 2 + (v - u - 1)


class PackingLedger:
    """Global record of used host edges with per-vertex load counters.

    Single-writer: commits are transactional (a failed commit changes
    nothing).  `host_edges`, when given, restricts the allowed edge set.
    """

    def __init__(self, host_size: int, host_edges: Optional[Set[int]] = None):
        self.host_size = host_size
        self.used: Set[int] = set()
        self.per_vertex_used_degree = [0] * host_size
        self.tag_counters: Dict[str, List[int]] = {}
        self._host_edges = host_edges

    def index(self, u: int, v: int) -> int:
        return pair_index(u, v, self.host_size)

    def uses(self, u: int, v: int) -> bool:
        return pair_index(u, v, self.host_size) in self.used

    def used_count(self) -> int:
        return len(self.used)

    def _check_pairs(self, pairs: Sequence[Tuple[int, int]]) -> None:
        fresh: Set[int] = set()
        for u, v in pairs:
            if u == v or not (0 <= u < self.host_size and 0 <= v < self.host_size):
                raise ValueError(f"bad host pair ({u},{v})")
            idx = pair_index(u, v, self.host_size)
            if idx in self.used or idx in fresh:
                raise LedgerConflict((min(u, v), max(u, v)))
            if self._host_edges is not None and idx not in self._host_edges:
                raise LedgerConflict((min(u, v), max(u, v)))
            fresh.add(idx)

    def commit_edges(self, pairs: Sequence[Tuple[int, int]]) -> None:
        pairs = list(pairs)
        self._check_pairs(pairs)
        for u, v in pairs:
            self.used.add(pair_index(u, v, self.host_size))
            self.per_vertex_used_degree[u] += 1
            self.per_vertex_used_degree[v] += 1

    def commit(self, guest: Graph, e: Embedding) -> None:
        """Insert all image edges of e atomically; raise on the first conflict."""
        pairs = []
        for u, v in guest.edges():
            if u in e.map and v in e.map:
                pairs.append((e.map[u], e.map[v]))
        self.commit_edges(pairs)

    def bump(self, tag: str, vertex: int, amount: int = 1) -> None:
        counters = self.tag_counters.setdefault(tag, [0] * self.host_size)
        counters[vertex] += amount


def write_graph(g: Graph, path: str) -> None:
    """Write the text format: "n m" header then one "u v" line per edge."""
    with open(path, "w") as fh:
        fh.write(f"{g.n} {g.m}\n")
        for u, v in g.edges():
            fh.write(f"{u} {v}\n")


def read_graph(path: str) -> Graph:
    """Read the text format; lines starting with '#' are ignored."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty graph file")
    n, m = (int(x) for x in lines[0].split())
    g = Graph(n)
    for ln in lines[1:]:
        u, v = (int(x) for x in ln.split())
        if not u < v:
            raise ValueError(f"{path}: edge line '{ln}' must satisfy u < v")
        g.add_edge(u, v)
    if g.m != m:
        raise ValueError(f"{path}: header says {m} edges, found {g.m}")
    return g
