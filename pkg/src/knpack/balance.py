"""Constructive vector balancing and its two pipeline uses.

The partition routine realizes the averaging bound constructively: seeded
shuffle, greedy assignment, then single-swap local improvement.  Callers
scale coordinates into [0,1] before handing vectors over.
"""

from __future__ import annotations

from dataclasses import dataclass
from random import Random
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .graph import Graph, connected_components
from .instances import InstanceGraph, InstanceSet


class ToleranceUnmet(Exception):
    def __init__(self, achieved: float, tolerance: float):
        super().__init__(f"discrepancy {achieved:.4f} exceeds tolerance {tolerance:.4f}")
        self.achieved = achieved
        self.tolerance = tolerance


@dataclass(frozen=True)
class WeightVector:
    coords: Tuple[float, ...]
    payload_id: int

    def __post_init__(self):
        for c in self.coords:
            if not (0.0 <= c <= 1.0 + 1e-12):
                raise ValueError(f"coordinate {c} outside [0,1]")


@dataclass
class PartitionResult:
    parts: List[Set[int]]
    per_part_sums: List[Tuple[float, ...]]
    discrepancy: float


def _discrepancy(sums: List[List[float]], avg: List[float]) -> float:
    return max(
        (abs(s[c] - avg[c]) for s in sums for c in range(len(avg))),
        default=0.0,
    )


def balanced_partition(
    A: Sequence[WeightVector],
    m: int,
    tolerance: float,
    seed: int = 0,
    swap_budget: Optional[int] = None,
) -> PartitionResult:
    """Partition A into m parts with per-coordinate sums near the average.

    Raises ToleranceUnmet if the achieved discrepancy exceeds `tolerance`
    after the improvement budget; the caller may retry with a new seed.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not A:
        return PartitionResult([set() for _ in range(m)], [()] * m, 0.0)
    d = len(A[0].coords)
    if any(len(v.coords) != d for v in A):
        raise ValueError("all vectors must share one dimension")
    total = [sum(v.coords[c] for v in A) for c in range(d)]
    avg = [t / m for t in total]

    if m == 1:
        assign = [0] * len(A)
    elif len(A) <= 16 and m**len(A) <= 600_000:
        assign = _exact_partition(A, m, avg)
    else:
        assign = _heuristic_partition(A, m, avg, seed, swap_budget, tolerance)

    sums = [[0.0] * d for _ in range(m)]
    for idx, part in enumerate(assign):
        for c in range(d):
            sums[part][c] += A[idx].coords[c]
    parts: List[Set[int]] = [set() for _ in range(m)]
    for idx, part in enumerate(assign):
        parts[part].add(A[idx].payload_id)
    achieved = _discrepancy(sums, avg)
    if achieved > tolerance:
        raise ToleranceUnmet(achieved, tolerance)
    return PartitionResult(parts, [tuple(s) for s in sums], achieved)


def _exact_partition(A: Sequence[WeightVector], m: int, avg: List[float]) -> List[int]:
    """Exhaustive optimum for tiny inputs (first vector pinned to part 0)."""
    d = len(avg)
    n = len(A)
    sums = [[0.0] * d for _ in range(m)]
    assign = [0] * n
    best = [float("inf"), list(assign)]

    def rec(i: int) -> None:
        if i == n:
            disc = max(abs(sums[p][c] - avg[c]) for p in range(m) for c in range(d))
            if disc < best[0]:
                best[0] = disc
                best[1] = list(assign)
            return
        limit = m if i > 0 else 1  # symmetry: vector 0 stays in part 0
        for p in range(limit):
            for c in range(d):
                sums[p][c] += A[i].coords[c]
            assign[i] = p
            rec(i + 1)
            for c in range(d):
                sums[p][c] -= A[i].coords[c]

    rec(0)
    return best[1]


def _heuristic_partition(
    A: Sequence[WeightVector],
    m: int,
    avg: List[float],
    seed: int,
    swap_budget: Optional[int],
    tolerance: float,
) -> List[int]:
    """Least-loaded greedy plus squared-deviation local descent.

    The descent minimizes the sum of squared per-coordinate deviations,
    which keeps improving across the plateaus a pure max objective has.
    """
    d = len(avg)
    rng = Random(seed)
    order = list(range(len(A)))
    rng.shuffle(order)
    sums = [[0.0] * d for _ in range(m)]
    assign = [0] * len(A)
    for idx in order:
        coords = A[idx].coords
        best = min(
            range(m),
            key=lambda p: (max(sums[p][c] + coords[c] for c in range(d)), p),
        )
        assign[idx] = best
        for c in range(d):
            sums[best][c] += coords[c]

    def move_gain(i: int, p: int) -> float:
        # change in sum of squared deviations when moving vector i to part p
        pi = assign[i]
        gain = 0.0
        for c in range(d):
            x = A[i].coords[c]
            a, b = sums[pi][c] - avg[c], sums[p][c] - avg[c]
            gain += (a - x) ** 2 + (b + x) ** 2 - a**2 - b**2
        return gain

    budget = swap_budget if swap_budget is not None else 20 * len(A)
    for _ in range(budget):
        if _discrepancy(sums, avg) <= tolerance:
            break
        i = rng.randrange(len(A))
        pi = assign[i]
        best_p, best_gain = -1, -1e-12
        for p in range(m):
            if p == pi:
                continue
            g = move_gain(i, p)
            if g < best_gain:
                best_p, best_gain = p, g
        if best_p >= 0:
            for c in range(d):
                sums[pi][c] -= A[i].coords[c]
                sums[best_p][c] += A[i].coords[c]
            assign[i] = best_p
            continue
        # try a swap with a random vector from another part
        j = rng.randrange(len(A))
        pj = assign[j]
        if pj == pi or i == j:
            continue
        gain = 0.0
        for c in range(d):
            x = A[i].coords[c] - A[j].coords[c]
            a, b = sums[pi][c] - avg[c], sums[pj][c] - avg[c]
            gain += (a - x) ** 2 + (b + x) ** 2 - a**2 - b**2
        if gain < -1e-12:
            for c in range(d):
                sums[pi][c] += A[j].coords[c] - A[i].coords[c]
                sums[pj][c] += A[i].coords[c] - A[j].coords[c]
            assign[i], assign[j] = pj, pi
    return assign


def group_graphs(
    inst_set: InstanceSet,
    M: int,
    tolerance: float,
    seed: int = 0,
) -> Tuple[List[List[int]], Dict[str, float]]:
    """Split instance indices into M batches balancing count and edge mass."""
    n = inst_set.n
    dmax = max(1, inst_set.max_degree)
    vectors = [
        WeightVector(
            coords=(1.0, min(1.0, 2.0 * inst.graph.m / (dmax * n))),
            payload_id=i,
        )
        for i, inst in enumerate(inst_set.instances)
    ]
    result = balanced_partition(vectors, M, tolerance, seed=seed)
    batches = [sorted(part) for part in result.parts]
    edge_sums = [sum(inst_set.instances[i].graph.m for i in b) for b in batches]
    stats = {
        "discrepancy": result.discrepancy,
        "max_batch_size": float(max((len(b) for b in batches), default=0)),
        "max_batch_edges": float(max(edge_sums, default=0)),
    }
    return batches, stats


def split_components(
    part_graph: Graph,
    part_vertices: Set[int],
    anchors_S: Set[int],
    anchors_I: Set[int],
    K: int,
    b: int,
    tolerance: float,
    seed: int = 0,
    vertex_cap: Optional[int] = None,
) -> Tuple[List[List[Set[int]]], float]:
    """Group the components of the part across b cells.

    Returns (cells, discrepancy) where cells[j] is the list of components
    (vertex sets) assigned to cell j.  With `vertex_cap` set, a repair pass
    moves components out of cells whose vertex total exceeds the cap.
    """
    excluded = {v for v in range(part_graph.n) if v not in part_vertices}
    comps = [c for c in connected_components(part_graph, exclude=excluded) if c]
    if not comps:
        return [[] for _ in range(b)], 0.0
    Kf = float(max(K, 1))

    def comp_edges(c: Set[int]) -> int:
        return sum(1 for u in c for v in part_graph.adj[u] if v in c and u < v)

    vectors = []
    for idx, c in enumerate(comps):
        vectors.append(
            WeightVector(
                coords=(
                    min(1.0, len(c) / Kf),
                    min(1.0, comp_edges(c) / (Kf * Kf)),
                    min(1.0, len(c & anchors_S) / Kf),
                    min(1.0, len(c & anchors_I) / Kf),
                ),
                payload_id=idx,
            )
        )
    result = balanced_partition(vectors, b, tolerance, seed=seed)
    cells: List[List[Set[int]]] = [[] for _ in range(b)]
    for j, part in enumerate(result.parts):
        for idx in sorted(part):
            cells[j].append(comps[idx])

    if vertex_cap is not None:
        # move components (largest cells first) until every cell fits
        def load(j: int) -> int:
            return sum(len(c) for c in cells[j])

        for _ in range(4 * len(comps)):
            over = [j for j in range(b) if load(j) > vertex_cap]
            if not over:
                break
            j = max(over, key=load)
            comp = min(cells[j], key=len)
            cells[j].remove(comp)
            target = min(range(b), key=lambda q: (load(q), q))
            cells[target].append(comp)
        if any(load(j) > vertex_cap for j in range(b)):
            raise ToleranceUnmet(float(max(load(j) for j in range(b))), float(vertex_cap))
    return cells, result.discrepancy
