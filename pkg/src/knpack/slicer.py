"""Random partition of E(K_n) into layers plus reserved vertex zones."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from random import Random
from typing import List, Optional, Set, Tuple

from .graph import Graph, pair_index, read_graph, write_graph


def derive_seed(seed: int, tag: str) -> int:
    """Stable child seed for a named sub-stream."""
    digest = hashlib.sha256(f"{seed}:{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class PipelineConstants:
    """All knobs of one run, with the derived quantities filled in.

    M and p are decoupled from the asymptotic coupling (M = gamma^-2):
    at desk sizes that formula makes the layers uselessly sparse, so M is
    configured directly and p = (1 - p0) / M.
    """

    n: int
    epsilon: float = 0.35
    max_degree: int = 3
    gamma: float = 0.15
    delta: float = 0.02
    zeta: float = 0.05
    p0: float = 0.3
    K: int = 3
    M: int = 8
    ell: int = 4
    seed: int = 0
    p: float = field(default=0.0)
    xi: float = field(default=0.0)

    def __post_init__(self):
        if self.M < 0:
            raise ValueError("M must be >= 0")
        if self.M > 0 and self.p == 0.0:
            self.p = (1.0 - self.p0) / self.M
        if self.xi == 0.0 and self.zeta < 1.0:
            # 1 - delta - gamma = (1 - xi)(1 - zeta)
            self.xi = 1.0 - (1.0 - self.delta - self.gamma) / (1.0 - self.zeta)
        self.validate()

    def validate(self) -> None:
        if self.p0 + self.M * self.p > 1.0 + 1e-9:
            raise ValueError("layer probabilities exceed 1")
        if self.M * self.zone_size() > self.n:
            raise ValueError("zones do not fit")
        if not (self.gamma / 2 - 1e-9 <= self.xi <= 2 * self.gamma + 1e-9):
            raise ValueError(
                f"xi={self.xi:.4f} outside [gamma/2, 2*gamma]=[{self.gamma/2:.4f},{2*self.gamma:.4f}]"
            )

    def zone_size(self) -> int:
        return int(self.zeta * self.n)

    def zone_load_cap(self) -> int:
        return int(self.zeta * self.zeta * self.n)


@dataclass
class SlicedHost:
    constants: PipelineConstants
    layers: List[Graph]  # layers[0] = reserved layer, layers[1..M] = packing layers
    zones: List[Set[int]]

    def layer_of_edge(self, u: int, v: int) -> Optional[int]:
        for k, layer in enumerate(self.layers):
            if layer.has_edge(u, v):
                return k
        return None

    def phase1_graph(self, k: int) -> Graph:
        """Layer k with all zone-incident edges removed (Phase I edge view)."""
        zone = self.zones[k - 1] if self.zones else set()
        out = Graph(self.constants.n)
        for u, v in self.layers[k].edges():
            if u not in zone and v not in zone:
                out.add_edge(u, v)
        return out

    def zone_incident(self, k: int, u: int, v: int) -> bool:
        zone = self.zones[k - 1] if self.zones else set()
        return u in zone or v in zone


def reserve_zones(c: PipelineConstants) -> List[Set[int]]:
    """Deterministic contiguous index blocks of size floor(zeta * n)."""
    z = c.zone_size()
    if c.M * z > c.n:
        raise ValueError("zones do not fit")
    return [set(range(k * z, (k + 1) * z)) for k in range(c.M)]


def slice_edges(c: PipelineConstants) -> SlicedHost:
    """Assign every host edge to a layer by one uniform draw per edge.

    The draw stream is a single seeded generator consumed in lexicographic
    edge order, so the whole slicing is a pure function of the constants.
    """
    rng = Random(derive_seed(c.seed, "slice"))
    layers = [Graph(c.n) for _ in range(c.M + 1)]
    p0, p = c.p0, c.p
    for u in range(c.n):
        for v in range(u + 1, c.n):
            x = rng.random()
            if x <= p0:
                layers[0].add_edge(u, v)
            else:
                k = int((x - p0) / p) + 1 if p > 0 else c.M + 1
                if 1 <= k <= c.M and x <= p0 + c.M * p:
                    layers[k].add_edge(u, v)
    return SlicedHost(constants=c, layers=layers, zones=reserve_zones(c))


def save_sliced_host(host: SlicedHost, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    c = host.constants
    manifest = {
        "constants": {
            "n": c.n,
            "epsilon": c.epsilon,
            "max_degree": c.max_degree,
            "gamma": c.gamma,
            "delta": c.delta,
            "zeta": c.zeta,
            "p0": c.p0,
            "K": c.K,
            "M": c.M,
            "ell": c.ell,
            "seed": c.seed,
        },
        "zones": [sorted(z) for z in host.zones],
        "layers": [],
    }
    for k, layer in enumerate(host.layers):
        fname = f"layer_{k:02d}.txt"
        write_graph(layer, os.path.join(directory, fname))
        manifest["layers"].append(fname)
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_sliced_host(directory: str) -> SlicedHost:
    with open(os.path.join(directory, "manifest.json")) as fh:
        manifest = json.load(fh)
    c = PipelineConstants(**manifest["constants"])
    layers = [read_graph(os.path.join(directory, f)) for f in manifest["layers"]]
    zones = [set(z) for z in manifest["zones"]]
    return SlicedHost(constants=c, layers=layers, zones=zones)
