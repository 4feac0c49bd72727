"""Thin scikit-learn style wrapper around the packing pipeline."""

from __future__ import annotations

from typing import Dict, List, Optional, Sequence

from sklearn.base import BaseEstimator

from .graph import Graph
from .pipeline import RunConfig, run_pipeline_with_embeddings


class GraphPacker(BaseEstimator):
    """Pack a collection of guest graphs into K_n.

    Parameters mirror the run configuration.  `fit` accepts a list of
    `Graph` objects (or edge lists), runs the three-phase pipeline, and
    exposes the results as `embeddings_` and `report_`.

    >>> packer = GraphPacker(n=12, constants={"gamma": 0.0, "zeta": 0.0,
    ...                                       "delta": 0.0, "M": 1, "ell": 3})
    >>> packer.fit([Graph(3, [(0, 1), (1, 2)])]).report_.valid
    True
    """

    def __init__(
        self,
        n: int = 200,
        epsilon: float = 0.35,
        max_degree: int = 3,
        seed: int = 0,
        constants: Optional[Dict[str, float]] = None,
        cap_slack: float = 2.0,
        enforce_caps: bool = False,
        run_retries: int = 3,
    ):
        self.n = n
        self.epsilon = epsilon
        self.max_degree = max_degree
        self.seed = seed
        self.constants = constants
        self.cap_slack = cap_slack
        self.enforce_caps = enforce_caps
        self.run_retries = run_retries

    def _as_graphs(self, X: Sequence) -> List[Graph]:
        out = []
        for item in X:
            if isinstance(item, Graph):
                out.append(item)
            else:
                edges = [(min(u, v), max(u, v)) for u, v in item]
                nv = 1 + max((max(e) for e in edges), default=0)
                out.append(Graph(nv, edges))
        return out

    def fit(self, X: Sequence, y=None) -> "GraphPacker":
        guests = self._as_graphs(X)
        cfg = RunConfig(
            family="trees",  # generator unused; guests come from X
            n=self.n,
            epsilon=self.epsilon,
            max_degree=self.max_degree,
            seed=self.seed,
            constants=dict(self.constants or {}),
            cap_slack=self.cap_slack,
            enforce_caps=self.enforce_caps,
            run_retries=self.run_retries,
        )
        report, embeddings = run_pipeline_with_embeddings(cfg, guests=guests)
        self.report_ = report
        self.embeddings_ = embeddings
        self.n_instances_ = report.instances
        return self

    def predict(self, X: Sequence) -> List[Dict[int, int]]:
        """Return the fitted vertex maps; X is accepted for API symmetry."""
        if not hasattr(self, "embeddings_"):
            raise RuntimeError("call fit first")
        return [dict(e.map) for e in self.embeddings_]

    def score(self, X: Sequence = (), y=None) -> float:
        """1.0 for a verified packing, else 0.0."""
        if not hasattr(self, "report_"):
            raise RuntimeError("call fit first")
        return 1.0 if self.report_.valid else 0.0
