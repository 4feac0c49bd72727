"""Randomized packing of bounded-degree separable graphs into K_n."""

from .graph import Embedding, Graph, LedgerConflict, PackingLedger, validate_embedding
from .estimator import GraphPacker
from .pipeline import PackingReport, RunConfig, emit_report, run_pipeline
from .verify import brute_force_pack, divisibility_check, verify_packing

__all__ = [
    "Embedding",
    "Graph",
    "GraphPacker",
    "LedgerConflict",
    "PackingLedger",
    "PackingReport",
    "RunConfig",
    "brute_force_pack",
    "divisibility_check",
    "emit_report",
    "run_pipeline",
    "validate_embedding",
    "verify_packing",
]

__version__ = "0.1.0"
