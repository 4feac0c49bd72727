"""End-to-end orchestration: config, run, report, determinism contract."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from random import Random
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .balance import ToleranceUnmet, group_graphs
from .cliques import (
    CellPackingFailed,
    InsufficientFactors,
    SpreadViolation,
    pack_layer,
)
from .completion import (
    CompletionFailed,
    NoCandidate,
    PhaseState,
    check_balance,
    complete_embeddings,
    embed_separators,
)
from .graph import Embedding, Graph, PackingLedger
from .instances import (
    InstanceSet,
    gen_bounded_tree,
    gen_oberwolfach,
    gen_tpc_sequence,
    load_instance_set,
    normalize_collection,
    prepare_instances,
)
from .slicer import PipelineConstants, derive_seed, slice_edges
from .verify import VerifyReport, verify_packing

FAMILIES = ("trees", "tpc_sequence", "oberwolfach", "bounded_components", "from_files")


class ConfigError(Exception):
    pass


class PhaseFailure(Exception):
    def __init__(self, phase: str, detail: str):
        super().__init__(f"{phase}: {detail}")
        self.phase = phase
        self.detail = detail


@dataclass
class RunConfig:
    family: str = "trees"
    n: int = 200
    epsilon: float = 0.35
    max_degree: int = 3
    count: int = 0  # 0 = family default
    seed: int = 0
    constants: Dict[str, float] = field(default_factory=dict)
    cap_slack: float = 2.0
    enforce_caps: bool = False
    layer_retries: int = 3
    run_retries: int = 3
    phase3_retries: int = 5
    instances_dir: Optional[str] = None
    report_path: Optional[str] = None
    embeddings_path: Optional[str] = None

    def validate(self) -> None:
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigError("epsilon must be in (0,1)")
        if self.max_degree < 1:
            raise ConfigError("max_degree must be >= 1")
        if self.cap_slack < 1.0:
            raise ConfigError("cap_slack must be >= 1")
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if self.family == "from_files" and not self.instances_dir:
            raise ConfigError("from_files needs instances_dir")
        for k in ("layer_retries", "run_retries", "phase3_retries"):
            if getattr(self, k) < 1:
                raise ConfigError(f"{k} must be >= 1")

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path: str) -> "RunConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"bad JSON in {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)


def family_defaults(cfg: RunConfig) -> Dict[str, float]:
    """Per-family pipeline constants tuned for desk-scale runs."""
    base = {
        "n": cfg.n,
        "epsilon": cfg.epsilon,
        "max_degree": cfg.max_degree,
        "seed": cfg.seed,
    }
    if cfg.family == "oberwolfach":
        # 2-regular copies pack whole, so no separators, zones, or reserve
        # completion are needed; nearly everything goes to the one layer.
        base.update(
            {"gamma": 0.0, "delta": 0.0, "zeta": 0.0, "p0": 0.06, "K": 3, "M": 1, "ell": 3}
        )
    elif cfg.family == "bounded_components":
        base.update(
            {"gamma": 0.0, "delta": 0.0, "zeta": 0.0, "p0": 0.1, "K": 3, "M": 1, "ell": 3}
        )
    else:  # trees, tpc_sequence, from_files
        base.update(
            {"gamma": 0.15, "delta": 0.27, "zeta": 0.35, "p0": 0.3, "K": 3, "M": 1, "ell": 3}
        )
    return base


def build_constants(cfg: RunConfig) -> PipelineConstants:
    merged = family_defaults(cfg)
    known = set(PipelineConstants.__dataclass_fields__)
    unknown = set(cfg.constants) - known
    if unknown:
        raise ConfigError(f"unknown constants overrides: {sorted(unknown)}")
    merged.update(cfg.constants)
    try:
        return PipelineConstants(**merged)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def generate_guests(cfg: RunConfig, seed: int) -> List[Graph]:
    """The raw guest list for a family, before normalization."""
    rng = Random(derive_seed(seed, "gen"))
    n = cfg.n
    if cfg.family == "trees":
        count = cfg.count or 16
        # spanning and near-spanning bounded-degree trees
        return [
            gen_bounded_tree(n - (i % 4), cfg.max_degree, rng.getrandbits(48))
            for i in range(count)
        ]
    if cfg.family == "tpc_sequence":
        hi = cfg.count or n
        return gen_tpc_sequence(min(hi, n), cfg.max_degree, max(2, min(hi, n) // 2), rng.getrandbits(48))
    if cfg.family == "oberwolfach":
        count = cfg.count or 60
        if n % 3 != 0:
            raise ConfigError("oberwolfach preset wants 3 | n (triangle factors)")
        base = gen_oberwolfach(n, [3] * (n // 3))
        return [base.copy() for _ in range(count)]
    if cfg.family == "bounded_components":
        count = cfg.count or 10
        out = []
        for _ in range(count):
            g = Graph(n)
            v = 0
            while v + 3 <= int(0.8 * n):
                if rng.random() < 0.5:
                    g.add_edge(v, v + 1)
                    g.add_edge(v + 1, v + 2)
                    g.add_edge(v, v + 2)
                else:
                    g.add_edge(v, v + 1)
                    g.add_edge(v + 1, v + 2)
                v += 3
            out.append(g)
        return out
    raise ConfigError(f"no generator for family {cfg.family}")


@dataclass
class PackingReport:
    valid: bool
    family: str
    n: int
    seed: int
    config: Dict
    density: float
    instances: int
    failure_phase: Optional[str]
    phase_outcomes: Dict[str, str]
    spread: Dict[str, float]
    balance: Dict[str, float]
    factor_stats: Dict[str, float]
    matching_stats: Dict[str, float]
    assertion_failures: int
    verifier_findings: int
    used_edges: int
    retries: List[str]
    timings: Dict[str, float] = field(default_factory=dict)

    def to_canonical_dict(self) -> Dict:
        """Everything except wall-clock timings (the determinism contract)."""
        d = asdict(self)
        d.pop("timings", None)
        return d


def _prepare(
    cfg: RunConfig,
    constants: PipelineConstants,
    seed: int,
    guests: Optional[Sequence[Graph]] = None,
) -> InstanceSet:
    if guests is not None:
        inst_set = normalize_collection(list(guests), cfg.n)
        _prepare_decomposition(inst_set, constants)
        return inst_set
    if cfg.family == "from_files":
        inst_set = load_instance_set(cfg.instances_dir)
        if inst_set.n != cfg.n:
            raise ConfigError(
                f"instances_dir has n={inst_set.n} but config says n={cfg.n}"
            )
        return inst_set
    guests = generate_guests(cfg, seed)
    total = sum(g.m for g in guests)
    if total > (1 - cfg.epsilon) * cfg.n * (cfg.n - 1) / 2:
        raise ConfigError(
            f"guest edge total {total} too dense for n={cfg.n}, epsilon={cfg.epsilon}"
        )
    inst_set = normalize_collection(guests, cfg.n)
    _prepare_decomposition(inst_set, constants)
    return inst_set


def _prepare_decomposition(inst_set: InstanceSet, constants: PipelineConstants) -> None:
    cells_available = (constants.n - constants.zone_size()) // constants.ell
    prepare_instances(
        inst_set,
        constants.delta,
        constants.gamma,
        component_bound=constants.K,
        prefer_low_degree=True,
        cell_size=constants.ell,
        cell_budget=max(1, cells_available - 1),
    )


def _run_once(
    cfg: RunConfig,
    seed: int,
    retries_log: List[str],
    guests: Optional[Sequence[Graph]] = None,
) -> Tuple[PackingReport, List[Embedding]]:
    timings: Dict[str, float] = {}
    t0 = time.perf_counter()
    constants = build_constants(cfg)
    constants.seed = seed
    inst_set = _prepare(cfg, constants, seed, guests=guests)
    timings["prepare"] = time.perf_counter() - t0

    t1 = time.perf_counter()
    host = slice_edges(constants)
    timings["slice"] = time.perf_counter() - t1

    M = max(1, constants.M)
    batches, group_stats = group_graphs(
        inst_set, M, tolerance=6.0, seed=derive_seed(seed, "group")
    )

    ledger = PackingLedger(cfg.n)
    embeddings: Dict[int, Embedding] = {}
    batch_layer: Dict[int, int] = {}
    layer_reports = []
    t2 = time.perf_counter()
    for k in range(1, constants.M + 1):
        batch = batches[k - 1]
        for i in batch:
            batch_layer[i] = k
        placed = None
        for attempt in range(cfg.layer_retries):
            snapshot = (set(ledger.used), list(ledger.per_vertex_used_degree))
            try:
                embs, rep = pack_layer(
                    host,
                    k,
                    [(i, inst_set.instances[i]) for i in batch],
                    ledger,
                    seed=derive_seed(seed, f"p1-{k}-{attempt}"),
                    cap_slack=cfg.cap_slack,
                    enforce_caps=cfg.enforce_caps,
                )
                placed = (embs, rep)
                break
            except (CellPackingFailed, InsufficientFactors, ToleranceUnmet, SpreadViolation) as exc:
                ledger.used, ledger.per_vertex_used_degree = snapshot
                retries_log.append(f"phase1 layer {k} attempt {attempt}: {exc}")
        if placed is None:
            raise PhaseFailure("phase1", f"layer {k} failed after {cfg.layer_retries} attempts")
        embeddings.update(placed[0])
        layer_reports.append(placed[1])
    timings["phase1"] = time.perf_counter() - t2

    state = PhaseState(host, inst_set, embeddings, ledger)
    t3 = time.perf_counter()
    for k in range(1, constants.M + 1):
        try:
            embed_separators(state, k, batches[k - 1], seed=derive_seed(seed, f"p2-{k}"))
        except NoCandidate as exc:
            raise PhaseFailure("phase2", str(exc))
    timings["phase2"] = time.perf_counter() - t3

    balance = check_balance(state, slack=cfg.cap_slack, seed=derive_seed(seed, "balance"))

    t4 = time.perf_counter()
    try:
        matching_stats = complete_embeddings(
            state, seed=derive_seed(seed, "p3"), retry_budget=cfg.phase3_retries
        )
    except CompletionFailed as exc:
        raise PhaseFailure("phase3", str(exc))
    timings["phase3"] = time.perf_counter() - t4

    t5 = time.perf_counter()
    host_edges = {(u, v) for u in range(cfg.n) for v in range(u + 1, cfg.n)}
    guests = [inst.graph for inst in inst_set.instances]
    ordered_embeddings = [embeddings[i] for i in range(len(guests))]
    vrep = verify_packing(
        host_edges,
        guests,
        ordered_embeddings,
        host_n=cfg.n,
        sliced=host,
        instances=inst_set.instances,
        batch_layer=batch_layer,
    )
    timings["verify"] = time.perf_counter() - t5

    spread = {
        "max_anchor_hits": float(max((r.max_anchor_hits for r in layer_reports), default=0)),
        "max_complement_hits": float(
            max((r.max_complement_hits for r in layer_reports), default=0)
        ),
        "max_pair_hits": float(max((r.max_pair_hits for r in layer_reports), default=0)),
        "anchor_cap": layer_reports[0].anchor_cap if layer_reports else 0.0,
        "complement_cap": layer_reports[0].complement_cap if layer_reports else 0.0,
        "pair_cap": layer_reports[0].pair_cap if layer_reports else 0.0,
        "group_discrepancy": group_stats["discrepancy"],
    }
    factor_stats = {
        "total_factors": float(sum(r.factors for r in layer_reports)),
        "mean_cells": (
            sum(r.mean_cells for r in layer_reports) / len(layer_reports)
            if layer_reports
            else 0.0
        ),
    }
    phase_outcomes = {str(i): "completed" for i in range(len(guests))}
    return PackingReport(
        valid=vrep.valid,
        family=cfg.family,
        n=cfg.n,
        seed=cfg.seed,
        config=cfg.to_dict(),
        density=vrep.density,
        instances=len(guests),
        failure_phase=None if vrep.valid else "verify",
        phase_outcomes=phase_outcomes,
        spread=spread,
        balance=balance,
        factor_stats=factor_stats,
        matching_stats=matching_stats,
        assertion_failures=state.assertion_failures + vrep.phase_violations,
        verifier_findings=len(vrep.findings),
        used_edges=vrep.used_edges,
        retries=retries_log,
        timings=timings,
    ), ordered_embeddings


def run_pipeline(cfg: RunConfig) -> PackingReport:
    report, _ = run_pipeline_with_embeddings(cfg)
    return report


def run_pipeline_with_embeddings(
    cfg: RunConfig, guests: Optional[Sequence[Graph]] = None
) -> Tuple[PackingReport, List[Embedding]]:
    """Run the three phases with bounded reseeded retries; always report.

    Validity comes only from the independent verifier; a run that exhausts
    its retry budgets yields a valid=false report naming the failing phase.
    """
    cfg.validate()
    retries_log: List[str] = []
    last_failure: Optional[PhaseFailure] = None
    for run_attempt in range(cfg.run_retries):
        seed = derive_seed(cfg.seed, f"run-{run_attempt}")
        try:
            return _run_once(cfg, seed, retries_log, guests=guests)
        except PhaseFailure as exc:
            last_failure = exc
            retries_log.append(f"run attempt {run_attempt}: {exc}")
    report = PackingReport(
        valid=False,
        family=cfg.family,
        n=cfg.n,
        seed=cfg.seed,
        config=cfg.to_dict(),
        density=0.0,
        instances=0,
        failure_phase=last_failure.phase if last_failure else "unknown",
        phase_outcomes={},
        spread={},
        balance={},
        factor_stats={},
        matching_stats={},
        assertion_failures=0,
        verifier_findings=0,
        used_edges=0,
        retries=retries_log,
        timings={},
    )
    return report, []


def emit_report(report: PackingReport, fmt: str = "json", path: Optional[str] = None) -> str:
    """Serialize a report: canonical JSON or a one-row CSV summary.

    The JSON omits wall-clock timings so identical config+seed runs are
    byte-identical.
    """
    if fmt == "json":
        text = json.dumps(report.to_canonical_dict(), indent=2, sort_keys=True) + "\n"
    elif fmt == "csv":
        header = "family,n,seed,valid,instances,density,used_edges,failure_phase"
        row = (
            f"{report.family},{report.n},{report.seed},{int(report.valid)},"
            f"{report.instances},{report.density:.6f},{report.used_edges},"
            f"{report.failure_phase or ''}"
        )
        text = header + "\n" + row + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def write_embedding_dump(embeddings: Sequence[Embedding], path: str) -> None:
    """One line per instance: "i: v0→x0 v1→x1 ..." in vertex order."""
    with open(path, "w") as fh:
        for i, emb in enumerate(embeddings):
            pairs = " ".join(f"{v}→{emb.map[v]}" for v in sorted(emb.map))
            fh.write(f"{i}: {pairs}\n")


def read_embedding_dump(path: str) -> List[Embedding]:
    out: List[Embedding] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            head, _, rest = line.partition(":")
            emb = Embedding(instance_id=int(head))
            for chunk in rest.split():
                v, _, x = chunk.partition("→")
                emb.extend(int(v), int(x))
            out.append(emb)
    return out
