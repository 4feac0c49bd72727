"""Command line interface: generate / pack / verify / bench / resilience."""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from .completion import estimate_resilience, write_resilience_csv
from .instances import normalize_collection, prepare_instances, save_instance_set
from .pipeline import (
    ConfigError,
    RunConfig,
    build_constants,
    emit_report,
    generate_guests,
    read_embedding_dump,
    run_pipeline_with_embeddings,
    write_embedding_dump,
)
from .instances import load_instance_set
from .verify import verify_packing


def _cmd_generate(args: argparse.Namespace) -> int:
    cfg = RunConfig(
        family=args.family,
        n=args.n,
        max_degree=args.max_degree,
        count=args.count,
        seed=args.seed,
    )
    cfg.validate()
    constants = build_constants(cfg)
    guests = generate_guests(cfg, cfg.seed)
    inst_set = normalize_collection(guests, cfg.n)
    prepare_instances(
        inst_set, constants.delta, constants.gamma, component_bound=constants.K
    )
    save_instance_set(inst_set, args.out)
    print(
        f"wrote {len(inst_set.instances)} instances "
        f"({inst_set.total_edges} edges) to {args.out}"
    )
    return 0


def _cmd_pack(args: argparse.Namespace) -> int:
    if args.config:
        cfg = RunConfig.from_json(args.config)
    else:
        cfg = RunConfig(
            family=args.family,
            n=args.n,
            seed=args.seed if args.seed is not None else 0,
            max_degree=args.max_degree,
        )
    if args.seed is not None and args.config:
        cfg.seed = args.seed
    cfg.validate()
    report, embeddings = run_pipeline_with_embeddings(cfg)
    report_path = args.report or cfg.report_path
    if report_path:
        emit_report(report, "json", report_path)
    emb_path = args.embeddings or cfg.embeddings_path
    if emb_path and embeddings:
        write_embedding_dump(embeddings, emb_path)
    print(
        f"valid={report.valid} instances={report.instances} "
        f"density={report.density:.4f} used_edges={report.used_edges}"
        + (f" failure={report.failure_phase}" if report.failure_phase else "")
    )
    return 0 if report.valid else 1


def _cmd_verify(args: argparse.Namespace) -> int:
    inst_set = load_instance_set(args.instances)
    embeddings = read_embedding_dump(args.embeddings)
    if len(embeddings) != len(inst_set.instances):
        print(
            f"embedding dump has {len(embeddings)} lines but "
            f"{len(inst_set.instances)} instances",
            file=sys.stderr,
        )
        return 1
    n = inst_set.n
    host_edges = {(u, v) for u in range(n) for v in range(u + 1, n)}
    guests = [inst.graph for inst in inst_set.instances]
    rep = verify_packing(host_edges, guests, embeddings, host_n=n)
    print(rep.summary())
    for finding in rep.findings[:20]:
        print(f"  finding: {finding}")
    return 0 if rep.valid else 1


def _cmd_bench(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig(family=args.family, n=args.n)
    cfg.validate()
    rows = ["family,n,seed,valid,instances,density,used_edges,failure_phase"]
    for s in range(args.seeds):
        run_cfg = RunConfig.from_dict({**cfg.to_dict(), "seed": cfg.seed + s})
        report, _ = run_pipeline_with_embeddings(run_cfg)
        rows.append(
            f"{report.family},{report.n},{report.seed},{int(report.valid)},"
            f"{report.instances},{report.density:.6f},{report.used_edges},"
            f"{report.failure_phase or ''}"
        )
        print(rows[-1])
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("\n".join(rows) + "\n")
    return 0


def _cmd_resilience(args: argparse.Namespace) -> int:
    stats = estimate_resilience(
        args.n, args.p, args.fraction, args.trials, seed=args.seed
    )
    if args.out:
        write_resilience_csv(stats, args.out)
    print(
        f"survival {int(stats['survived'])}/{int(stats['trials'])} "
        f"(budget {int(stats['budget_per_vertex'])} per vertex)"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="knpack", description="pack bounded-degree graphs into K_n"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="generate an instance set on disk")
    p_gen.add_argument("--family", default="trees")
    p_gen.add_argument("--n", type=int, default=200)
    p_gen.add_argument("--count", type=int, default=0)
    p_gen.add_argument("--max-degree", type=int, default=3)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_generate)

    p_pack = sub.add_parser("pack", help="run the packing pipeline")
    p_pack.add_argument("--config", help="JSON run configuration")
    p_pack.add_argument("--family", default="trees")
    p_pack.add_argument("--n", type=int, default=200)
    p_pack.add_argument("--max-degree", type=int, default=3)
    p_pack.add_argument("--seed", type=int, default=None)
    p_pack.add_argument("--report", help="write the JSON report here")
    p_pack.add_argument("--embeddings", help="write the embedding dump here")
    p_pack.set_defaults(func=_cmd_pack)

    p_ver = sub.add_parser("verify", help="verify an embedding dump")
    p_ver.add_argument("--instances", required=True, help="instance set directory")
    p_ver.add_argument("--embeddings", required=True, help="embedding dump file")
    p_ver.set_defaults(func=_cmd_verify)

    p_bench = sub.add_parser("bench", help="seed sweep, one CSV row per run")
    p_bench.add_argument("--config", help="JSON run configuration")
    p_bench.add_argument("--family", default="trees")
    p_bench.add_argument("--n", type=int, default=200)
    p_bench.add_argument("--seeds", type=int, default=10)
    p_bench.add_argument("--out")
    p_bench.set_defaults(func=_cmd_bench)

    p_res = sub.add_parser("resilience", help="perfect-matching resilience lab")
    p_res.add_argument("--n", type=int, default=150)
    p_res.add_argument("--p", type=float, default=0.4)
    p_res.add_argument("--fraction", type=float, default=0.5)
    p_res.add_argument("--trials", type=int, default=100)
    p_res.add_argument("--seed", type=int, default=0)
    p_res.add_argument("--out")
    p_res.set_defaults(func=_cmd_resilience)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
