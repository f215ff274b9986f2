"""Operator CLI: every subsystem is reachable from here.

    partsdesk gen-world --seed 42 --profile mini --out world/
    partsdesk gen-tasks --world world/ --out tasks/
    partsdesk pack --world world/ --tasks tasks/ --out bundle/
    partsdesk validate --bundle bundle/ [--json]
    partsdesk serve --bundle bundle/ --stdio | --listen HOST:PORT
    partsdesk run --bundle bundle/ --agent oracle --group-size 16 --seeds 1 --out traj.jsonl
    partsdesk eval --bundle bundle/ --traj traj.jsonl
    partsdesk metrics --traj traj.jsonl | --csv runs.csv [--json]
    partsdesk train-toy --config cfg.json --out curve.jsonl

Environment overrides: PARTSDESK_LISTEN (serve address),
PARTSDESK_WORKERS (worker count for gen-world/run).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import bundle as bundle_mod
from . import grpo, metrics, rollout, server, suite, worldgen
from .worldgen import PROFILES


def _workers(args: argparse.Namespace) -> int:
    if getattr(args, "workers", None):
        return args.workers
    env = os.environ.get("PARTSDESK_WORKERS")
    return int(env) if env else (os.cpu_count() or 1)


def _cmd_gen_world(args: argparse.Namespace) -> int:
    world = worldgen.generate_world(args.seed, PROFILES[args.profile], workers=_workers(args))
    manifest = worldgen.export_world(world, args.out)
    print(f"world seed={manifest['seed']} profile={manifest['profile']} "
          f"entities={sum(manifest['counts'].values())} digest={manifest['digest'][:16]}... -> {args.out}")
    return 0


def _cmd_gen_tasks(args: argparse.Namespace) -> int:
    world = worldgen.load_world(args.world)
    tasks = suite.build_task_suite(world)
    bundle_mod.write_tasks(tasks, Path(args.out))
    by_cat: dict[str, int] = {}
    for t in tasks:
        by_cat[t.category] = by_cat.get(t.category, 0) + 1
    print(f"wrote {len(tasks)} tasks to {args.out} ({', '.join(f'{k}: {v}' for k, v in sorted(by_cat.items()))})")
    return 0


def _cmd_pack(args: argparse.Namespace) -> int:
    world = worldgen.load_world(args.world)
    manifest = bundle_mod.pack_bundle(world, args.tasks, args.out)
    print(f"packed bundle {manifest.name} v{manifest.version}: {manifest.task_count} tasks, "
          f"digest {manifest.world['digest'][:16]}... -> {args.out}")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    findings = bundle_mod.validate_bundle(args.bundle)
    if args.json:
        print(json.dumps({"findings": findings}, indent=2, sort_keys=True))
    else:
        for f in findings:
            print(f"[{f['code']}] {f['path']}: {f['message']}")
        print(f"{len(findings)} finding(s)")
    return 1 if findings else 0


def _cmd_serve(args: argparse.Namespace) -> int:
    srv = server.ToolServer(bundle_mod.load_bundle(args.bundle))
    if args.stdio:
        server.serve_stdio(srv)
        return 0
    listen = args.listen or os.environ.get("PARTSDESK_LISTEN", "127.0.0.1:7355")
    host, _, port = listen.rpartition(":")
    tcp = server.serve_tcp(srv, host or "127.0.0.1", int(port))
    print(f"serving {args.bundle} on {tcp.server_address[0]}:{tcp.server_address[1]}", flush=True)
    try:
        tcp.serve_forever()
    except KeyboardInterrupt:
        tcp.shutdown()
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    loaded = bundle_mod.load_bundle(args.bundle)
    agent = rollout.AGENTS[args.agent]()
    tasks = loaded.tasks
    if args.tasks:
        wanted = set(args.tasks.split(","))
        tasks = [t for t in tasks if t.id in wanted]
    out = Path(args.out)
    if out.exists():
        out.unlink()

    def one(task):
        return rollout.run_group(
            task, agent, loaded.world,
            group_size=args.group_size, base_seed=args.seeds,
            system_prompt=loaded.system_prompt_for(task),
        )

    workers = _workers(args)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            groups = list(pool.map(one, tasks))
    else:
        groups = [one(t) for t in tasks]
    total = 0
    passed = 0
    for group in groups:  # buffer written in task order regardless of completion order
        total += rollout.append_buffer(group, out)
        passed += sum(1 for r in group.reports if r.passed)
    print(f"{len(groups)} tasks x {args.group_size} rollouts = {total} records -> {out} "
          f"({passed}/{total} passing)")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    loaded = bundle_mod.load_bundle(args.bundle)
    records = rollout.read_buffer(args.traj)
    mismatches = 0
    drifted = 0
    for record in records:
        task = loaded.tasks_by_id.get(record["task_id"])
        if task is None:
            print(f"record {record['task_id']}/{record['rollout_idx']}: task not in bundle", file=sys.stderr)
            mismatches += 1
            continue
        result = rollout.rescore_record(record, task, loaded.world)
        if result.drift:
            drifted += 1
            for d in result.drift:
                print(f"drift {record['task_id']}/{record['rollout_idx']}: {d}", file=sys.stderr)
        if not result.reward_matches:
            mismatches += 1
            print(f"reward mismatch {record['task_id']}/{record['rollout_idx']}: "
                  f"stored {record['reward']['r_num']}/{record['reward']['r_den']}, "
                  f"re-scored {result.report.r}", file=sys.stderr)
    print(f"re-scored {len(records)} records: {mismatches} reward mismatch(es), {drifted} with drift")
    return 1 if (mismatches or drifted) else 0


def _cmd_metrics(args: argparse.Namespace) -> int:
    if args.traj:
        records = rollout.read_buffer(args.traj)
        categories = None
        if args.bundle:
            loaded = bundle_mod.load_bundle(args.bundle)
            categories = {t.id: t.category for t in loaded.tasks}
        matrix = metrics.PassMatrix.from_buffer_records(records, categories=categories)
    else:
        matrix = metrics.PassMatrix.from_csv(args.csv)
    report = metrics.compute_report(matrix)
    print(metrics.report_json_text(report) if args.json else report.render_text())
    return 0


def _cmd_train_toy(args: argparse.Namespace) -> int:
    cfg = grpo.TrainerConfig.from_json(json.loads(Path(args.config).read_text("utf-8")))
    family = grpo.RubricBanditFamily()
    policy = family.new_policy()
    curve = grpo.train_toy(family, policy, cfg=cfg)
    with open(args.out, "w", encoding="utf-8") as fh:
        for point in curve:
            fh.write(json.dumps(point) + "\n")
    print(f"{len(curve)} updates -> {args.out} (mean reward {curve[0]['mean_reward']:.3f} "
          f"-> {curve[-1]['mean_reward']:.3f})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="partsdesk", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-world", help="generate a world deterministically from a seed")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--profile", choices=sorted(PROFILES), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_gen_world)

    p = sub.add_parser("gen-tasks", help="derive the shipped task suite from an exported world")
    p.add_argument("--world", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_tasks)

    p = sub.add_parser("pack", help="assemble a bundle from a world and a tasks directory")
    p.add_argument("--world", required=True)
    p.add_argument("--tasks", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_pack)

    p = sub.add_parser("validate", help="check a bundle; nonzero exit on findings")
    p.add_argument("--bundle", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("serve", help="serve a bundle over the wire protocol")
    p.add_argument("--bundle", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--listen", help="HOST:PORT (default env PARTSDESK_LISTEN or 127.0.0.1:7355)")
    group.add_argument("--stdio", action="store_true")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("run", help="roll out an agent over every bundle task")
    p.add_argument("--bundle", required=True)
    p.add_argument("--agent", choices=sorted(rollout.AGENTS), required=True)
    p.add_argument("--group-size", type=int, default=16)
    p.add_argument("--seeds", type=int, default=1, help="base seed; rollout i uses base+i")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--tasks", help="comma-separated task ids (default: all)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("eval", help="re-score a trajectory buffer against a bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--traj", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("metrics", help="pass@1 / pass@k / pass^k from a buffer or CSV")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--traj")
    group.add_argument("--csv")
    p.add_argument("--bundle", help="attach task categories for a per-category table")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("train-toy", help="train the tabular policy on the rubric bandit")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_toy)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (KeyboardInterrupt, BrokenPipeError):
        return 130
    except Exception as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
