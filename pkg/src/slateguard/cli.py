"""Command-line entry points.

Subcommands mirror the pipeline stages and communicate through plain file
artifacts in the configured output directory, so each stage can be re-run
or inspected on its own. Exit codes: 0 success, 1 configuration problem,
2 runtime or integrity failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import data as dataio
from . import pipeline
from .audit import append_record, load_audit_log
from .config import ConfigError, PipelineConfig, load_config
from .feasibility import feasibility_sweep, is_feasible_exact
from .metrics import build_relevance, ndcg_at_k, paired_bootstrap_test, pass_rate
from .mf import load_model, save_model, train_mf, window_prefix
from .proposer import ProposerConfig, ProposerKind
from .synth import generate_corpus

WINDOWS_FILE = "windows.jsonl"
CATALOG_FILE = "catalog.jsonl"
TRAIN_FILE = "train.data"
TEST_FILE = "test.data"
MODEL_FILE = "model.npz"
CURVE_FILE = "feasibility_curve.tsv"
FEASIBLE_FILE = "feasible_users.jsonl"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slateguard",
        description="governed top-N recommendation with verifiable slate certificates",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="generate a deterministic synthetic corpus")
    p.add_argument("--out", required=True, help="directory for u.data and u.item")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--users", type=int, default=943)
    p.add_argument("--items", type=int, default=1682)
    p.add_argument("--interactions", type=int, default=100_000)

    for name, help_text in (
        ("ingest", "parse raw data, split, assign popularity buckets"),
        ("train", "fit the factor model on the training split"),
        ("windows", "precompute per-user candidate windows"),
        ("feasibility", "sweep window sizes and report feasibility rates"),
        ("run", "run the propose/verify/repair pipeline for every user"),
        ("report", "aggregate run summaries and compare methods"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True)
        if name == "windows":
            p.add_argument("--w", type=int, default=None, help="window size to precompute")
        if name == "feasibility":
            p.add_argument(
                "--w-list", default=None,
                help="comma-separated window sizes, e.g. 20,40,60,80,100",
            )
        if name == "run":
            p.add_argument(
                "--method",
                choices=[k.value for k in ProposerKind] + [pipeline.GREEDY_METHOD],
                default=None,
                help="override the configured proposer",
            )
            p.add_argument(
                "--no-repair", action="store_true",
                help="serve rejected proposals instead of repairing them",
            )

    p = sub.add_parser("verify-log", help="replay every verdict in an audit log")
    p.add_argument("audit_file")
    p.add_argument("--config", required=True)
    return parser


def _cmd_synth(args: argparse.Namespace) -> int:
    paths = generate_corpus(
        args.out,
        n_users=args.users,
        n_items=args.items,
        n_interactions=args.interactions,
        seed=args.seed,
    )
    print(f"wrote {paths.interactions}")
    print(f"wrote {paths.items}")
    return 0


def _cmd_ingest(cfg: PipelineConfig) -> int:
    interactions = dataio.load_interactions(cfg.data_dir / "u.data")
    genres = dataio.load_item_genres(cfg.data_dir / "u.item")
    split = dataio.split_train_test(interactions, cfg.split_seed, cfg.holdout_fraction)
    buckets = dataio.assign_popularity_buckets(split.train, genres.keys(), cfg.head_fraction)
    metadata = dataio.build_item_metadata(genres, buckets, split.train)

    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    dataio.write_interactions(split.train, out / TRAIN_FILE)
    dataio.write_interactions(split.test, out / TEST_FILE)
    dataio.write_catalog(metadata, out / CATALOG_FILE)
    summary = dataio.catalog_summary(metadata)
    summary.update(
        {
            "n_interactions": len(interactions),
            "n_train": len(split.train),
            "n_test": len(split.test),
            "n_users": len({x.user_id for x in interactions}),
            "split_seed": cfg.split_seed,
        }
    )
    (out / "ingest_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(
        f"ingested {summary['n_interactions']} interactions: "
        f"{summary['n_train']} train / {summary['n_test']} test, "
        f"{summary['n_items']} items ({summary['n_head']} head)"
    )
    return 0


def _cmd_train(cfg: PipelineConfig) -> int:
    train = dataio.load_interactions(cfg.output_dir / TRAIN_FILE)
    model = train_mf(train, cfg.model)
    save_model(model, cfg.output_dir / MODEL_FILE)
    print(
        f"trained on {len(train)} interactions: "
        f"{len(model.user_ids)} users x {len(model.item_ids)} items, "
        f"{cfg.model.factors} factors, {cfg.model.epochs} epochs"
    )
    return 0


def _cmd_windows(cfg: PipelineConfig, w_override: int | None) -> int:
    w = w_override or max((*cfg.sweep_window_sizes, cfg.window_size))
    model = load_model(cfg.output_dir / MODEL_FILE)
    metadata = dataio.load_catalog(cfg.output_dir / CATALOG_FILE)
    train = dataio.load_interactions(cfg.output_dir / TRAIN_FILE)
    seen = pipeline.seen_items_by_user(train)
    windows = pipeline.build_windows(model, seen.keys(), metadata.keys(), seen, w)
    pipeline.write_windows(windows, cfg.output_dir / WINDOWS_FILE)
    skipped = len(seen) - len(windows)
    print(f"wrote windows of size {w} for {len(windows)} users ({skipped} skipped)")
    return 0


def _load_windows_at(cfg: PipelineConfig, w: int) -> dict:
    windows = pipeline.load_windows(cfg.output_dir / WINDOWS_FILE)
    short = [u for u, win in windows.items() if len(win.entries) < w]
    if short:
        raise RuntimeError(
            f"windows file holds fewer than {w} entries for {len(short)} users; "
            f"re-run the windows stage with --w {w} or larger"
        )
    return {u: window_prefix(win, w) for u, win in windows.items()}


def _cmd_feasibility(cfg: PipelineConfig, w_list: str | None) -> int:
    sizes = (
        tuple(int(x) for x in w_list.split(",")) if w_list else cfg.sweep_window_sizes
    )
    metadata = dataio.load_catalog(cfg.output_dir / CATALOG_FILE)
    windows = _load_windows_at(cfg, max(sizes))
    sweep = feasibility_sweep(windows, metadata, cfg.constraints, sizes)
    pipeline.write_feasibility_curve(sweep, cfg.output_dir / CURVE_FILE, cfg.window_size)
    pipeline.write_feasible_users(sweep, cfg.output_dir / FEASIBLE_FILE)
    for point in sweep.points:
        mark = "  <- operating point" if point.window_size == cfg.window_size else ""
        print(
            f"w={point.window_size:>4}  feasible {point.feasible_count}/{point.total_users}"
            f" ({point.feasibility_rate:.3f})  mean tail shortage "
            f"{point.mean_tail_shortage:.3f}{mark}"
        )
    return 0


def _cmd_run(cfg: PipelineConfig, method: str | None, no_repair: bool) -> int:
    metadata = dataio.load_catalog(cfg.output_dir / CATALOG_FILE)
    windows = _load_windows_at(cfg, cfg.window_size)
    test = dataio.load_interactions(cfg.output_dir / TEST_FILE)
    relevance = build_relevance(test)
    repair = cfg.repair and not no_repair

    if method == pipeline.GREEDY_METHOD:
        proposer_cfg: ProposerConfig | None = None
        label = pipeline.GREEDY_METHOD
    elif method is None:
        proposer_cfg = cfg.proposer
        label = cfg.proposer.proposer_id
    else:
        kind = ProposerKind(method)
        proposer_cfg = ProposerConfig(
            kind=kind,
            rounds=cfg.proposer.rounds,
            fault_probability=cfg.proposer.fault_probability,
            seed=cfg.proposer.seed,
            endpoint=cfg.proposer.endpoint if kind is ProposerKind.REMOTE else None,
        )
        label = proposer_cfg.proposer_id

    records = pipeline.run_method(windows, metadata, cfg.constraints, proposer_cfg, repair)
    suffix = "" if repair else "_norepair"
    audit_path = cfg.output_dir / f"audit_{label}{suffix}.jsonl"
    audit_path.unlink(missing_ok=True)
    for rec in records:
        append_record(audit_path, rec)

    feasible = {
        u: is_feasible_exact(windows[u], metadata, cfg.constraints).feasible
        for u in sorted(windows)
    }
    feasible_users = sorted(u for u, ok in feasible.items() if ok)
    accepted = pipeline.accepted_flags(records)
    slates = pipeline.served_slates(records)
    outcome_counts: dict[str, int] = {}
    for rec in records:
        outcome_counts[rec.outcome.value] = outcome_counts.get(rec.outcome.value, 0) + 1

    summary = {
        "method": label,
        "repair": repair,
        "window_size": cfg.window_size,
        "users_total": len(records),
        "feasible_users": feasible_users,
        "outcome_counts": dict(sorted(outcome_counts.items())),
        "pass_rate_all": pass_rate(accepted),
        "pass_rate_feasible": (
            pass_rate(accepted, feasible_users) if feasible_users else None
        ),
        "mean_ndcg10_feasible": (
            pipeline.mean_ndcg(slates, relevance, feasible_users, k=10)
            if feasible_users
            else None
        ),
        "audit_file": audit_path.name,
    }
    summary_path = cfg.output_dir / f"run_summary_{label}{suffix}.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    print(
        f"method={label} repair={repair}: outcomes {summary['outcome_counts']}, "
        f"pass rate {summary['pass_rate_all']:.3f} overall"
        + (
            f" / {summary['pass_rate_feasible']:.3f} feasible, "
            f"NDCG@10 {summary['mean_ndcg10_feasible']:.3f} on "
            f"{len(feasible_users)} feasible users"
            if feasible_users
            else ""
        )
    )
    print(f"audit log: {audit_path}")
    return 0


def _cmd_report(cfg: PipelineConfig) -> int:
    out = cfg.output_dir
    summaries = []
    for path in sorted(out.glob("run_summary_*.json")):
        summaries.append(json.loads(path.read_text()))
    if not summaries:
        raise RuntimeError(f"no run summaries under {out}; run the pipeline first")
    test = dataio.load_interactions(out / TEST_FILE)
    relevance = build_relevance(test)

    per_method: dict[str, dict[int, tuple[int, ...]]] = {}
    feasible_by_method: dict[str, set[int]] = {}
    for s in summaries:
        key = s["method"] + ("" if s["repair"] else "_norepair")
        records = load_audit_log(out / s["audit_file"])
        per_method[key] = pipeline.served_slates(records)
        feasible_by_method[key] = set(s["feasible_users"])

    comparisons = []
    keys = sorted(per_method)
    for i, a in enumerate(keys):
        for b in keys[i + 1 :]:
            common = sorted(feasible_by_method[a] & feasible_by_method[b])
            if not common:
                continue
            vec_a = [
                ndcg_at_k(per_method[a].get(u, ()), relevance.get(u, {}), 10)
                for u in common
            ]
            vec_b = [
                ndcg_at_k(per_method[b].get(u, ()), relevance.get(u, {}), 10)
                for u in common
            ]
            result = paired_bootstrap_test(
                vec_a, vec_b, resamples=cfg.bootstrap_resamples, seed=cfg.bootstrap_seed
            )
            comparisons.append(
                {
                    "method_a": a,
                    "method_b": b,
                    "n_users": len(common),
                    "mean_ndcg10_diff": result.mean_diff,
                    "p_value": result.p_value,
                    "resamples": result.resamples,
                    "seed": result.seed,
                }
            )

    report = {"runs": summaries, "comparisons": comparisons}
    curve = out / CURVE_FILE
    if curve.exists():
        report["feasibility_curve"] = curve.read_text().splitlines()
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    for c in comparisons:
        print(
            f"{c['method_a']} vs {c['method_b']}: mean NDCG@10 diff "
            f"{c['mean_ndcg10_diff']:+.4f} (p={c['p_value']:.4f}, n={c['n_users']})"
        )
    print(f"report: {out / 'report.json'}")
    return 0


def _cmd_verify_log(cfg: PipelineConfig, audit_file: str) -> int:
    metadata = dataio.load_catalog(cfg.output_dir / CATALOG_FILE)
    records = load_audit_log(audit_file)
    replayed, drifts = pipeline.verify_log(records, metadata)
    if drifts:
        for d in drifts:
            print(
                f"drift: user {d.user_id} method {d.method} stage {d.stage}: {d.detail}",
                file=sys.stderr,
            )
        print(
            f"replayed {replayed} verdicts from {len(records)} records: "
            f"{len(drifts)} DRIFTED",
            file=sys.stderr,
        )
        return 2
    print(f"replayed {replayed} verdicts from {len(records)} records: no drift")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "synth-data":
            return _cmd_synth(args)
        cfg = load_config(args.config)
        if args.command == "ingest":
            return _cmd_ingest(cfg)
        if args.command == "train":
            return _cmd_train(cfg)
        if args.command == "windows":
            return _cmd_windows(cfg, args.w)
        if args.command == "feasibility":
            return _cmd_feasibility(cfg, args.w_list)
        if args.command == "run":
            return _cmd_run(cfg, args.method, args.no_repair)
        if args.command == "report":
            return _cmd_report(cfg)
        if args.command == "verify-log":
            return _cmd_verify_log(cfg, args.audit_file)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
