"""cograph command line: train-codec, run, query, metrics."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .codec import Codec, CodecNotFound, Diverged, TrainingConfig, save_codec, train
from .codec.io import CodecFormatError
from .core import dump_graph, load_graph
from .embeddings import EmbeddingTable, synthetic_corpus
from .metrics import (EmptyGraph, GroundTruthObject, compute_metrics, format_table, query)
from .sim.scenario import ScenarioConfig, ScenarioError, run_scenario
from .sim.world import local_frame, waypoint_trajectory
from .wire import COMPRESSED, RAW512

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class ConfigError(Exception):
    pass


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _corpus_args(spec: str) -> dict:
    if spec == "default":
        return {}
    p = Path(spec)
    if not p.exists():
        raise ConfigError(f"corpus config not found: {spec}")
    try:
        d = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{spec}: {exc}") from exc
    allowed = {"n_categories", "per_category", "sigma", "seed"}
    if not isinstance(d, dict) or set(d) - allowed:
        raise ConfigError(f"corpus config keys must be among {sorted(allowed)}")
    return d


def cmd_train_codec(args) -> int:
    corpus = synthetic_corpus(**_corpus_args(args.corpus))
    try:
        cfg = TrainingConfig(epochs=args.epochs, batch_size=args.batch, lr=args.lr, seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    res = train(corpus, cfg)
    save_codec(args.out, res.params, res.qrange)
    hist = res.train_loss
    print(f"trained {len(hist)} epoch(s) on {len(corpus.features)} vectors")
    print(f"train loss: first {hist[0]:.6f} last {hist[-1]:.6f} best {min(hist):.6f}")
    if res.val_loss:
        print(f"val loss: last {res.val_loss[-1]:.6f}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _load_scenario(path: str) -> ScenarioConfig:
    try:
        return ScenarioConfig.load(path)
    except FileNotFoundError as exc:
        raise ConfigError(f"scenario not found: {path}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad scenario {path}: {exc}") from exc


def _pose_label(noise: float) -> str:
    return "GT" if noise == 0 else f"noise{noise:g}"


def run_to_dir(cfg: ScenarioConfig, codec: Codec, out: Path, both_modes: bool) -> dict:
    """Run the scenario (one or both transmit modes) and write every artifact to ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    modes = [COMPRESSED, RAW512] if both_modes else [cfg.transmit_mode]
    runs, rows = {}, []
    for mode in modes:
        res = run_scenario(replace(cfg, transmit_mode=mode), codec)
        main = min(res.merged)
        tag = "3" if mode == COMPRESSED else "512"
        (out / f"merged_graph_{mode}.txt").write_text(dump_graph(res.merged[main],
                                                                 cfg.embedding_seed))
        for rid, g in sorted(res.graphs.items()):
            (out / f"local_graph_{mode}_r{rid}.txt").write_text(dump_graph(g, cfg.embedding_seed))
        (out / f"channel_{mode}.csv").write_text(res.stats.to_csv())
        _write_json(out / f"merge_report_{mode}.json",
                    {"events": [e.report() for e in res.events]})
        m = res.metrics_dict()
        runs[mode] = m
        rows.append({"scene": cfg.name, "dimension": tag, "pose": _pose_label(cfg.pose_noise),
                     "t_error": m["t_error"], "bytes": m["bytes"]})
    metrics = {"scenario": cfg.name, "seed": cfg.seed, "runs": runs, "reduction": None}
    if both_modes and runs[RAW512]["bytes"]:
        metrics["reduction"] = 1.0 - runs[COMPRESSED]["bytes"] / runs[RAW512]["bytes"]
    _write_json(out / "metrics.json", metrics)
    _write_json(out / "scenario.json", cfg.to_dict())
    (out / "table.txt").write_text(format_table(rows))
    return metrics


def _load_codec(path: str | None) -> Codec:
    if path is None:
        raise ConfigError("a codec file is required (--codec)")
    return Codec.load(path)


def cmd_run(args) -> int:
    cfg = _load_scenario(args.scenario)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.pose_noise is not None:
        if args.pose_noise < 0:
            raise ConfigError("--pose-noise must be non-negative")
        cfg = replace(cfg, pose_noise=args.pose_noise)
    codec = _load_codec(args.codec or cfg.codec)
    metrics = run_to_dir(cfg, codec, Path(args.out), args.both_modes)
    print((Path(args.out) / "table.txt").read_text(), end="")
    if metrics["reduction"] is not None:
        print(f"byte reduction: {100 * metrics['reduction']:.2f}%")
    return EXIT_OK


def _table_for(graph_path: Path, scenario: str | None, meta: dict) -> EmbeddingTable:
    """Embedding table of the run that produced a graph dump."""
    cand = Path(scenario) if scenario else graph_path.parent / "scenario.json"
    if scenario or cand.exists():
        return _load_scenario(str(cand)).table()
    return EmbeddingTable(seed=int(meta.get("embedding_seed", 0)))


def cmd_query(args) -> int:
    p = Path(args.graph)
    if not p.exists():
        raise ConfigError(f"graph dump not found: {p}")
    if args.k <= 0:
        raise ConfigError("--k must be positive")
    graph, meta = load_graph(p.read_text())
    res = query(graph, args.text, args.k, _table_for(p, args.scenario, meta))
    for rank, (robot, nid, sim) in enumerate(res.hits, 1):
        print(f"{rank}\trobot {robot}\tnode {nid}\t{sim:.4f}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    run = Path(args.run_dir)
    if not (run / "metrics.json").exists():
        raise ConfigError(f"no metrics.json in {run}")
    saved = json.loads((run / "metrics.json").read_text())
    cfg = _load_scenario(str(run / "scenario.json"))
    table = cfg.table()
    rows = []
    for mode, m in sorted(saved["runs"].items()):
        graph, _ = load_graph((run / f"merged_graph_{mode}.txt").read_text())
        gt = [GroundTruthObject(o.category, c) for o, c in
              zip(cfg.world.objects, _gt_centers(cfg))]
        queries = sorted({o.category for o in cfg.world.objects})
        b = compute_metrics(graph, gt, queries, table, d_gt=cfg.d_gt)
        print(f"{mode}: R_obj={b.r_obj:.3f} R@1={b.r_at_1:.3f} R@5={b.r_at_5:.3f} "
              f"nodes={b.nodes} edges={b.edges} bytes={m['bytes']}")
        rows.append({"scene": cfg.name, "dimension": "3" if mode == COMPRESSED else "512",
                     "pose": _pose_label(cfg.pose_noise), "t_error": m["t_error"],
                     "bytes": m["bytes"]})
    print(format_table(rows), end="")
    return EXIT_OK


def _gt_centers(cfg: ScenarioConfig):
    """Object centers in the map frame of the lowest-id robot."""
    spec = min(cfg.robots, key=lambda r: r.id)
    frame = local_frame(waypoint_trajectory(spec.waypoints, spec.start_yaw, spec.spin_steps,
                                            spec.step))
    inv = frame.inverse()
    return [inv.apply(o.center[None])[0] for o in cfg.world.objects]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cograph")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train-codec", help="train the 512->3 feature codec")
    t.add_argument("--corpus", default="default",
                   help="'default' or a JSON file with synthetic corpus settings")
    t.add_argument("--epochs", type=int, default=500)
    t.add_argument("--batch", type=int, default=256)
    t.add_argument("--lr", type=float, default=1e-4)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train_codec)

    r = sub.add_parser("run", help="run a multi-robot scenario")
    r.add_argument("--scenario", default="two_robot_apartment.json",
                   help="scenario JSON path or the name of a bundled scenario")
    r.add_argument("--codec")
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--both-modes", action="store_true")
    r.add_argument("--pose-noise", type=float)
    r.set_defaults(func=cmd_run)

    q = sub.add_parser("query", help="top-k nodes for a text query")
    q.add_argument("--graph", required=True)
    q.add_argument("--text", required=True)
    q.add_argument("--k", type=int, default=5)
    q.add_argument("--scenario", help="scenario JSON supplying the embedding table")
    q.set_defaults(func=cmd_query)

    m = sub.add_parser("metrics", help="recompute metrics for a run directory")
    m.add_argument("--run-dir", required=True)
    m.set_defaults(func=cmd_metrics)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CodecNotFound, CodecFormatError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ScenarioError, Diverged, EmptyGraph, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
