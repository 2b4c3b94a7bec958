"""Deterministic multi-robot scenario runner."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..core import COGraph
from ..embeddings import EmbeddingTable
from ..mapping.geometry import CameraIntrinsics
from ..mapping.pipeline import Mapper, MappingConfig
from ..merging import (MergeResult, candidate_scores, estimate_translation, local_features,
                       merge_graphs, place_recognition, remote_features, t_error)
from ..metrics import GroundTruthObject, MetricsBundle, compute_metrics
from ..wire import COMPRESSED, RAW512, Registry, apply_delta, deserialize_delta, serialize_delta
from .channel import Channel, ChannelStats
from .render import generate_frames
from .world import (WorldSpec, compass_rotation, inject_pose_noise, local_frame,
                    occupancy_grid, relative_transform, waypoint_trajectory)

log = logging.getLogger(__name__)

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


class ScenarioError(RuntimeError):
    """A module error tagged with the robot and frame where it happened."""

    def __init__(self, robot: int, frame: int, cause: BaseException):
        super().__init__(f"robot {robot}, frame {frame}: {type(cause).__name__}: {cause}")
        self.robot, self.frame, self.cause = robot, frame, cause


@dataclass
class RobotSpec:
    id: int
    waypoints: list[list[float]]
    start_yaw: float = 0.0
    spin_steps: int = 8
    step: float = 0.5
    name: str = ""


@dataclass
class CameraSpec:
    width: int = 96
    height: int = 72
    fx: float = 70.0
    fy: float = 70.0
    mount_height: float = 1.0
    pitch_down_deg: float = 10.0

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(self.fx, self.fy, (self.width - 1) / 2, (self.height - 1) / 2)


@dataclass
class MergeConfig:
    sim_threshold: float = 0.95
    min_pairs: int = 3
    merge_distance: float = 0.5


@dataclass
class ScenarioConfig:
    name: str
    world: WorldSpec
    robots: list[RobotSpec]
    seed: int = 0
    camera: CameraSpec = field(default_factory=CameraSpec)
    mapping: MappingConfig = field(default_factory=MappingConfig)
    merging: MergeConfig = field(default_factory=MergeConfig)
    transmit_every: int = 10
    transmit_mode: str = COMPRESSED
    pose_noise: float = 0.0
    keep_threshold: float = 0.7
    embedding_seed: int = 0
    instance_sigma: float = 0.02
    couplings: list[tuple[str, str, float]] = field(default_factory=list)
    reorder: bool = False
    d_gt: float = 0.5
    grid_resolution: float = 0.1
    codec: str | None = None
    threaded_mapping: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        d["world"] = WorldSpec.from_dict(d["world"])
        d["robots"] = [RobotSpec(**r) for r in d["robots"]]
        if "camera" in d:
            d["camera"] = CameraSpec(**d["camera"])
        if "mapping" in d:
            d["mapping"] = MappingConfig(**d["mapping"])
        if "merging" in d:
            d["merging"] = MergeConfig(**d["merging"])
        d["couplings"] = [tuple(c) for c in d.get("couplings", [])]
        cfg = cls(**d)
        if cfg.transmit_mode not in (COMPRESSED, RAW512):
            raise ValueError(f"transmit_mode must be {COMPRESSED!r} or {RAW512!r}")
        if cfg.transmit_every <= 0:
            raise ValueError("transmit_every must be positive")
        ids = [r.id for r in cfg.robots]
        if len(set(ids)) != len(ids) or any(not 0 <= i <= 255 for i in ids):
            raise ValueError("robot ids must be unique 8-bit values")
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["world"] = self.world.to_dict()
        d["couplings"] = [list(c) for c in self.couplings]
        return d

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        p = Path(path)
        if not p.exists() and (SCENARIO_DIR / p.name).exists():
            p = SCENARIO_DIR / p.name
        return cls.from_dict(json.loads(p.read_text()))

    def table(self) -> EmbeddingTable:
        return EmbeddingTable(seed=self.embedding_seed,
                              couplings={(a, b): float(c) for a, b, c in self.couplings})


@dataclass
class MergeEvent:
    time: int
    robot: int
    remote: int
    matched: int
    t: np.ndarray | None = None
    t_true: np.ndarray | None = None
    score: int = 0
    fused: list[tuple[int, int]] = field(default_factory=list)
    candidates: list[dict] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.t is not None

    @property
    def error(self) -> float | None:
        return None if self.t is None else t_error(self.t, self.t_true)

    def report(self) -> dict:
        return {
            "time": self.time, "robot": self.robot, "remote": self.remote,
            "matching_pairs": self.matched, "success": self.success,
            "t": None if self.t is None else [float(v) for v in self.t],
            "t_true": [float(v) for v in self.t_true],
            "t_error": self.error, "score": self.score,
            "fused_pairs": [list(p) for p in self.fused],
            "candidates": self.candidates,
        }


@dataclass
class RobotState:
    spec: RobotSpec
    mapper: Mapper
    frames: list
    frame_pose: object  # world-from-map
    registry: Registry = field(default_factory=Registry)
    merged: dict[int, MergeResult] = field(default_factory=dict)


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    graphs: dict[int, COGraph]
    merged: dict[int, COGraph]
    merges: dict[int, dict[int, MergeResult]]
    events: list[MergeEvent]
    stats: ChannelStats
    metrics: MetricsBundle
    ground_truth: dict[int, list[GroundTruthObject]]

    def final_fused_pairs(self) -> dict[str, list[tuple[int, int]]]:
        return {f"{r}<-{s}": list(m.fused) for r, ms in sorted(self.merges.items())
                for s, m in sorted(ms.items())}

    def metrics_dict(self) -> dict:
        d = self.metrics.to_dict()
        d["scenario"] = self.config.name
        d["transmit_mode"] = self.config.transmit_mode
        d["pose_noise"] = self.config.pose_noise
        d["bytes_per_robot"] = {str(k): int(v) for k, v in sorted(self.stats.sent.items())}
        d["merge_events"] = len(self.events)
        d["successful_merges"] = sum(e.success for e in self.events)
        d["fused_pairs"] = {k: [list(p) for p in v] for k, v in self.final_fused_pairs().items()}
        d["node_payload_bytes"] = self.metrics.extra.get("node_payload_bytes")
        return d


def _attempt_merge(cfg: ScenarioConfig, me: RobotState, remote_id: int, codec, time: int,
                   t_true: np.ndarray, R: np.ndarray) -> MergeEvent:
    rg = me.registry[remote_id]
    local = me.mapper.graph
    remote_f = remote_features(rg.graph, codec, rg.raw)
    mc = cfg.merging
    pairs = place_recognition(local, rg.graph, codec, mc.sim_threshold, mc.min_pairs,
                              remote_f=remote_f)
    ev = MergeEvent(time, me.spec.id, remote_id, 0, t_true=t_true)
    if pairs is None:
        me.merged.pop(remote_id, None)
        return ev
    ev.matched = len(pairs)
    best = estimate_translation(pairs, local, rg.graph, R, mc.merge_distance)
    ev.t, ev.score = best.t, best.score
    ev.candidates = [{"pair": list(c.source), "t": [float(v) for v in c.t], "score": c.score,
                      "residual": c.residual}
                     for c in candidate_scores(pairs, local, rg.graph, R, mc.merge_distance)]
    res = merge_graphs(local, rg.graph, R, best.t, local_features(local), remote_f,
                       mc.sim_threshold, mc.merge_distance)
    ev.fused = res.fused
    me.merged[remote_id] = res
    return ev


def run_scenario(cfg: ScenarioConfig, codec=None) -> ScenarioResult:
    if cfg.transmit_mode == COMPRESSED and codec is None:
        raise ValueError("compressed transmission needs a trained codec")
    if codec is not None:
        codec.keep_threshold = cfg.keep_threshold
    table = cfg.table()
    k = cfg.camera.intrinsics()
    pitch = np.deg2rad(cfg.camera.pitch_down_deg)
    robots: dict[int, RobotState] = {}
    for spec in cfg.robots:
        traj = waypoint_trajectory(spec.waypoints, spec.start_yaw, spec.spin_steps, spec.step)
        slam = inject_pose_noise(traj, cfg.pose_noise, seed=cfg.seed * 1000 + spec.id)
        frame = local_frame(traj)
        grid = occupancy_grid(cfg.world, frame, cfg.grid_resolution)
        frames = list(generate_frames(cfg.world, traj, k, cfg.camera.width, cfg.camera.height,
                                      seed=cfg.seed, table=table,
                                      camera_height=cfg.camera.mount_height, pitch_down=pitch,
                                      map_frame=frame, slam=slam,
                                      instance_sigma=cfg.instance_sigma))
        mapper = Mapper(spec.id, grid, cfg.mapping, codec, threaded=cfg.threaded_mapping)
        robots[spec.id] = RobotState(spec, mapper, frames, frame)

    ids = sorted(robots)
    truth = {(a, b): relative_transform(robots[a].frame_pose, robots[b].frame_pose)
             for a in ids for b in ids if a != b}
    compass = {(a, b): compass_rotation(robots[a].frame_pose, robots[b].frame_pose)
               for a in ids for b in ids if a != b}
    channel = Channel(reorder=cfg.reorder)
    events: list[MergeEvent] = []
    kind = f"delta-{cfg.transmit_mode}"
    n_steps = max(len(r.frames) for r in robots.values())
    node_payload = 0

    def transmit(rs: RobotState, tick: int) -> None:
        nonlocal node_payload
        g = rs.mapper.update_graph()
        pending = len(g.nodes) - g.sent_nodes + len(g.dirty) + len(g.edges) - g.sent_edges
        if pending == 0 or len(ids) < 2:
            return
        data = serialize_delta(g, cfg.transmit_mode)
        msg = deserialize_delta(data)
        node_payload += len(data) - 5 - 3 * len(msg.edges)
        channel.broadcast(tick, rs.spec.id, ids, data, kind)

    def receive(rs: RobotState, tick: int) -> None:
        got = channel.deliver(rs.spec.id)
        for src, payload in got:
            apply_delta(rs.registry, payload)
        for src in sorted({s for s, _ in got}):
            R = compass[(rs.spec.id, src)]
            t_true = truth[(rs.spec.id, src)][1]
            events.append(_attempt_merge(cfg, rs, src, codec, tick, t_true, R))

    for tick in range(n_steps):
        for rid in ids:
            rs = robots[rid]
            if tick < len(rs.frames):
                try:
                    rs.mapper.process_frame(rs.frames[tick])
                    last = tick == len(rs.frames) - 1
                    if (tick + 1) % cfg.transmit_every == 0 or last:
                        transmit(rs, tick)
                except Exception as exc:  # tag with robot and frame
                    raise ScenarioError(rid, tick, exc) from exc
        for rid in ids:
            receive(robots[rid], tick)

    for rs in robots.values():
        rs.mapper.close()

    # final merged view per robot: every remote graph that was registered is
    # folded in (robot-id order) with its last estimated translation
    merged_graphs, final = {}, {}
    for rid in ids:
        rs = robots[rid]
        g, final[rid] = rs.mapper.graph, {}
        for src in sorted(rs.merged):
            est = rs.merged[src]
            rg = rs.registry[src]
            res = merge_graphs(g, rg.graph, est.R, est.t, local_features(g),
                               remote_features(rg.graph, codec, rg.raw),
                               cfg.merging.sim_threshold, cfg.merging.merge_distance)
            final[rid][src] = res
            g = res.graph
        merged_graphs[rid] = g

    gts = {}
    for rid in ids:
        inv = robots[rid].frame_pose.inverse()
        gts[rid] = [GroundTruthObject(o.category, inv.apply(o.center[None])[0])
                    for o in cfg.world.objects]
    main = ids[0]
    queries = sorted({o.category for o in cfg.world.objects})
    errs = [e.error for e in events if e.success]
    metrics = compute_metrics(merged_graphs[main], gts[main], queries, table,
                              t_errors=errs, bytes_sent=channel.stats.total, d_gt=cfg.d_gt)
    metrics.extra["node_payload_bytes"] = node_payload
    return ScenarioResult(cfg, {r: robots[r].mapper.graph for r in ids}, merged_graphs,
                          final, events, channel.stats,
                          metrics, gts)
