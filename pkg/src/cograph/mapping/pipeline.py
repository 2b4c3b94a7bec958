"""Frame-to-graph pipeline for one robot.

Stage 1 back-projects each frame into per-object clouds; stage 2 fuses those
clouds into feature tracks. The stages are joined by a FIFO queue and may run
on a worker thread; results are identical either way because the single
consumer drains in arrival order. ``update_graph`` clusters, reconciles the
candidates with existing nodes, assigns features and adds edges.
"""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass

import numpy as np

from ..core import COGraph, NodeRecord, quantize_extents
from .frames import Frame
from .fusion import ObjectTrack, assign_feature_to_node, cluster_nodes, fuse_tracks
from .geometry import back_project, grazing_pixels
from .grid import OccupancyGrid, generate_edges


@dataclass
class MappingConfig:
    overlap: float = 0.25
    voxel: float = 0.05
    link_radius: float = 0.15
    min_voxels: int = 20
    edge_distance: float = 2.0
    assoc_radius: float = 0.5  # candidate <-> existing node association
    pos_tolerance: float = 0.05  # moves smaller than this are not re-published
    max_depth_step: float | None = 0.1  # relative depth jump marking edge-on pixels


class Mapper:
    def __init__(self, robot: int, grid: OccupancyGrid | None = None,
                 config: MappingConfig | None = None, codec=None, threaded: bool = False):
        self.graph = COGraph(robot)
        self.grid = grid
        self.config = config or MappingConfig()
        self.codec = codec
        self.tracks: list[ObjectTrack] = []
        self.frames_seen = 0
        self._queue: queue.Queue | None = None
        self._error: BaseException | None = None
        if threaded:
            self._queue = queue.Queue()
            self._worker = threading.Thread(target=self._consume, daemon=True)
            self._worker.start()

    def _fuse(self, clouds) -> None:
        fuse_tracks(self.tracks, clouds, self.config.overlap, self.config.voxel)

    def _consume(self) -> None:
        while True:
            clouds = self._queue.get()
            try:
                if clouds is None:
                    return
                if self._error is None:
                    self._fuse(clouds)
            except BaseException as exc:  # surfaced on the next drain()
                self._error = exc
            finally:
                self._queue.task_done()

    def process_frame(self, frame: Frame) -> None:
        depth = frame.depth
        if self.config.max_depth_step is not None:
            depth = np.where(grazing_pixels(frame.fo, depth, self.config.max_depth_step),
                             np.inf, depth)
        clouds = back_project(frame.fo, depth, frame.pose, frame.intrinsics, frame.features)
        self.frames_seen += 1
        if self._queue is None:
            self._fuse(clouds)
        else:
            self._queue.put(clouds)

    def drain(self) -> None:
        if self._queue is not None:
            self._queue.join()
            if self._error is not None:
                raise self._error

    def close(self) -> None:
        if self._queue is not None:
            self._queue.put(None)
            self._worker.join()
            self._queue = None

    def update_graph(self) -> COGraph:
        self.drain()
        cfg = self.config
        g = self.graph
        cands = cluster_nodes(self.tracks, cfg.voxel, cfg.link_radius, cfg.min_voxels)

        # greedy nearest association of candidates to existing nodes
        pairs = []
        for ci, c in enumerate(cands):
            for nid, n in g.nodes.items():
                if n.label == c.label:
                    d = float(np.linalg.norm(n.pos - c.center))
                    if d <= cfg.assoc_radius:
                        pairs.append((d, ci, nid))
        pairs.sort()
        used_c, used_n = set(), set()
        for d, ci, nid in pairs:
            if ci in used_c or nid in used_n:
                continue
            used_c.add(ci)
            used_n.add(nid)
            c = cands[ci]
            bbox = quantize_extents(c.extents)
            if d > cfg.pos_tolerance or bbox != g.nodes[nid].bbox:
                g.update_node(nid, pos=c.center, bbox=bbox)
        for ci, c in enumerate(cands):
            if ci not in used_c:
                g.add_node(NodeRecord(g.robot, 0, c.center, c.label, quantize_extents(c.extents)))

        self._assign_features()
        for a, b in generate_edges(g.nodes.values(), self.grid, cfg.edge_distance):
            g.add_edge(a, b)
        return g

    def _assign_features(self) -> None:
        g = self.graph
        sums: dict[int, np.ndarray] = {}
        labels = {n.label for n in g.nodes.values()}
        for t in self.tracks:
            if t.feat_sum is None or t.label not in labels:
                continue
            nid = assign_feature_to_node(t, g.nodes.values())
            sums[nid] = sums.get(nid, 0.0) + t.feat_sum
        # a node that no track picked (e.g. one fragment of a split object)
        # borrows the feature of its nearest same-label track
        for nid, n in g.nodes.items():
            if nid in sums:
                continue
            near = [(float(np.linalg.norm(t.centroid - n.pos)), k)
                    for k, t in enumerate(self.tracks)
                    if t.label == n.label and t.feat_sum is not None]
            if near:
                sums[nid] = self.tracks[min(near)[1]].feat_sum
        ids = sorted(sums)
        if not ids:
            return
        feats = np.stack([sums[i] / np.linalg.norm(sums[i]) for i in ids])
        if self.codec is not None:
            q, keep = self.codec.compress(feats)
        for row, nid in enumerate(ids):
            node = g.nodes[nid]
            f = feats[row]
            fields = {}
            if node.feat512 is None or not np.array_equal(node.feat512, f):
                fields["feat512"] = f
            if self.codec is not None:
                fields["feat3"] = tuple(int(v) for v in q[row])
                fields["keep_raw"] = bool(keep[row])
            if fields:
                g.update_node(nid, **fields)
