"""Cross-frame object tracks, label-wise voxel clustering and feature assignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .geometry import FOPointCloud


class NoCandidateNode(LookupError):
    pass


def voxel_keys(points: np.ndarray, voxel: float) -> np.ndarray:
    """Unique integer voxel coordinates (sorted lexicographically)."""
    if len(points) == 0:
        return np.zeros((0, 3), dtype=np.int64)
    return np.unique(np.floor(np.asarray(points) / voxel).astype(np.int64), axis=0)


def aabb(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return points.min(axis=0), points.max(axis=0)


def aabb_iou(a: tuple[np.ndarray, np.ndarray], b: tuple[np.ndarray, np.ndarray]) -> float:
    lo = np.maximum(a[0], b[0])
    hi = np.minimum(a[1], b[1])
    inter = float(np.prod(np.clip(hi - lo, 0.0, None)))
    vol = lambda box: float(np.prod(box[1] - box[0]))  # noqa: E731
    union = vol(a) + vol(b) - inter
    return inter / union if union > 0 else 0.0


@dataclass
class ObjectTrack:
    label: int
    voxels: np.ndarray  # (N, 3) int voxel keys, unique
    feat_sum: np.ndarray | None
    count: int
    voxel: float = 0.05

    @property
    def points(self) -> np.ndarray:
        return (self.voxels + 0.5) * self.voxel

    @property
    def feature(self) -> np.ndarray | None:
        """Running mean of contributed 2-D features."""
        return None if self.feat_sum is None else self.feat_sum / self.count

    @property
    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = aabb(self.points)
        half = self.voxel / 2
        return lo - half, hi + half


def _cloud_box(points: np.ndarray, voxel: float):
    lo, hi = aabb(points)
    # pad by half a voxel so single-plane views still have volume
    return lo - voxel / 2, hi + voxel / 2


def fuse_tracks(tracks: list[ObjectTrack], new_clouds: list[FOPointCloud],
                overlap: float = 0.25, voxel: float = 0.05) -> list[ObjectTrack]:
    """Join each cloud to the best same-label track with bbox IoU >= overlap."""
    for cloud in new_clouds:
        if len(cloud.points) == 0:
            continue
        box = _cloud_box(cloud.points, voxel)
        best, best_iou = None, overlap
        for t in tracks:
            if t.label != cloud.label:
                continue
            iou = aabb_iou(box, t.box())
            if iou >= best_iou and (best is None or iou > best_iou):
                best, best_iou = t, iou
        keys = voxel_keys(cloud.points, voxel)
        feat = None if cloud.feat2d is None else np.asarray(cloud.feat2d, dtype=np.float64)
        if best is None:
            tracks.append(ObjectTrack(cloud.label, keys, None if feat is None else feat.copy(),
                                      1, voxel))
            continue
        best.voxels = np.unique(np.concatenate([best.voxels, keys]), axis=0)
        if feat is not None:
            best.feat_sum = feat.copy() if best.feat_sum is None else best.feat_sum + feat
        best.count += 1
    return tracks


@dataclass
class NodeCandidate:
    center: np.ndarray
    extents: np.ndarray
    label: int
    n_points: int


def cluster_points(points: np.ndarray, label: int, voxel: float = 0.05, radius: float = 0.15,
                   min_voxels: int = 20) -> list[NodeCandidate]:
    keys = voxel_keys(points, voxel)
    if len(keys) == 0:
        return []
    centers = (keys + 0.5) * voxel
    pairs = cKDTree(centers).query_pairs(radius + 1e-9, output_type="ndarray")
    n = len(keys)
    adj = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    n_comp, comp = connected_components(adj, directed=False)
    out = []
    # keys are sorted, so components ordered by first member are order-independent
    _, first = np.unique(comp, return_index=True)
    for c in np.argsort(first):
        members = centers[comp == c]
        if len(members) < min_voxels:
            continue
        lo, hi = members.min(axis=0), members.max(axis=0)
        out.append(NodeCandidate(members.mean(axis=0), hi - lo + voxel, label, len(members)))
    return out


def cluster_nodes(tracks: list[ObjectTrack], voxel: float = 0.05, radius: float = 0.15,
                  min_voxels: int = 20) -> list[NodeCandidate]:
    """Per label: voxelize all track points, link voxels within ``radius`` and
    keep components with at least ``min_voxels`` voxels."""
    by_label: dict[int, list[np.ndarray]] = {}
    for t in tracks:
        by_label.setdefault(t.label, []).append(t.points)
    out = []
    for label in sorted(by_label):
        pts = np.concatenate(by_label[label])
        out.extend(cluster_points(pts, label, voxel, radius, min_voxels))
    return out


def assign_feature_to_node(track: ObjectTrack, nodes) -> int:
    """Id of the same-label node nearest the track centroid (lowest id on ties).

    ``nodes`` is an iterable of objects with ``id``, ``pos`` and ``label``.
    """
    c = track.centroid
    best = None
    for n in nodes:
        if n.label != track.label:
            continue
        d = float(np.linalg.norm(np.asarray(n.pos) - c))
        if best is None or d < best[0] or (d == best[0] and n.id < best[1]):
            best = (d, n.id)
    if best is None:
        raise NoCandidateNode(f"no node with label {track.label}")
    return best[1]
