"""Box-world ray casting into depth rasters and FO images."""

from __future__ import annotations

from collections.abc import Iterator

import numpy as np

from ..embeddings import EmbeddingTable, feature_label, perturb
from ..fo import SegmentedObject, build_fo_image
from ..mapping.frames import Frame
from ..mapping.geometry import CameraIntrinsics, Pose, camera_mount, pixel_rays
from .world import RobotTrajectory, WorldSpec


def instance_features(world: WorldSpec, table: EmbeddingTable, seed: int,
                      sigma: float = 0.02) -> np.ndarray:
    """One unit feature per world object: category vector plus seeded jitter."""
    out = []
    for i, o in enumerate(world.objects):
        rng = np.random.default_rng([seed, i])
        out.append(perturb(table.embed(o.category), sigma, rng)[0])
    return np.array(out).reshape(len(world.objects), table.dim)


def _ray_boxes(origin: np.ndarray, dirs: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Entry distance of every ray into every box; inf on a miss. dirs: (N, 3), boxes: (B, 3)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs[:, None, :]
        t1 = (lo[None] - origin) * inv
        t2 = (hi[None] - origin) * inv
    tmin = np.nanmax(np.minimum(t1, t2), axis=2)
    tmax = np.nanmin(np.maximum(t1, t2), axis=2)
    hit = (tmax >= tmin) & (tmin > 1e-9)
    return np.where(hit, tmin, np.inf)


def render(world: WorldSpec, cam_world: Pose, k: CameraIntrinsics, width: int, height: int,
           floor: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Depth raster (z-depth, inf on a miss) and per-pixel object index (-1 for none)."""
    rays = pixel_rays(width, height, k).reshape(-1, 3)
    dirs = rays @ cam_world.rotation.T  # unit camera-z, so ray parameter == depth
    origin = cam_world.translation
    n_obj = len(world.objects)
    boxes = [(o.lo, o.hi) for o in world.objects] + world.wall_boxes()
    if boxes:
        lo = np.stack([b[0] for b in boxes])
        hi = np.stack([b[1] for b in boxes])
        t = _ray_boxes(origin, dirs, lo, hi)
    else:
        t = np.full((len(dirs), 0), np.inf)
    if floor:
        with np.errstate(divide="ignore", invalid="ignore"):
            tf = np.where(dirs[:, 2] < 0, -origin[2] / dirs[:, 2], np.inf)
        t = np.concatenate([t, tf[:, None]], axis=1)
    if t.shape[1] == 0:
        return np.full((height, width), np.inf), np.full((height, width), -1)
    which = np.argmin(t, axis=1)
    depth = t[np.arange(len(t)), which]
    obj = np.where((which < n_obj) & np.isfinite(depth), which, -1)
    return depth.reshape(height, width), obj.reshape(height, width)


def generate_frames(world: WorldSpec, trajectory: RobotTrajectory, k: CameraIntrinsics,
                    width: int, height: int, seed: int = 0, table: EmbeddingTable | None = None,
                    camera_height: float = 1.0, pitch_down: float = 0.0,
                    map_frame: Pose | None = None, slam: RobotTrajectory | None = None,
                    instance_sigma: float = 0.02) -> Iterator[Frame]:
    """Render ``trajectory`` (true body poses, world frame) into frames.

    Each frame's pose is what the robot believes: the ``slam`` trajectory
    (defaults to the true one) expressed in ``map_frame`` (defaults to the
    first true pose).
    """
    table = table or EmbeddingTable(seed=seed)
    feats = instance_features(world, table, seed, instance_sigma)
    labels = [feature_label(o.category) for o in world.objects]
    mount = camera_mount(camera_height, pitch_down)
    map_frame = map_frame or trajectory.poses[0]
    to_map = map_frame.inverse()
    slam = slam or trajectory
    for body, believed in zip(trajectory.poses, slam.poses):
        depth, obj = render(world, body.compose(mount), k, width, height)
        objects = []
        for i in np.unique(obj[obj >= 0]):
            idx = int(i) + 1  # stable per-object index; 0 stays free
            objects.append(SegmentedObject(idx, obj == i, labels[i], feats[i]))
        fo = build_fo_image(objects, width, height)
        pose = to_map.compose(believed).compose(mount)
        yield Frame(pose, k, depth, fo, {o.index: o.feat2d for o in objects})
