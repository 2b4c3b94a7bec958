"""Synthetic box worlds, robot trajectories and per-robot occupancy grids."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..mapping.geometry import Pose, yaw_matrix
from ..mapping.grid import OCCUPIED, OccupancyGrid


@dataclass
class WorldObject:
    category: str
    center: np.ndarray
    extents: np.ndarray

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)
        self.extents = np.asarray(self.extents, dtype=np.float64)
        if np.any(self.extents <= 0):
            raise ValueError(f"{self.category}: extents must be positive")

    @property
    def lo(self) -> np.ndarray:
        return self.center - self.extents / 2

    @property
    def hi(self) -> np.ndarray:
        return self.center + self.extents / 2


@dataclass
class WorldSpec:
    bounds: tuple[tuple[float, float], tuple[float, float]]  # ((xmin, ymin), (xmax, ymax))
    objects: list[WorldObject] = field(default_factory=list)
    walls: list[tuple[float, float, float, float]] = field(default_factory=list)  # x0 y0 x1 y1
    wall_height: float = 2.5
    wall_thickness: float = 0.1
    rooms: dict[str, tuple[float, float, float, float]] = field(default_factory=dict)

    def __post_init__(self):
        (x0, y0), (x1, y1) = self.bounds
        for o in self.objects:
            if np.any(o.lo[:2] < (x0, y0)) or np.any(o.hi[:2] > (x1, y1)):
                raise ValueError(f"object {o.category} at {o.center} leaves the world bounds")

    @classmethod
    def from_dict(cls, d: dict) -> "WorldSpec":
        objs = [WorldObject(o["category"], o["center"], o["extents"]) for o in d.get("objects", [])]
        b = d["bounds"]
        return cls(((b[0][0], b[0][1]), (b[1][0], b[1][1])), objs,
                   [tuple(w) for w in d.get("walls", [])], d.get("wall_height", 2.5),
                   d.get("wall_thickness", 0.1),
                   {k: tuple(v) for k, v in d.get("rooms", {}).items()})

    def to_dict(self) -> dict:
        return {
            "bounds": [list(self.bounds[0]), list(self.bounds[1])],
            "wall_height": self.wall_height,
            "wall_thickness": self.wall_thickness,
            "walls": [list(w) for w in self.walls],
            "rooms": {k: list(v) for k, v in self.rooms.items()},
            "objects": [{"category": o.category, "center": o.center.tolist(),
                         "extents": o.extents.tolist()} for o in self.objects],
        }

    def wall_boxes(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Axis-aligned boxes for wall segments (walls must be axis-aligned)."""
        out = []
        half = self.wall_thickness / 2
        for x0, y0, x1, y1 in self.walls:
            lo = np.array([min(x0, x1) - half, min(y0, y1) - half, 0.0])
            hi = np.array([max(x0, x1) + half, max(y0, y1) + half, self.wall_height])
            out.append((lo, hi))
        return out


@dataclass
class RobotTrajectory:
    poses: list[Pose]  # body poses in the world frame, yaw-only rotations
    frame_rate: float = 10.0
    noise_sigma: float = 0.0

    def __len__(self) -> int:
        return len(self.poses)


def waypoint_trajectory(waypoints, start_yaw: float = 0.0, spin_steps: int = 8,
                        step: float = 0.5) -> RobotTrajectory:
    """Spin in place at every waypoint, then drive straight to the next one."""
    poses = []
    yaw = float(start_yaw)
    pts = [np.asarray(w, dtype=np.float64) for w in waypoints]
    for k, p in enumerate(pts):
        for s in range(spin_steps):
            poses.append(Pose.from_yaw(yaw + 2 * np.pi * s / spin_steps, [p[0], p[1], 0.0]))
        if k + 1 == len(pts):
            break
        q = pts[k + 1]
        d = q - p
        dist = float(np.linalg.norm(d))
        if dist == 0:
            continue
        yaw = float(np.arctan2(d[1], d[0]))
        n = max(1, int(np.ceil(dist / step)))
        for s in range(n):
            xy = p + d * (s / n)
            poses.append(Pose.from_yaw(yaw, [xy[0], xy[1], 0.0]))
    return RobotTrajectory(poses)


def inject_pose_noise(traj: RobotTrajectory, sigma: float, seed: int) -> RobotTrajectory:
    """Seeded Gaussian noise on the planar translation of every pose."""
    if sigma < 0:
        raise ValueError("noise sigma must be non-negative")
    if sigma == 0:
        return RobotTrajectory([Pose(p.rotation, p.translation) for p in traj.poses],
                               traj.frame_rate, 0.0)
    rng = np.random.default_rng(seed)
    out = []
    for p in traj.poses:
        n = np.zeros(3)
        n[:2] = rng.normal(0.0, sigma, 2)
        out.append(Pose(p.rotation, p.translation + n))
    return RobotTrajectory(out, traj.frame_rate, sigma)


def local_frame(traj: RobotTrajectory) -> Pose:
    """World-from-local: a robot's map frame is its starting body pose."""
    return traj.poses[0]


def relative_transform(local_a: Pose, local_b: Pose) -> tuple[np.ndarray, np.ndarray]:
    """(R, t) taking robot-B map coordinates into robot-A map coordinates."""
    rel = local_a.inverse().compose(local_b)
    return rel.rotation, rel.translation


def yaw_of(R: np.ndarray) -> float:
    return float(np.arctan2(R[1, 0], R[0, 0]))


def compass_rotation(local_a: Pose, local_b: Pose) -> np.ndarray:
    """Rotation between map frames as read from a compass (yaw difference)."""
    return yaw_matrix(yaw_of(local_b.rotation) - yaw_of(local_a.rotation))


def occupancy_grid(world: WorldSpec, frame: Pose, resolution: float = 0.1,
                   margin: float = 0.5) -> OccupancyGrid:
    """Rasterize the world's walls into the map frame ``frame`` (world-from-map)."""
    (x0, y0), (x1, y1) = world.bounds
    corners = np.array([[x0, y0, 0], [x1, y0, 0], [x0, y1, 0], [x1, y1, 0]], dtype=np.float64)
    local = frame.inverse().apply(corners)
    lo = local[:, :2].min(axis=0) - margin
    hi = local[:, :2].max(axis=0) + margin
    w = int(np.ceil((hi[0] - lo[0]) / resolution))
    h = int(np.ceil((hi[1] - lo[1]) / resolution))
    grid = OccupancyGrid.empty(w, h, resolution, (float(lo[0]), float(lo[1])))
    inv = frame.inverse()
    fine = resolution / 2
    for blo, bhi in world.wall_boxes():
        xs = np.arange(blo[0], bhi[0] + 1e-9, fine)
        ys = np.arange(blo[1], bhi[1] + 1e-9, fine)
        gx, gy = np.meshgrid(xs, ys)
        pts = np.stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)], axis=1)
        lp = inv.apply(pts)
        for px, py in lp[:, :2]:
            cx, cy = grid.cell_of(px, py)
            if grid.inside(cx, cy):
                grid.cells[cy, cx] = OCCUPIED
    return grid
