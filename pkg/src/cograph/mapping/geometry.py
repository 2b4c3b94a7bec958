from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..fo import FOImage


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.fx, self.fy, self.cx, self.cy)


@dataclass
class Pose:
    """Rigid transform taking points from the child frame into the parent frame."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        r = self.rotation
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-6) or abs(np.linalg.det(r) - 1) > 1e-6:
            raise ValueError("rotation must be orthonormal with det +1")

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_yaw(cls, yaw: float, translation) -> "Pose":
        return cls(yaw_matrix(yaw), translation)

    def apply(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts) @ self.rotation.T + self.translation

    def compose(self, other: "Pose") -> "Pose":
        """self * other: apply ``other`` first."""
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def as_array(self) -> np.ndarray:
        """12 reals: row-major rotation then translation."""
        return np.concatenate([self.rotation.reshape(-1), self.translation])

    @classmethod
    def from_array(cls, a) -> "Pose":
        a = np.asarray(a, dtype=np.float64)
        return cls(a[:9].reshape(3, 3), a[9:12])


def yaw_matrix(yaw: float) -> np.ndarray:
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# Optical frame (x right, y down, z forward) expressed in the body frame
# (x forward, y left, z up).
BODY_FROM_CAMERA = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])


def camera_mount(height: float, pitch_down: float = 0.0) -> Pose:
    """Body-from-camera transform for a forward camera tilted down by ``pitch_down`` rad."""
    c, s = np.cos(pitch_down), np.sin(pitch_down)
    tilt = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    return Pose(tilt @ BODY_FROM_CAMERA, np.array([0.0, 0.0, height]))


def camera_pose(body: Pose, height: float, pitch_down: float = 0.0) -> Pose:
    """Parent-from-camera pose of a camera mounted on a robot at ``body``."""
    return body.compose(camera_mount(height, pitch_down))


@dataclass
class FOPointCloud:
    key: tuple[int, int]  # (label, index)
    points: np.ndarray  # (N, 3) world frame
    feat2d: np.ndarray | None = None

    @property
    def label(self) -> int:
        return self.key[0]


def pixel_rays(width: int, height: int, k: CameraIntrinsics) -> np.ndarray:
    """(H, W, 3) camera-frame rays with unit z component."""
    u, v = np.meshgrid(np.arange(width, dtype=np.float64), np.arange(height, dtype=np.float64))
    return np.stack([(u - k.cx) / k.fx, (v - k.cy) / k.fy, np.ones_like(u)], axis=-1)


def back_project(fo: FOImage, depth: np.ndarray, pose: Pose, k: CameraIntrinsics,
                 features: dict[int, np.ndarray] | None = None) -> list[FOPointCloud]:
    """Lift every foreground pixel with valid depth into the world, grouped by object."""
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != fo.pixels.shape:
        raise DimensionMismatch(f"depth {depth.shape} vs FO image {fo.pixels.shape}")
    valid = (fo.pixels != 0) & np.isfinite(depth) & (depth > 0)
    if not valid.any():
        return []
    rows, cols = np.nonzero(valid)
    z = depth[rows, cols]
    cam = np.stack([(cols - k.cx) * z / k.fx, (rows - k.cy) * z / k.fy, z], axis=1)
    world = pose.apply(cam)
    codes = fo.pixels[rows, cols]
    order = np.argsort(codes, kind="stable")
    codes, world = codes[order], world[order]
    uniq, starts = np.unique(codes, return_index=True)
    bounds = list(starts[1:]) + [len(codes)]
    clouds = []
    for code, s, e in zip(uniq, starts, bounds):
        label, index = int(code) >> 8, int(code) & 0xFF
        feat = None if features is None else features.get(index)
        clouds.append(FOPointCloud((label, index), world[s:e], feat))
    return clouds


def grazing_pixels(fo: FOImage, depth: np.ndarray, max_step: float) -> np.ndarray:
    """Pixels whose depth jumps by more than ``max_step`` (relative) to a 4-neighbour
    carrying the same FO code; surfaces seen nearly edge-on sample too sparsely to cluster."""
    depth = np.asarray(depth, dtype=np.float64)
    px = fo.pixels
    out = np.zeros(px.shape, dtype=bool)
    with np.errstate(invalid="ignore"):
        for axis in (0, 1):
            a = [slice(None)] * 2
            b = [slice(None)] * 2
            a[axis], b[axis] = slice(1, None), slice(None, -1)
            za, zb = depth[tuple(a)], depth[tuple(b)]
            same = (px[tuple(a)] == px[tuple(b)]) & (px[tuple(a)] != 0)
            jump = same & (np.abs(za - zb) > max_step * np.minimum(za, zb))
            out[tuple(a)] |= jump
            out[tuple(b)] |= jump
    return out


def project(points: np.ndarray, pose: Pose, k: CameraIntrinsics) -> np.ndarray:
    """World points -> (u, v, depth) in the camera given by ``pose``."""
    cam = pose.inverse().apply(points)
    z = cam[:, 2]
    return np.stack([cam[:, 0] * k.fx / z + k.cx, cam[:, 1] * k.fy / z + k.cy, z], axis=1)
