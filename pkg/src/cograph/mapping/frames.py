"""Frame records and the binary frame-stream file.

Stream: magic "COFS", version u16, frame count u32, then per frame
    pose 12 x f64 | intrinsics 4 x f64 | width u32 | height u32 | n_features u16
    n_features x (index u8, 512 x f32) | depth H*W x f32 | FO blob length u32, FO blob
all little-endian.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from ..fo import FOImage
from .geometry import CameraIntrinsics, Pose

_MAGIC = b"COFS"


@dataclass
class Frame:
    pose: Pose  # parent-from-camera
    intrinsics: CameraIntrinsics
    depth: np.ndarray  # (H, W) meters, inf where nothing was hit
    fo: FOImage
    features: dict[int, np.ndarray] = field(default_factory=dict)  # object index -> 512-d


def frames_to_bytes(frames: list[Frame]) -> bytes:
    out = bytearray(_MAGIC + struct.pack("<HI", 1, len(frames)))
    for fr in frames:
        out += struct.pack("<12d", *fr.pose.as_array())
        out += struct.pack("<4d", *fr.intrinsics.as_tuple())
        out += struct.pack("<II", fr.fo.width, fr.fo.height)
        out += struct.pack("<H", len(fr.features))
        for idx in sorted(fr.features):
            out += struct.pack("<B", idx) + np.asarray(fr.features[idx], "<f4").tobytes()
        out += np.asarray(fr.depth, "<f4").tobytes()
        blob = fr.fo.to_bytes()
        out += struct.pack("<I", len(blob)) + blob
    return bytes(out)


def frames_from_bytes(data: bytes) -> list[Frame]:
    if data[:4] != _MAGIC:
        raise ValueError("not a frame stream")
    _, count = struct.unpack_from("<HI", data, 4)
    off = 10
    frames = []
    for _ in range(count):
        pose = Pose.from_array(struct.unpack_from("<12d", data, off))
        off += 96
        k = CameraIntrinsics(*struct.unpack_from("<4d", data, off))
        off += 32
        w, h = struct.unpack_from("<II", data, off)
        off += 8
        (n_feat,) = struct.unpack_from("<H", data, off)
        off += 2
        feats = {}
        for _ in range(n_feat):
            idx = data[off]
            feats[idx] = np.frombuffer(data, "<f4", 512, off + 1).astype(np.float64)
            off += 1 + 2048
        depth = np.frombuffer(data, "<f4", w * h, off).astype(np.float64).reshape(h, w)
        off += 4 * w * h
        (blob_len,) = struct.unpack_from("<I", data, off)
        off += 4
        fo = FOImage.from_bytes(data[off : off + blob_len])
        off += blob_len
        frames.append(Frame(pose, k, depth, fo, feats))
    return frames

