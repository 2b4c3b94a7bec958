"""Feature-object (FO) images: 24-bit pixels packing a 16-bit feature label
(high bits) and an 8-bit per-frame object index (low bits). Code 0 is
background."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

BACKGROUND = 0
_HEADER = struct.Struct("<II")


class DuplicateIndex(ValueError):
    pass


def encode_fo_pixel(label, index):
    """Works elementwise on ints or integer arrays."""
    if isinstance(label, np.ndarray) or isinstance(index, np.ndarray):
        label = np.asarray(label, dtype=np.uint32) & 0xFFFF
        return (label << 8) | (np.asarray(index, dtype=np.uint32) & 0xFF)
    return ((int(label) & 0xFFFF) << 8) | (int(index) & 0xFF)


def decode_fo_pixel(code):
    """Inverse of :func:`encode_fo_pixel`; returns None for the background code."""
    if isinstance(code, np.ndarray):
        return code >> 8, code & 0xFF
    code = int(code)
    if code == BACKGROUND:
        return None
    return code >> 8, code & 0xFF


@dataclass
class SegmentedObject:
    index: int
    mask: np.ndarray  # (H, W) bool
    label: int
    feat2d: np.ndarray | None = None


@dataclass
class FOImage:
    pixels: np.ndarray  # (H, W) uint32, 24 significant bits

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def labels(self) -> np.ndarray:
        return self.pixels >> 8

    def indices(self) -> np.ndarray:
        return self.pixels & 0xFF

    def keys(self) -> list[tuple[int, int]]:
        """(label, index) pairs present in the image, sorted."""
        codes = np.unique(self.pixels)
        return [decode_fo_pixel(int(c)) for c in codes if c != BACKGROUND]

    def to_bytes(self) -> bytes:
        """8-byte width/height header then 3 little-endian bytes per pixel."""
        flat = self.pixels.astype("<u4").reshape(-1)
        rgb = flat.view(np.uint8).reshape(-1, 4)[:, :3]
        return _HEADER.pack(self.width, self.height) + rgb.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "FOImage":
        if len(data) < _HEADER.size:
            raise ValueError("FO blob shorter than its header")
        w, h = _HEADER.unpack_from(data, 0)
        body = np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size)
        if body.size != 3 * w * h:
            raise ValueError(f"FO blob body has {body.size} bytes, expected {3 * w * h}")
        b = body.reshape(-1, 3).astype(np.uint32)
        pixels = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        return cls(pixels.reshape(h, w))


def build_fo_image(objects: list[SegmentedObject], width: int, height: int) -> FOImage:
    """Rasterize object masks; where masks overlap the larger index is on top."""
    seen = set()
    for obj in objects:
        if obj.index in seen:
            raise DuplicateIndex(f"object index {obj.index} used twice in one frame")
        seen.add(obj.index)
        if obj.mask.shape != (height, width):
            raise ValueError(f"mask shape {obj.mask.shape} != frame {(height, width)}")
    pixels = np.zeros((height, width), dtype=np.uint32)
    for obj in sorted(objects, key=lambda o: o.index):
        pixels[obj.mask] = encode_fo_pixel(obj.label, obj.index)
    return FOImage(pixels)
