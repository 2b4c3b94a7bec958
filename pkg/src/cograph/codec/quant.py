"""8-bit-per-dimension quantizer for the 3-d latent (24 bits per node)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEVELS = 255


@dataclass(frozen=True)
class QuantRange:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("range bounds differ in length")
        if any(not (a < b) for a, b in zip(self.lo, self.hi)):
            raise ValueError("QuantRange needs min < max in every dimension")

    @classmethod
    def from_latents(cls, z: np.ndarray, margin: float = 0.0) -> "QuantRange":
        lo = z.min(axis=0)
        hi = z.max(axis=0)
        span = np.maximum(hi - lo, 1e-6)
        lo = lo - margin * span
        hi = lo + span * (1 + 2 * margin) if margin else lo + span
        return cls(tuple(float(v) for v in lo), tuple(float(v) for v in hi))

    @property
    def step(self) -> np.ndarray:
        return (np.asarray(self.hi) - np.asarray(self.lo)) / LEVELS


def quantize(z: np.ndarray, r: QuantRange) -> np.ndarray:
    """Affine map of each dimension onto 0..255, clamped; returns uint8."""
    lo = np.asarray(r.lo)
    hi = np.asarray(r.hi)
    t = (np.clip(np.asarray(z, dtype=np.float64), lo, hi) - lo) / (hi - lo)
    return np.floor(t * LEVELS + 0.5).astype(np.uint8)


def dequantize(q: np.ndarray, r: QuantRange) -> np.ndarray:
    lo = np.asarray(r.lo)
    return lo + np.asarray(q, dtype=np.float64) * r.step
