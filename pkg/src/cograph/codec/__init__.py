"""512 -> 3 feature codec: MLP autoencoder, trainer, quantizer and file format."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .io import CodecNotFound, load_codec, save_codec
from .mlp import DECODER_SIZES, ENCODER_SIZES, MlpParams, decode, encode
from .quant import QuantRange, dequantize, quantize
from .train import (Diverged, TrainingConfig, TrainResult, ZeroVector, loss, roundtrip_cosine,
                    train, validate_compression)

__all__ = [
    "Codec", "CodecNotFound", "DECODER_SIZES", "Diverged", "ENCODER_SIZES", "MlpParams",
    "QuantRange", "TrainResult", "TrainingConfig", "ZeroVector", "decode", "dequantize",
    "encode", "load_codec", "loss", "quantize", "roundtrip_cosine", "save_codec", "train",
    "validate_compression",
]


@dataclass
class Codec:
    """A trained encoder/decoder pair plus its latent quantization range."""

    params: MlpParams
    qrange: QuantRange
    keep_threshold: float = 0.7

    @classmethod
    def load(cls, path, keep_threshold: float = 0.7) -> "Codec":
        params, qrange = load_codec(path)
        return cls(params, qrange, keep_threshold)

    def save(self, path) -> None:
        save_codec(path, self.params, self.qrange)

    def compress(self, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(quantized latent bytes, keep_raw flags) for one or more features."""
        f2 = np.atleast_2d(f)
        z = encode(self.params, f2)
        rec = decode(self.params, z)
        cos = np.sum(rec * f2, axis=1) / np.linalg.norm(f2, axis=1)
        q = quantize(z, self.qrange)
        keep = cos < self.keep_threshold
        if np.ndim(f) == 1:
            return q[0], keep[0]
        return q, keep

    def decompress(self, q) -> np.ndarray:
        """Quantized latent bytes -> unit 512-d feature(s)."""
        return decode(self.params, dequantize(np.asarray(q), self.qrange))
