"""Codec parameter file.

    magic "COGC" | version:u16 | flags:u16 | n_enc:u16 | n_dec:u16
    encoder sizes (n_enc x u16) | decoder sizes (n_dec x u16)
    float32 LE arrays: enc W, enc b, bn scale, bn shift, dec W, dec b,
                       bn running mean, bn running var   (layer order, row-major)
    QuantRange: lo[3], hi[3] as float64 LE
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .mlp import MlpParams
from .quant import QuantRange

MAGIC = b"COGC"
VERSION = 1
_HEAD = struct.Struct("<4sHHHH")


class CodecNotFound(FileNotFoundError):
    pass


class CodecFormatError(ValueError):
    pass


def codec_to_bytes(params: MlpParams, qrange: QuantRange) -> bytes:
    enc, dec = params.encoder_sizes, params.decoder_sizes
    out = bytearray(_HEAD.pack(MAGIC, VERSION, int(params.latent_activation), len(enc), len(dec)))
    out += struct.pack(f"<{len(enc)}H", *enc)
    out += struct.pack(f"<{len(dec)}H", *dec)
    for arr in (*params.trainable(), *params.buffers()):
        out += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    out += struct.pack("<6d", *qrange.lo, *qrange.hi)
    return bytes(out)


def codec_from_bytes(data: bytes) -> tuple[MlpParams, QuantRange]:
    if len(data) < _HEAD.size:
        raise CodecFormatError("codec file too short")
    magic, version, flags, n_enc, n_dec = _HEAD.unpack_from(data, 0)
    if magic != MAGIC:
        raise CodecFormatError("not a codec file")
    if version != VERSION:
        raise CodecFormatError(f"unsupported codec version {version}")
    off = _HEAD.size
    enc = struct.unpack_from(f"<{n_enc}H", data, off)
    off += 2 * n_enc
    dec = struct.unpack_from(f"<{n_dec}H", data, off)
    off += 2 * n_dec
    template = MlpParams.init(enc, dec, latent_activation=bool(flags & 1))
    arrays = []
    for ref in (*template.trainable(), *template.buffers()):
        nbytes = ref.size * 4
        if off + nbytes > len(data):
            raise CodecFormatError("codec file truncated")
        arrays.append(np.frombuffer(data, "<f4", ref.size, off).astype(np.float64).reshape(ref.shape))
        off += nbytes
    if off + 48 != len(data):
        raise CodecFormatError("codec file has a malformed trailer")
    vals = struct.unpack_from("<6d", data, off)
    ne, nb = len(template.enc_w), len(template.bn_gamma)
    nd = len(template.dec_w)
    it = iter(arrays)
    take = lambda k: [next(it) for _ in range(k)]  # noqa: E731
    enc_w, enc_b, gamma, beta = take(ne), take(ne), take(nb), take(nb)
    dec_w, dec_b = take(nd), take(nd)
    mean, var = take(nb), take(nb)
    params = MlpParams(tuple(enc), tuple(dec), enc_w, enc_b, gamma, beta, mean, var,
                       dec_w, dec_b, bool(flags & 1))
    params.check()
    return params, QuantRange(tuple(vals[:3]), tuple(vals[3:]))


def save_codec(path, params: MlpParams, qrange: QuantRange) -> None:
    Path(path).write_bytes(codec_to_bytes(params, qrange))


def load_codec(path) -> tuple[MlpParams, QuantRange]:
    p = Path(path)
    if not p.is_file():
        raise CodecNotFound(f"codec file not found: {p}")
    return codec_from_bytes(p.read_bytes())
