"""Encoder/decoder MLPs with hand-written forward and backward passes.

Encoder: Linear -> BatchNorm -> ReLU for every hidden width, then a linear
projection onto the latent. Decoder: Linear -> ReLU for every hidden width,
then a linear output layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ENCODER_SIZES = (512, 256, 256, 128, 64, 32, 16, 3)
DECODER_SIZES = (3, 8, 16, 32, 64, 128, 256, 256, 512)
BN_EPS = 1e-5
BN_MOMENTUM = 0.1


@dataclass
class MlpParams:
    encoder_sizes: tuple[int, ...]
    decoder_sizes: tuple[int, ...]
    enc_w: list[np.ndarray]
    enc_b: list[np.ndarray]
    # normalization (scale, shift, running mean, running var) for every
    # encoder layer except the latent projection
    bn_gamma: list[np.ndarray]
    bn_beta: list[np.ndarray]
    bn_mean: list[np.ndarray]
    bn_var: list[np.ndarray]
    dec_w: list[np.ndarray]
    dec_b: list[np.ndarray]
    latent_activation: bool = False

    @classmethod
    def init(cls, encoder_sizes=ENCODER_SIZES, decoder_sizes=DECODER_SIZES,
             seed: int = 0, latent_activation: bool = False,
             dtype=np.float64) -> "MlpParams":
        if encoder_sizes[-1] != decoder_sizes[0] or encoder_sizes[0] != decoder_sizes[-1]:
            raise ValueError("encoder/decoder sizes do not chain")
        rng = np.random.default_rng(seed)

        def linear(n_in, n_out):
            bound = 1.0 / np.sqrt(n_in)
            w = rng.uniform(-bound, bound, (n_in, n_out)).astype(dtype)
            b = rng.uniform(-bound, bound, n_out).astype(dtype)
            return w, b

        enc = [linear(a, b) for a, b in zip(encoder_sizes[:-1], encoder_sizes[1:])]
        dec = [linear(a, b) for a, b in zip(decoder_sizes[:-1], decoder_sizes[1:])]
        n_bn = len(enc) if latent_activation else len(enc) - 1
        widths = encoder_sizes[1 : 1 + n_bn]
        return cls(
            tuple(encoder_sizes), tuple(decoder_sizes),
            [w for w, _ in enc], [b for _, b in enc],
            [np.ones(n, dtype) for n in widths], [np.zeros(n, dtype) for n in widths],
            [np.zeros(n, dtype) for n in widths], [np.ones(n, dtype) for n in widths],
            [w for w, _ in dec], [b for _, b in dec],
            latent_activation,
        )

    # Trainable tensors in a fixed order; the optimizer and the gradient
    # check both rely on it.
    def trainable(self) -> list[np.ndarray]:
        return [*self.enc_w, *self.enc_b, *self.bn_gamma, *self.bn_beta,
                *self.dec_w, *self.dec_b]

    def buffers(self) -> list[np.ndarray]:
        return [*self.bn_mean, *self.bn_var]

    def copy(self) -> "MlpParams":
        c = lambda xs: [x.copy() for x in xs]  # noqa: E731
        return MlpParams(self.encoder_sizes, self.decoder_sizes, c(self.enc_w), c(self.enc_b),
                         c(self.bn_gamma), c(self.bn_beta), c(self.bn_mean), c(self.bn_var),
                         c(self.dec_w), c(self.dec_b), self.latent_activation)

    def astype(self, dtype) -> "MlpParams":
        c = lambda xs: [x.astype(dtype) for x in xs]  # noqa: E731
        return MlpParams(self.encoder_sizes, self.decoder_sizes, c(self.enc_w), c(self.enc_b),
                         c(self.bn_gamma), c(self.bn_beta), c(self.bn_mean), c(self.bn_var),
                         c(self.dec_w), c(self.dec_b), self.latent_activation)

    def n_parameters(self) -> int:
        return sum(x.size for x in self.trainable()) + sum(x.size for x in self.buffers())

    def check(self) -> None:
        for arrays in (self.trainable(), self.buffers()):
            for a in arrays:
                if not np.all(np.isfinite(a)):
                    raise ValueError("non-finite codec parameter")
        for w, (a, b) in zip(self.enc_w, zip(self.encoder_sizes[:-1], self.encoder_sizes[1:])):
            if w.shape != (a, b):
                raise ValueError(f"encoder weight shape {w.shape} != {(a, b)}")
        for w, (a, b) in zip(self.dec_w, zip(self.decoder_sizes[:-1], self.decoder_sizes[1:])):
            if w.shape != (a, b):
                raise ValueError(f"decoder weight shape {w.shape} != {(a, b)}")


@dataclass
class _Cache:
    x: np.ndarray
    enc: list = field(default_factory=list)
    dec: list = field(default_factory=list)
    batch_stats: list = field(default_factory=list)


def _bn_layer(p: MlpParams, i: int) -> bool:
    return i < len(p.bn_gamma)


def encode_forward(p: MlpParams, x: np.ndarray, train: bool, cache: _Cache | None = None):
    h = x
    for i, (w, b) in enumerate(zip(p.enc_w, p.enc_b)):
        z = h @ w + b
        if not _bn_layer(p, i):
            if cache is not None:
                cache.enc.append((h, None))
            h = z
            continue
        if train:
            mu = z.mean(axis=0)
            var = z.var(axis=0)
        else:
            mu, var = p.bn_mean[i], p.bn_var[i]
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (z - mu) * inv_std
        y = p.bn_gamma[i] * xhat + p.bn_beta[i]
        out = np.maximum(y, 0.0)
        if cache is not None:
            cache.enc.append((h, (xhat, inv_std, y)))
            cache.batch_stats.append((mu, var, z.shape[0]))
        h = out
    return h


def decode_forward(p: MlpParams, z: np.ndarray, cache: _Cache | None = None):
    h = z
    last = len(p.dec_w) - 1
    for j, (w, b) in enumerate(zip(p.dec_w, p.dec_b)):
        pre = h @ w + b
        if cache is not None:
            cache.dec.append((h, pre))
        h = pre if j == last else np.maximum(pre, 0.0)
    return h


def forward(p: MlpParams, x: np.ndarray, train: bool = False):
    """Full autoencoder pass. Returns (reconstruction, latent, cache)."""
    cache = _Cache(x)
    z = encode_forward(p, x, train, cache)
    y = decode_forward(p, z, cache)
    return y, z, cache


def backward(p: MlpParams, cache: _Cache, grad_y: np.ndarray) -> list[np.ndarray]:
    """Gradients for ``p.trainable()`` given dLoss/dReconstruction."""
    n_enc, n_dec, n_bn = len(p.enc_w), len(p.dec_w), len(p.bn_gamma)
    g_enc_w = [None] * n_enc
    g_enc_b = [None] * n_enc
    g_gamma = [None] * n_bn
    g_beta = [None] * n_bn
    g_dec_w = [None] * n_dec
    g_dec_b = [None] * n_dec

    g = grad_y
    for j in range(n_dec - 1, -1, -1):
        h_in, pre = cache.dec[j]
        if j != n_dec - 1:
            g = g * (pre > 0)
        g_dec_w[j] = h_in.T @ g
        g_dec_b[j] = g.sum(axis=0)
        g = g @ p.dec_w[j].T

    for i in range(n_enc - 1, -1, -1):
        h_in, bn = cache.enc[i]
        if bn is not None:
            xhat, inv_std, y = bn
            g = g * (y > 0)
            g_gamma[i] = (g * xhat).sum(axis=0)
            g_beta[i] = g.sum(axis=0)
            gx = g * p.bn_gamma[i]
            n = gx.shape[0]
            g = (inv_std / n) * (n * gx - gx.sum(axis=0) - xhat * (gx * xhat).sum(axis=0))
        g_enc_w[i] = h_in.T @ g
        g_enc_b[i] = g.sum(axis=0)
        g = g @ p.enc_w[i].T

    return [*g_enc_w, *g_enc_b, *g_gamma, *g_beta, *g_dec_w, *g_dec_b]


def update_running_stats(p: MlpParams, cache: _Cache, momentum: float = BN_MOMENTUM) -> None:
    for i, (mu, var, n) in enumerate(cache.batch_stats):
        unbiased = var * n / max(n - 1, 1)
        p.bn_mean[i] *= 1.0 - momentum
        p.bn_mean[i] += momentum * mu
        p.bn_var[i] *= 1.0 - momentum
        p.bn_var[i] += momentum * unbiased


def encode(p: MlpParams, f: np.ndarray) -> np.ndarray:
    """Inference-mode encoder: (..., 512) -> (..., 3)."""
    f = np.asarray(f, dtype=p.enc_w[0].dtype)
    single = f.ndim == 1
    z = encode_forward(p, np.atleast_2d(f), train=False)
    return z[0] if single else z


def decode(p: MlpParams, z: np.ndarray, normalize: bool = True) -> np.ndarray:
    """Decoder: (..., 3) -> (..., 512), unit-normalized by default."""
    z = np.asarray(z, dtype=p.dec_w[0].dtype)
    single = z.ndim == 1
    y = decode_forward(p, np.atleast_2d(z))
    if normalize:
        y = y / np.maximum(np.linalg.norm(y, axis=1, keepdims=True), 1e-12)
    return y[0] if single else y
