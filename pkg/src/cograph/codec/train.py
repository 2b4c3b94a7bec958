"""Reconstruction loss, Adam training loop and pre-compression validation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..embeddings import FeatureCorpus
from .mlp import (DECODER_SIZES, ENCODER_SIZES, MlpParams, backward, decode,
                  encode, forward, update_running_stats)
from .quant import QuantRange

log = logging.getLogger(__name__)


class ZeroVector(ValueError):
    pass


class Diverged(RuntimeError):
    pass


def loss(raw: np.ndarray, rec: np.ndarray) -> float | np.ndarray:
    """Squared L2 distance plus cosine distance (1 - cos) per row."""
    raw = np.asarray(raw, dtype=np.float64)
    rec = np.asarray(rec, dtype=np.float64)
    nr = np.linalg.norm(raw, axis=-1)
    nc = np.linalg.norm(rec, axis=-1)
    if np.any(nr == 0) or np.any(nc == 0):
        raise ZeroVector("loss undefined for a zero-norm vector")
    l2 = np.sum((raw - rec) ** 2, axis=-1)
    cos = np.sum(raw * rec, axis=-1) / (nr * nc)
    return l2 + (1.0 - cos)


def batch_loss_and_grad(raw: np.ndarray, rec: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean loss over the batch and its gradient w.r.t. ``rec``."""
    n = raw.shape[0]
    nr = np.linalg.norm(raw, axis=1, keepdims=True)
    nc = np.linalg.norm(rec, axis=1, keepdims=True)
    dot = np.sum(raw * rec, axis=1, keepdims=True)
    cos = dot / (nr * nc)
    diff = rec - raw
    value = float(np.mean(np.sum(diff**2, axis=1) + 1.0 - cos[:, 0]))
    dcos = raw / (nr * nc) - cos * rec / nc**2
    grad = (2.0 * diff - dcos) / n
    return value, grad


@dataclass
class TrainingConfig:
    epochs: int = 500
    batch_size: int = 256
    lr: float = 1e-4
    seed: int = 0
    val_split: float = 0.1
    encoder_sizes: tuple[int, ...] = ENCODER_SIZES
    decoder_sizes: tuple[int, ...] = DECODER_SIZES
    latent_activation: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0 or self.lr <= 0:
            raise ValueError("epochs, batch_size and lr must be positive")
        if not 0.0 <= self.val_split < 1.0:
            raise ValueError("val_split must be in [0, 1)")


@dataclass
class TrainResult:
    params: MlpParams
    qrange: QuantRange
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_indices: np.ndarray | None = None


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def split_indices(n: int, val_split: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    n_val = int(round(n * val_split))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def evaluate(params: MlpParams, x: np.ndarray) -> float:
    if len(x) == 0:
        return float("nan")
    rec, _, _ = forward(params, x, train=False)
    return float(np.mean(loss(x, rec)))


def train(corpus: FeatureCorpus | np.ndarray, cfg: TrainingConfig,
          progress=None) -> TrainResult:
    """Mini-batch Adam on the reconstruction loss. Deterministic given cfg.seed."""
    x_all = corpus.features if isinstance(corpus, FeatureCorpus) else np.asarray(corpus)
    x_all = np.asarray(x_all, dtype=np.float64)
    train_idx, val_idx = split_indices(len(x_all), cfg.val_split, cfg.seed)
    x_train, x_val = x_all[train_idx], x_all[val_idx]
    if len(x_train) < 2:
        raise ValueError("need at least two training vectors")

    params = MlpParams.init(cfg.encoder_sizes, cfg.decoder_sizes, seed=cfg.seed,
                            latent_activation=cfg.latent_activation)
    opt = Adam(params.trainable(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
    rng = np.random.default_rng(cfg.seed + 1)
    result = TrainResult(params, None, val_indices=val_idx)
    bs = min(cfg.batch_size, len(x_train))

    for epoch in range(cfg.epochs):
        perm = rng.permutation(len(x_train))
        total, count = 0.0, 0
        for start in range(0, len(perm), bs):
            idx = perm[start : start + bs]
            if len(idx) < 2:  # batch statistics need two samples
                continue
            xb = x_train[idx]
            rec, _, cache = forward(params, xb, train=True)
            value, grad = batch_loss_and_grad(xb, rec)
            if not np.isfinite(value):
                raise Diverged(f"non-finite loss at epoch {epoch}")
            grads = backward(params, cache, grad)
            opt.step(grads)
            update_running_stats(params, cache)
            total += value * len(idx)
            count += len(idx)
        result.train_loss.append(total / count)
        result.val_loss.append(evaluate(params, x_val))
        if progress is not None:
            progress(epoch, result.train_loss[-1], result.val_loss[-1])

    params.check()
    result.qrange = QuantRange.from_latents(encode(params, x_all))
    return result


def roundtrip_cosine(params: MlpParams, f: np.ndarray) -> np.ndarray:
    f = np.atleast_2d(f)
    rec = decode(params, encode(params, f))
    return np.sum(rec * f, axis=1) / np.linalg.norm(f, axis=1)


def validate_compression(f: np.ndarray, params: MlpParams, keep_threshold: float = 0.7):
    """True where the round-trip cosine falls below ``keep_threshold`` (send raw)."""
    cos = roundtrip_cosine(params, f)
    flags = cos < keep_threshold
    return bool(flags[0]) if np.ndim(f) == 1 else flags
