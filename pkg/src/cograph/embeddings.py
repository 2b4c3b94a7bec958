"""Deterministic synthetic stand-ins for open-vocabulary text/image embeddings.

Every category name maps to a unit vector in R^512 derived from a hash of the
name and a table seed, so arbitrary query strings get a stable embedding.
Couplings pull selected pairs to a target cosine (e.g. sofa/cushion).
"""

from __future__ import annotations

import hashlib
import zlib
from dataclasses import dataclass, field

import numpy as np

FEATURE_DIM = 512

# Household vocabulary used for the default training corpus and worlds.
HOUSEHOLD_CATEGORIES = (
    "chair", "sofa", "cushion", "table", "bed", "lamp", "tv", "plant",
    "bookshelf", "cabinet", "desk", "pillow", "refrigerator", "sink", "oven",
    "microwave", "toilet", "bathtub", "mirror", "clock", "vase", "rug",
    "stool", "bench", "wardrobe", "dresser", "nightstand", "shelf", "printer",
    "monitor", "keyboard", "laptop", "painting", "curtain", "trash can",
    "fan", "heater", "basket", "box", "door",
)


def feature_label(name: str) -> int:
    """16-bit feature label for a category; never 0 (reserved for background)."""
    return zlib.crc32(name.encode("utf-8")) % 0xFFFF + 1


def _name_seed(name: str, seed: int) -> int:
    digest = hashlib.sha256(f"{seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise ValueError("cannot normalize a zero vector")
    return v / n


def perturb(base: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Add isotropic noise of expected norm ``sigma`` and re-normalize.

    ``sigma`` is relative to the unit base vector, i.e. per-dimension std is
    sigma / sqrt(dim).
    """
    base = np.atleast_2d(base)
    noise = rng.standard_normal(base.shape) * (sigma / np.sqrt(base.shape[-1]))
    return unit(base + noise)


@dataclass
class EmbeddingTable:
    """category -> unit Feature512, generated lazily and cached."""

    seed: int = 0
    couplings: dict[tuple[str, str], float] = field(default_factory=dict)
    dim: int = FEATURE_DIM
    _cache: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def _raw(self, name: str) -> np.ndarray:
        rng = np.random.default_rng(_name_seed(name, self.seed))
        return unit(rng.standard_normal(self.dim))

    def __call__(self, name: str) -> np.ndarray:
        return self.embed(name)

    def embed(self, name: str) -> np.ndarray:
        if name in self._cache:
            return self._cache[name]
        v = self._raw(name)
        # A coupled (anchor, name) pair bends ``name`` toward its anchor.
        for (anchor, other), target in sorted(self.couplings.items()):
            if other == name and anchor != name:
                a = self.embed(anchor)
                perp = unit(v - (v @ a) * a)
                v = target * a + np.sqrt(max(0.0, 1.0 - target**2)) * perp
        self._cache[name] = v
        return v

    def matrix(self, names) -> np.ndarray:
        return np.stack([self.embed(n) for n in names])


@dataclass
class FeatureCorpus:
    features: np.ndarray  # (n, 512), unit rows
    tags: list[str]

    def __len__(self) -> int:
        return len(self.tags)


def synthetic_corpus(
    n_categories: int = 40,
    per_category: int = 160,
    sigma: float = 0.05,
    seed: int = 0,
    table: EmbeddingTable | None = None,
    categories=None,
) -> FeatureCorpus:
    table = table or EmbeddingTable(seed=seed)
    if categories is None:
        categories = list(HOUSEHOLD_CATEGORIES)
        rng_extra = 0
        while len(categories) < n_categories:
            categories.append(f"object_{rng_extra}")
            rng_extra += 1
        categories = categories[:n_categories]
    rng = np.random.default_rng(seed)
    feats, tags = [], []
    for name in categories:
        base = table.embed(name)
        feats.append(perturb(np.repeat(base[None], per_category, 0), sigma, rng))
        tags.extend([name] * per_category)
    return FeatureCorpus(np.concatenate(feats), tags)
