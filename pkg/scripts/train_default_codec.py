"""Train the 512->3 feature codec on the synthetic 40-category corpus and report held-out quality."""

import argparse
import time

import numpy as np

from cograph.codec import Codec, TrainingConfig, save_codec, train
from cograph.embeddings import synthetic_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="codec.bin")
    ap.add_argument("--per-category", type=int, default=160)
    ap.add_argument("--epochs", type=int, default=500)
    ap.add_argument("--batch", type=int, default=256)
    ap.add_argument("--lr", type=float, default=1e-4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    corpus = synthetic_corpus(per_category=args.per_category, seed=args.seed)
    cfg = TrainingConfig(epochs=args.epochs, batch_size=args.batch, lr=args.lr, seed=args.seed)
    start = time.perf_counter()
    res = train(corpus, cfg)
    print(f"trained {cfg.epochs} epochs on {len(corpus)} vectors in "
          f"{time.perf_counter() - start:.0f}s, final loss {res.train_loss[-1]:.5f}")
    save_codec(args.out, res.params, res.qrange)

    held = corpus.features[res.val_indices]
    codec = Codec(res.params, res.qrange)
    cos = np.sum(codec.decompress(codec.compress(held)[0]) * held, axis=1)
    print(f"held-out cosine through 24-bit codes: mean {cos.mean():.4f}, "
          f"min {cos.min():.4f}, {100 * np.mean(cos >= 0.95):.1f}% >= 0.95")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
