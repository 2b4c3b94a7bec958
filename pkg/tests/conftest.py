import numpy as np
import pytest

from cograph.codec import Codec, TrainingConfig, train
from cograph.core import COGraph, NodeRecord
from cograph.embeddings import synthetic_corpus


@pytest.fixture(scope="session")
def quick_codec():
    """A small codec that round-trips the household categories well (about 10 s)."""
    corpus = synthetic_corpus(per_category=16, seed=0)
    res = train(corpus, TrainingConfig(epochs=100, batch_size=64, lr=1e-3, seed=0))
    return Codec(res.params, res.qrange)


@pytest.fixture(scope="session")
def quick_codec_file(quick_codec, tmp_path_factory):
    path = tmp_path_factory.mktemp("codec") / "quick.bin"
    quick_codec.save(path)
    return path


def make_node(robot=0, pos=(0.0, 0.0, 0.0), label=1, bbox=(1, 1, 1), feat512=None,
              feat3=(0, 0, 0), keep_raw=False):
    return NodeRecord(robot, 0, np.asarray(pos, dtype=np.float64), label, bbox, feat512,
                      feat3, keep_raw)


def graph_with(robot, positions, features=None, labels=None):
    g = COGraph(robot)
    for k, p in enumerate(positions):
        f = None if features is None else features[k]
        lab = 1 if labels is None else labels[k]
        g.add_node(make_node(robot, p, lab, feat512=f))
    return g
