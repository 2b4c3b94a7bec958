"""Acceptance criteria, each checked at its stated tolerance and time budget.

Every test prints one line: ``[PASS] criterion N ...`` or ``[FAIL] criterion N ...``.
"""

import json
import time
from dataclasses import replace

import numpy as np
import pytest

from cograph.cli import main as cli_main
from cograph.codec import Codec, TrainingConfig, train
from cograph.codec.mlp import MlpParams, backward, forward
from cograph.codec.train import batch_loss_and_grad
from cograph.core import COGraph, NodeRecord
from cograph.embeddings import (EmbeddingTable, HOUSEHOLD_CATEGORIES, feature_label, perturb,
                                synthetic_corpus)
from cograph.fo import decode_fo_pixel, encode_fo_pixel
from cograph.merging import (estimate_translation, local_features, place_recognition,
                             t_error)
from cograph.metrics import GroundTruthObject, recall_at_k
from cograph.sim.scenario import ScenarioConfig, run_scenario
from cograph.wire import HEADER, NODE_PREFIX, deserialize_delta, serialize_delta

pytestmark = pytest.mark.acceptance


def report(capsys, n, name, ok, detail, elapsed, limit):
    in_time = elapsed < limit
    line = (f"[{'PASS' if ok and in_time else 'FAIL'}] criterion {n} {name}: {detail} "
            f"({elapsed:.1f}s, limit {limit}s)")
    with capsys.disabled():
        print("\n" + line)
    assert ok, line
    assert in_time, line


@pytest.fixture(scope="module")
def trained():
    """The acceptance codec: 40 categories, epochs=500, batch=256, lr=1e-4, seed 0."""
    corpus = synthetic_corpus(n_categories=40, per_category=160, seed=0)
    start = time.perf_counter()
    res = train(corpus, TrainingConfig(epochs=500, batch_size=256, lr=1e-4, seed=0))
    elapsed = time.perf_counter() - start
    return corpus, res, Codec(res.params, res.qrange), elapsed


# 1 -------------------------------------------------------------------------

def test_wire_size_law(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    widths_ok = (NODE_PREFIX.size + 3) * 8 == 8 + 8 + 96 + 16 + 24 + 24 == 176 and HEADER.size == 5
    bad = []
    for case in range(1000):
        g = COGraph(int(rng.integers(0, 256)))
        n = int(rng.integers(0, 60))
        for _ in range(n):
            g.add_node(NodeRecord(g.robot, 0, rng.normal(0, 50, 3), int(rng.integers(0, 65536)),
                                  tuple(rng.integers(0, 256, 3)), None,
                                  tuple(rng.integers(0, 256, 3))))
        if n > 1:
            for a, b in rng.integers(0, n, size=(int(rng.integers(0, 80)), 2)):
                if a != b:
                    g.add_edge(int(a), int(b))
        e = len(g.edges)
        data = serialize_delta(g)
        msg = deserialize_delta(data)
        node_bits = (len(data) - 5 - 3 * e) * 8 // max(n, 1)
        if len(data) != 5 + 22 * n + 3 * e or (n and node_bits != 176):
            bad.append(case)
        elif [m.wire_key() for m in msg.nodes] != [m.wire_key() for m in g.nodes.values()]:
            bad.append(case)
    elapsed = time.perf_counter() - start
    report(capsys, 1, "wire-size law", widths_ok and not bad,
           f"1000 random graphs, {len(bad)} violations of 5+22n+3e / 176 bits per node",
           elapsed, 5)


# 3 -------------------------------------------------------------------------

def test_codec_quality(capsys, trained):
    corpus, res, codec, elapsed = trained
    held = corpus.features[res.val_indices]
    rec = codec.decompress(codec.compress(held)[0])
    cos = np.sum(rec * held, axis=1)
    ok = cos.mean() >= 0.95 and np.mean(cos >= 0.95) >= 0.9
    report(capsys, 3, "codec quality", ok,
           f"{len(held)} held-out vectors through the 24-bit path, mean cosine {cos.mean():.4f}, "
           f"{100 * np.mean(cos >= 0.95):.1f}% >= 0.95 (min {cos.min():.4f}); "
           f"final train loss {res.train_loss[-1]:.5f}",
           elapsed, 600)


# 2 -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def apartment_runs(trained):
    codec = trained[2]
    cfg = ScenarioConfig.load("two_robot_apartment.json")
    out, times = {}, {}
    for mode in ("compressed", "raw-512"):
        start = time.perf_counter()
        out[mode] = run_scenario(replace(cfg, transmit_mode=mode), codec)
        times[mode] = time.perf_counter() - start
    return out, times


def test_communication_reduction(capsys, apartment_runs):
    runs, times = apartment_runs
    small, big = runs["compressed"].stats.total, runs["raw-512"].stats.total
    reduction = 1 - small / big
    report(capsys, 2, "communication reduction", 0.94 <= reduction <= 0.97,
           f"{big} B raw-512 -> {small} B compressed, reduction {100 * reduction:.2f}% "
           f"(target 94-97%)", sum(times.values()), 120)


# 4 -------------------------------------------------------------------------

def _loss(p, x):
    rec, _, _ = forward(p, x, train=True)
    return batch_loss_and_grad(x, rec)[0]


def test_gradient_correctness(capsys):
    start = time.perf_counter()
    worst = 0.0
    h = 1e-6
    for draw in range(100):
        rng = np.random.default_rng(1000 + draw)
        p = MlpParams.init((4, 3, 2), (2, 3, 4), seed=draw)
        for t in p.trainable():
            t[...] = rng.normal(size=t.shape)
        x = rng.normal(size=(8, 4))
        rec, _, cache = forward(p, x, train=True)
        _, g = batch_loss_and_grad(x, rec)
        analytic = np.concatenate([a.ravel() for a in backward(p, cache, g)])
        numeric = []
        for t in p.trainable():
            flat = t.reshape(-1)
            for i in range(flat.size):
                old = flat[i]
                flat[i] = old + h
                up = _loss(p, x)
                flat[i] = old - h
                down = _loss(p, x)
                flat[i] = old
                numeric.append((up - down) / (2 * h))
        numeric = np.array(numeric)
        rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic),
                                                       np.linalg.norm(numeric))
        worst = max(worst, rel)
    elapsed = time.perf_counter() - start
    report(capsys, 4, "gradient correctness", worst <= 1e-4,
           f"100 draws on the [4,3,2]/[2,3,4] net, worst relative error {worst:.2e}",
           elapsed, 10)


# 5 -------------------------------------------------------------------------

def _brute_force_max(pairs, local, remote, R, d):
    best = 0
    for p in pairs:
        t = local.nodes[p.local].pos - R @ remote.nodes[p.remote].pos
        count = 0
        for q in pairs:
            diff = local.nodes[q.local].pos - (R @ remote.nodes[q.remote].pos + t)
            if np.sqrt(np.sum(diff * diff)) <= d:
                count += 1
        best = max(best, count)
    return best


def _instance(seed, noise):
    """Local graph of up to 12 nodes; the remote sees a shifted, rotated subset
    plus unrelated extras. Categories repeat, so lookalikes exist."""
    rng = np.random.default_rng(seed)
    table = EmbeddingTable(seed=0)
    names = HOUSEHOLD_CATEGORIES[:6]
    n_l = int(rng.integers(4, 13))
    cats = [names[i] for i in rng.integers(0, 6, n_l)]
    pos = rng.uniform(-5, 5, (n_l, 3))
    local = COGraph(0)
    for c, p in zip(cats, pos):
        local.add_node(NodeRecord(0, 0, p, feature_label(c), (1, 1, 1), table.embed(c)))
    yaw = rng.uniform(-np.pi, np.pi)
    c_, s_ = np.cos(yaw), np.sin(yaw)
    R = np.array([[c_, -s_, 0], [s_, c_, 0], [0, 0, 1.0]])
    t_true = rng.uniform(-4, 4, 3)
    shared = rng.choice(n_l, size=int(rng.integers(3, n_l + 1)), replace=False)
    remote = COGraph(1)
    for i in shared:
        rp = R.T @ (pos[i] - t_true) + rng.normal(0, noise, 3)
        remote.add_node(NodeRecord(1, 0, rp, feature_label(cats[i]), (1, 1, 1),
                                   table.embed(cats[i])))
    for _ in range(int(rng.integers(0, 13 - len(shared)))):
        c = names[int(rng.integers(0, 6))]
        remote.add_node(NodeRecord(1, 0, rng.uniform(-9, 9, 3), feature_label(c), (1, 1, 1),
                                   table.embed(c)))
    return local, remote, R, t_true


def test_translation_oracle(capsys):
    start = time.perf_counter()
    mismatch, exact_err, noisy_ok = 0, 0.0, 0
    for seed in range(100):
        local, remote, R, t_true = _instance(seed, 0.0)
        pairs = place_recognition(local, remote, remote_f=local_features(remote), min_pairs=1)
        best = estimate_translation(pairs, local, remote, R)
        if best.score != _brute_force_max(pairs, local, remote, R, 0.5):
            mismatch += 1
        exact_err = max(exact_err, t_error(best.t, t_true))
        local, remote, R, t_true = _instance(10_000 + seed, 0.05)
        pairs = place_recognition(local, remote, remote_f=local_features(remote), min_pairs=1)
        noisy_ok += t_error(estimate_translation(pairs, local, remote, R).t, t_true) <= 0.1
    elapsed = time.perf_counter() - start
    ok = mismatch == 0 and exact_err <= 1e-6 and noisy_ok >= 95
    report(capsys, 5, "translation oracle", ok,
           f"score == brute force in {100 - mismatch}/100, noiseless max error {exact_err:.1e} m, "
           f"sigma=0.05 within 0.1 m in {noisy_ok}/100", elapsed, 60)


# 6 -------------------------------------------------------------------------

def test_dimension_invariant_merging(capsys, apartment_runs):
    runs, times = apartment_runs
    a = runs["compressed"].final_fused_pairs()
    b = runs["raw-512"].final_fused_pairs()
    per_event = all(x.fused == y.fused for x, y in zip(runs["compressed"].events,
                                                       runs["raw-512"].events))
    same_events = len(runs["compressed"].events) == len(runs["raw-512"].events)
    n = sum(len(v) for v in a.values())
    ta, tb = runs["compressed"].metrics.t_error, runs["raw-512"].metrics.t_error
    report(capsys, 6, "dimension-invariant merging", a == b and per_event and same_events and n > 0,
           f"{n} fused pairs in final merges, identical across modes: {a == b}, "
           f"every merge event identical: {per_event}; t_error {ta:.3f} vs {tb:.3f} m",
           sum(times.values()), 120)


# 7 -------------------------------------------------------------------------

def test_fo_codec_exhaustive(capsys):
    start = time.perf_counter()
    codes = np.arange(1 << 24, dtype=np.uint32)
    label, index = decode_fo_pixel(codes)
    ok = bool(np.array_equal(encode_fo_pixel(label, index), codes))
    ok &= decode_fo_pixel(0) is None
    elapsed = time.perf_counter() - start
    report(capsys, 7, "FO codec exhaustiveness", ok, "all 2^24 codes round-trip", elapsed, 30)


# 8 -------------------------------------------------------------------------

def _retrieval(table, names, seed):
    rng = np.random.default_rng(seed)
    g = COGraph(0)
    gt = []
    for k, name in enumerate(names):
        p = np.array([2.0 * k, 0.0, 0.5])
        g.add_node(NodeRecord(0, 0, p, feature_label(name), (5, 5, 5),
                              perturb(table.embed(name), 0.02, rng)[0]))
        gt.append(GroundTruthObject(name, p))
    return recall_at_k(g, gt, names, 1, table)


def test_retrieval_sanity(capsys):
    start = time.perf_counter()
    names = list(HOUSEHOLD_CATEGORIES[:15])
    plain = _retrieval(EmbeddingTable(seed=0), names, 1)
    coupled = EmbeddingTable(seed=0, couplings={("sofa", "cushion"): 0.8})
    r1 = _retrieval(coupled, names, 1)
    m = coupled.matrix(names)
    sim = m @ m.T
    i, j = names.index("sofa"), names.index("cushion")
    off = sim[~np.eye(len(names), dtype=bool)]
    top = sim[i, j] >= off.max() and np.sum(off >= sim[i, j]) == 2
    elapsed = time.perf_counter() - start
    report(capsys, 8, "retrieval sanity", plain == 1.0 and r1 == 1.0 and top,
           f"R@1 {plain:.2f} plain, {r1:.2f} with sofa/cushion coupled at "
           f"{sim[i, j]:.3f} (next highest off-diagonal {np.sort(off)[-3]:.3f})", elapsed, 60)


# 9 -------------------------------------------------------------------------

def test_cmd_run_determinism(capsys, trained, tmp_path):
    path = tmp_path / "codec.bin"
    trained[2].save(path)
    start = time.perf_counter()
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        rc = cli_main(["run", "--scenario", "two_robot_apartment.json", "--codec", str(path),
                       "--out", str(out), "--seed", "7"])
        assert rc == 0
        outs.append((out / "metrics.json").read_bytes())
    elapsed = time.perf_counter() - start
    same = outs[0] == outs[1]
    n = len(json.loads(outs[0])["runs"]["compressed"])
    report(capsys, 9, "determinism", same,
           f"two cmd_run invocations, seed 7: metrics JSON byte-identical ({len(outs[0])} B, "
           f"{n} fields)", elapsed, 120)
