"""Place recognition, compass-aided translation estimation and graph union."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import COGraph, NodeRecord, quantize_extents


class NoPairs(ValueError):
    pass


@dataclass(frozen=True)
class MatchPair:
    local: int
    remote: int
    similarity: float


@dataclass
class TranslationCandidate:
    t: np.ndarray
    source: tuple[int, int]
    score: int
    residual: float
    inliers: list[tuple[int, int]] = field(default_factory=list)


@dataclass
class MergeResult:
    graph: COGraph
    t: np.ndarray
    R: np.ndarray
    fused: list[tuple[int, int]]
    id_map: dict[int, int]  # remote id -> merged id
    unmatched: bool = False


def local_features(graph: COGraph) -> dict[int, np.ndarray]:
    return {i: n.feat512 / np.linalg.norm(n.feat512)
            for i, n in graph.nodes.items() if n.feat512 is not None}


def remote_features(graph: COGraph, codec=None, raw: dict | None = None) -> dict[int, np.ndarray]:
    """Raw 512-d feature where one was transmitted, decoded feat3 otherwise."""
    raw = raw or {}
    out, need = {}, []
    for i, n in graph.nodes.items():
        f = raw.get(i, n.feat512)
        if f is not None:
            out[i] = f / np.linalg.norm(f)
        else:
            need.append(i)
    if need:
        if codec is None:
            raise ValueError("decoded features need a codec")
        dec = codec.decompress(np.array([graph.nodes[i].feat3 for i in need]))
        out.update(zip(need, dec))
    return out


def similarity_pairs(local_f: dict[int, np.ndarray], remote_f: dict[int, np.ndarray],
                     sim_threshold: float) -> list[MatchPair]:
    if not local_f or not remote_f:
        return []
    li, ri = sorted(local_f), sorted(remote_f)
    s = np.stack([local_f[i] for i in li]) @ np.stack([remote_f[j] for j in ri]).T
    out = []
    for a, b in zip(*np.nonzero(s >= sim_threshold)):
        out.append(MatchPair(li[a], ri[b], float(s[a, b])))
    return out


def place_recognition(local: COGraph, remote: COGraph, codec=None, sim_threshold: float = 0.95,
                      min_pairs: int = 3, raw: dict | None = None,
                      remote_f: dict | None = None) -> list[MatchPair] | None:
    """All cross-graph node pairs with cosine >= sim_threshold, or None when
    fewer than ``min_pairs`` exist (the remote graph is kept for later)."""
    if remote_f is None:
        remote_f = remote_features(remote, codec, raw)
    pairs = similarity_pairs(local_features(local), remote_f, sim_threshold)
    return pairs if len(pairs) >= min_pairs else None


def candidate_scores(pairs: list[MatchPair], local: COGraph, remote: COGraph,
                     R: np.ndarray, merge_distance: float = 0.5) -> list[TranslationCandidate]:
    """Score the translation implied by every pair against all pairs."""
    if not pairs:
        raise NoPairs("translation estimation needs at least one matching pair")
    R = np.asarray(R, dtype=np.float64)
    lp = np.stack([local.nodes[p.local].pos for p in pairs])
    rp = np.stack([remote.nodes[p.remote].pos for p in pairs]) @ R.T
    ts = lp - rp  # candidate t per pair
    out = []
    for k, p in enumerate(pairs):
        d = np.linalg.norm(lp - (rp + ts[k]), axis=1)
        inl = d <= merge_distance
        out.append(TranslationCandidate(ts[k].copy(), (p.local, p.remote), int(inl.sum()),
                                        float(d[inl].mean()),
                                        [(pairs[j].local, pairs[j].remote)
                                         for j in np.nonzero(inl)[0]]))
    return out


def estimate_translation(pairs: list[MatchPair], local: COGraph, remote: COGraph,
                         R: np.ndarray, merge_distance: float = 0.5,
                         refine: bool = True) -> TranslationCandidate:
    """Pick the candidate translation that merges the most node pairs.

    Ties go to the smaller mean residual, then the smaller (local, remote)
    pair. With ``refine`` the winner's t is replaced by the least-squares
    translation over its inlier pairs (R fixed).
    """
    cands = candidate_scores(pairs, local, remote, R, merge_distance)
    best = min(cands, key=lambda c: (-c.score, c.residual, c.source))
    if refine:
        R = np.asarray(R, dtype=np.float64)
        lp = np.stack([local.nodes[i].pos for i, _ in best.inliers])
        rp = np.stack([remote.nodes[j].pos for _, j in best.inliers]) @ R.T
        best = TranslationCandidate((lp - rp).mean(axis=0), best.source, best.score,
                                    best.residual, best.inliers)
    return best


def fused_pairs(local: COGraph, remote: COGraph, R, t, local_f, remote_f,
                sim_threshold: float = 0.95, merge_distance: float = 0.5) -> list[tuple[int, int]]:
    """One-to-one pairs passing both gates, chosen greedily by distance."""
    R = np.asarray(R, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    cand = []
    for p in similarity_pairs(local_f, remote_f, sim_threshold):
        d = float(np.linalg.norm(local.nodes[p.local].pos - (R @ remote.nodes[p.remote].pos + t)))
        if d <= merge_distance:
            cand.append((d, p.local, p.remote))
    cand.sort()
    used_l, used_r, out = set(), set(), []
    for _, i, j in cand:
        if i in used_l or j in used_r:
            continue
        used_l.add(i)
        used_r.add(j)
        out.append((i, j))
    return sorted(out)


def merge_graphs(local: COGraph, remote: COGraph, R, t, local_f=None, remote_f=None,
                 sim_threshold: float = 0.95, merge_distance: float = 0.5,
                 codec=None) -> MergeResult:
    """Union of ``local`` and ``remote`` (moved into the local frame by R, t)."""
    R = np.asarray(R, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    local_f = local_features(local) if local_f is None else local_f
    remote_f = remote_features(remote, codec) if remote_f is None else remote_f
    pairs = fused_pairs(local, remote, R, t, local_f, remote_f, sim_threshold, merge_distance)
    merged = local.copy()
    id_map: dict[int, int] = {}
    abs_r = np.abs(R)
    for i, j in pairs:
        ln, rn = merged.nodes[i], remote.nodes[j]
        rpos = R @ rn.pos + t
        r_half = abs_r @ rn.extents / 2
        l_half = ln.extents / 2
        lo = np.minimum(ln.pos - l_half, rpos - r_half)
        hi = np.maximum(ln.pos + l_half, rpos + r_half)
        feat = local_f.get(i)
        if feat is not None and j in remote_f:
            feat = feat + remote_f[j]
            feat = feat / np.linalg.norm(feat)
        merged.update_node(i, pos=(ln.pos + rpos) / 2, bbox=quantize_extents(hi - lo),
                           feat512=feat)
        id_map[j] = i
    for j, rn in remote.nodes.items():
        if j in id_map:
            continue
        node = NodeRecord(rn.robot, 0, R @ rn.pos + t, rn.label,
                          quantize_extents(abs_r @ rn.extents), remote_f.get(j), rn.feat3,
                          rn.keep_raw)
        id_map[j] = merged.add_node(node)
    for e in remote.edges:
        a, b = id_map.get(e.a), id_map.get(e.b)
        if a is None or b is None or a == b:
            continue
        merged.add_edge(a, b, robot=e.robot)
    return MergeResult(merged, t, R, pairs, id_map, unmatched=not pairs)


def t_error(estimated, truth) -> float:
    return float(np.linalg.norm(np.asarray(estimated, dtype=np.float64)
                                - np.asarray(truth, dtype=np.float64)))
