"""Object finding rate, top-k retrieval and merge-result tables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import COGraph
from .embeddings import EmbeddingTable, feature_label


class EmptyGraph(ValueError):
    pass


@dataclass
class QueryResult:
    k: int
    hits: list[tuple[int, int, float]]  # (robot, node id, similarity)


@dataclass
class GroundTruthObject:
    category: str
    center: np.ndarray


def node_features(graph: COGraph, codec=None) -> dict[int, np.ndarray]:
    """Unit 512-d feature per node; decodes feat3 where no 512-d feature is held."""
    out, need = {}, []
    for i, n in graph.nodes.items():
        if n.feat512 is not None:
            out[i] = n.feat512 / np.linalg.norm(n.feat512)
        else:
            need.append(i)
    if need and codec is not None:
        dec = codec.decompress(np.array([graph.nodes[i].feat3 for i in need]))
        out.update(zip(need, dec))
    return out


def query(graph: COGraph, text: str, k: int, table: EmbeddingTable,
          features: dict[int, np.ndarray] | None = None) -> QueryResult:
    """Top-k nodes by cosine between the text embedding and node features."""
    features = node_features(graph) if features is None else features
    if not features:
        raise EmptyGraph("graph has no nodes with features to query")
    q = table.embed(text)
    scored = [(graph.nodes[i].robot, i, float(q @ f)) for i, f in features.items()]
    scored.sort(key=lambda h: (-h[2], h[0], h[1]))
    return QueryResult(k, scored[:k])


def object_finding_rate(graph: COGraph, gt: list[GroundTruthObject], d_gt: float = 0.5) -> float:
    if not gt:
        return 1.0
    found = 0
    for o in gt:
        label = feature_label(o.category)
        for n in graph.nodes.values():
            if n.label == label and np.linalg.norm(n.pos - o.center) <= d_gt:
                found += 1
                break
    return found / len(gt)


def recall_at_k(graph: COGraph, gt: list[GroundTruthObject], queries, k: int,
                table: EmbeddingTable, features=None, d_gt: float = 0.5) -> float:
    """Fraction of category queries whose top-k holds a node on a GT object of that category."""
    queries = list(queries)
    if not queries:
        return 0.0
    features = node_features(graph) if features is None else features
    ok = 0
    for text in queries:
        targets = [o.center for o in gt if o.category == text]
        if not targets or not features:
            continue
        res = query(graph, text, k, table, features)
        if any(np.linalg.norm(graph.nodes[nid].pos - c) <= d_gt
               for _, nid, _ in res.hits for c in targets):
            ok += 1
    return ok / len(queries)


@dataclass
class MetricsBundle:
    r_obj: float
    r_at_1: float
    r_at_5: float
    t_error: float | None
    bytes_sent: int
    nodes: int
    edges: int
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"R_obj": self.r_obj, "R@1": self.r_at_1, "R@5": self.r_at_5,
             "t_error": self.t_error, "bytes": self.bytes_sent, "nodes": self.nodes,
             "edges": self.edges}
        d.update(self.extra)
        return d


def compute_metrics(graph: COGraph, gt: list[GroundTruthObject], queries, table: EmbeddingTable,
                    features=None, t_errors=(), bytes_sent: int = 0,
                    d_gt: float = 0.5) -> MetricsBundle:
    features = node_features(graph) if features is None else features
    t_errors = list(t_errors)
    return MetricsBundle(
        object_finding_rate(graph, gt, d_gt),
        recall_at_k(graph, gt, queries, 1, table, features, d_gt),
        recall_at_k(graph, gt, queries, 5, table, features, d_gt),
        float(np.mean(t_errors)) if t_errors else None,
        bytes_sent, len(graph.nodes), len(graph.edges),
    )


TABLE_COLUMNS = ("Scene", "Dimension", "Pose", "t_error(m)", "Data(KB)")


def format_table(rows: list[dict]) -> str:
    """Plain-text table with the columns of a map-merging evaluation."""
    cells = [list(TABLE_COLUMNS)]
    for r in rows:
        te = "-" if r["t_error"] is None else f"{r['t_error']:.3f}"
        cells.append([r["scene"], str(r["dimension"]), r["pose"], te, f"{r['bytes'] / 1000:.2f}"])
    widths = [max(len(row[c]) for row in cells) for c in range(len(TABLE_COLUMNS))]
    lines = ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def parse_table(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    out = []
    for ln in lines[2:]:
        scene, dim, pose, te, kb = ln.split()
        out.append({"scene": scene, "dimension": int(dim), "pose": pose,
                    "t_error": None if te == "-" else float(te), "kb": float(kb)})
    return out
