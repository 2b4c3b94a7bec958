"""COGraph data model: object nodes, adjacency edges and per-robot graphs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_NODES = 256
BBOX_STEP = 0.1  # meters per bbox unit
BBOX_MAX = 255


class GraphError(Exception):
    pass


class IdSpaceExhausted(GraphError):
    pass


class UnknownNode(GraphError):
    pass


class SelfLoop(GraphError):
    pass


def quantize_extents(extents) -> tuple[int, int, int]:
    """Meters -> three saturating bytes at 0.1 m per step."""
    e = np.asarray(extents, dtype=np.float64)
    if np.any(e < 0):
        raise ValueError("bounding-box extents must be non-negative")
    q = np.minimum(np.floor(e / BBOX_STEP + 0.5), BBOX_MAX).astype(int)
    return tuple(int(v) for v in q)


@dataclass
class NodeRecord:
    robot: int
    id: int
    pos: np.ndarray
    label: int
    bbox: tuple[int, int, int] = (0, 0, 0)
    feat512: np.ndarray | None = None
    feat3: tuple[int, int, int] = (0, 0, 0)
    keep_raw: bool = False

    def __post_init__(self):
        self.pos = np.asarray(self.pos, dtype=np.float64).reshape(3)
        self.bbox = tuple(int(v) for v in self.bbox)
        self.feat3 = tuple(int(v) for v in self.feat3)
        if any(not 0 <= v <= 255 for v in (*self.bbox, *self.feat3)):
            raise ValueError("bbox and feat3 are byte-valued")
        if not 0 <= self.label <= 0xFFFF:
            raise ValueError("label is a 16-bit value")

    @property
    def extents(self) -> np.ndarray:
        return np.asarray(self.bbox, dtype=np.float64) * BBOX_STEP

    def wire_key(self) -> tuple:
        """The transmitted fields, as they appear after a wire round-trip."""
        return (self.robot, self.id, self.pos.astype(np.float32).tobytes(), self.label,
                self.bbox, self.feat3)

    def state_key(self) -> tuple:
        f = None if self.feat512 is None else self.feat512.tobytes()
        return (*self.wire_key(), self.keep_raw, f)


@dataclass(frozen=True)
class EdgeRecord:
    robot: int
    a: int
    b: int

    @classmethod
    def make(cls, robot: int, a: int, b: int) -> "EdgeRecord":
        if a == b:
            raise SelfLoop(f"self loop on node {a}")
        return cls(robot, min(a, b), max(a, b))


@dataclass
class COGraph:
    robot: int
    nodes: dict[int, NodeRecord] = field(default_factory=dict)
    edges: list[EdgeRecord] = field(default_factory=list)
    sent_nodes: int = 0
    sent_edges: int = 0
    dirty: set[int] = field(default_factory=set)

    def __post_init__(self):
        self._edge_keys = {(e.a, e.b) for e in self.edges}

    def __len__(self) -> int:
        return len(self.nodes)

    def add_node(self, node: NodeRecord) -> int:
        """Insert ``node`` under the next sequential id and return that id."""
        nid = len(self.nodes)
        if nid >= MAX_NODES:
            raise IdSpaceExhausted(f"robot {self.robot} already holds {MAX_NODES} nodes")
        node.id = nid
        self.nodes[nid] = node
        return nid

    def add_edge(self, a: int, b: int, robot: int | None = None) -> EdgeRecord:
        if a == b:
            raise SelfLoop(f"self loop on node {a}")
        for n in (a, b):
            if n not in self.nodes:
                raise UnknownNode(f"node {n} not in graph of robot {self.robot}")
        edge = EdgeRecord.make(self.robot if robot is None else robot, a, b)
        if (edge.a, edge.b) not in self._edge_keys:
            self._edge_keys.add((edge.a, edge.b))
            self.edges.append(edge)
        return edge

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self._edge_keys

    def update_node(self, nid: int, **fields) -> None:
        """Modify a node in place; transmitted nodes are re-queued for sending."""
        node = self.nodes[nid]
        before = node.state_key()
        for k, v in fields.items():
            setattr(node, k, v)
        node.__post_init__()
        if nid < self.sent_nodes and node.state_key() != before:
            self.dirty.add(nid)

    def positions(self) -> np.ndarray:
        if not self.nodes:
            return np.zeros((0, 3))
        return np.stack([n.pos for n in self.nodes.values()])

    def copy(self) -> "COGraph":
        g = COGraph(self.robot, sent_nodes=self.sent_nodes, sent_edges=self.sent_edges,
                    dirty=set(self.dirty))
        for nid, n in self.nodes.items():
            g.nodes[nid] = NodeRecord(n.robot, n.id, n.pos.copy(), n.label, n.bbox,
                                      None if n.feat512 is None else n.feat512.copy(),
                                      n.feat3, n.keep_raw)
        g.edges = list(self.edges)
        g._edge_keys = set(self._edge_keys)
        return g


def dump_graph(graph: COGraph, embedding_seed: int | None = None) -> str:
    """Line-oriented text dump: one node/edge per line, features on their own lines."""
    lines = [f"cograph {graph.robot}"]
    if embedding_seed is not None:
        lines.append(f"embedding_seed {embedding_seed}")
    for n in graph.nodes.values():
        x, y, z = (float(v) for v in n.pos)
        lines.append(
            f"node {n.robot} {n.id} {x!r} {y!r} {z!r} {n.label} "
            f"{n.bbox[0]} {n.bbox[1]} {n.bbox[2]} {n.feat3[0]} {n.feat3[1]} {n.feat3[2]} "
            f"{int(n.keep_raw)}"
        )
        if n.feat512 is not None:
            lines.append(f"feat {n.id} " + " ".join(repr(float(v)) for v in n.feat512))
    for e in graph.edges:
        lines.append(f"edge {e.robot} {e.a} {e.b}")
    return "\n".join(lines) + "\n"


def load_graph(text: str) -> tuple[COGraph, dict[str, str]]:
    graph = None
    meta: dict[str, str] = {}
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        kind = parts[0]
        if kind == "cograph":
            graph = COGraph(int(parts[1]))
        elif kind == "node":
            r, i = int(parts[1]), int(parts[2])
            pos = [float(v) for v in parts[3:6]]
            vals = [int(v) for v in parts[6:]]
            graph.nodes[i] = NodeRecord(r, i, pos, vals[0], tuple(vals[1:4]),
                                        None, tuple(vals[4:7]), bool(vals[7]))
        elif kind == "feat":
            graph.nodes[int(parts[1])].feat512 = np.array([float(v) for v in parts[2:]])
        elif kind == "edge":
            graph.add_edge(int(parts[2]), int(parts[3]), robot=int(parts[1]))
        else:
            meta[kind] = " ".join(parts[1:])
    if graph is None:
        raise ValueError("not a graph dump")
    return graph, meta
