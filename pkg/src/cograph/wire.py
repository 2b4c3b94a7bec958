"""Bit-exact delta messages between robots.

Layout (little-endian throughout)::

    header   robot:u8  node_count:u16  edge_count:u16          5 bytes
    node     robot:u8  id:u8  pos:3*f32  label:u16
             bbox:3*u8  feat3:3*u8                             22 bytes
    edge     robot:u8  a:u8  b:u8                               3 bytes
    raw      id:u8  feat:512*i8                               513 bytes

Bit 15 of ``node_count`` selects the raw-512 baseline layout, where each node
carries the 512-byte feature in place of ``feat3`` (531 bytes per node) and no
raw section follows. In the compressed layout the raw section holds one entry
per keep_raw node and runs to the end of the message.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .core import COGraph, EdgeRecord, NodeRecord

HEADER = struct.Struct("<BHH")
NODE_PREFIX = struct.Struct("<BB3fH3B")  # everything except the feature field
EDGE = struct.Struct("<BBB")
FEAT3_BYTES = 3
RAW_FEATURE_BYTES = 512
RAW_SCALE = 0.25  # int8 full scale for raw features (unit vectors)
RAW_FLAG = 0x8000

NODE_BYTES = NODE_PREFIX.size + FEAT3_BYTES  # 22
RAW_NODE_BYTES = NODE_PREFIX.size + RAW_FEATURE_BYTES  # 531
RAW_ENTRY_BYTES = 1 + RAW_FEATURE_BYTES  # 513

COMPRESSED = "compressed"
RAW512 = "raw-512"


class WireError(ValueError):
    pass


class Truncated(WireError):
    pass


class BadCounts(WireError):
    pass


def pack_raw_feature(f: np.ndarray) -> bytes:
    q = np.clip(np.floor(np.asarray(f, dtype=np.float64) * (127 / RAW_SCALE) + 0.5), -127, 127)
    return q.astype(np.int8).tobytes()


def unpack_raw_feature(buf: bytes) -> np.ndarray:
    return np.frombuffer(buf, dtype=np.int8).astype(np.float64) * (RAW_SCALE / 127)


@dataclass
class DeltaMessage:
    robot: int
    nodes: list[NodeRecord] = field(default_factory=list)
    edges: list[EdgeRecord] = field(default_factory=list)
    raw_features: dict[int, np.ndarray] = field(default_factory=dict)
    mode: str = COMPRESSED


def encode_message(msg: DeltaMessage) -> bytes:
    raw_mode = msg.mode == RAW512
    if len(msg.nodes) >= RAW_FLAG:
        raise WireError("too many nodes for one message")
    out = bytearray(HEADER.pack(msg.robot, len(msg.nodes) | (RAW_FLAG if raw_mode else 0),
                                len(msg.edges)))
    for n in msg.nodes:
        x, y, z = n.pos
        out += NODE_PREFIX.pack(n.robot, n.id, x, y, z, n.label, *n.bbox)
        if raw_mode:
            if n.feat512 is None:
                raise WireError(f"node {n.id} has no 512-d feature for raw-512 mode")
            out += pack_raw_feature(n.feat512)
        else:
            out += bytes(n.feat3)
    for e in msg.edges:
        out += EDGE.pack(e.robot, e.a, e.b)
    if not raw_mode:
        for nid, f in msg.raw_features.items():
            out += bytes([nid]) + pack_raw_feature(f)
    return bytes(out)


def serialize_delta(graph: COGraph, mode: str = COMPRESSED) -> bytes:
    """Encode nodes/edges not yet sent (plus modified nodes) and advance the watermark."""
    ids = sorted(set(range(graph.sent_nodes, len(graph.nodes))) | graph.dirty)
    nodes = [graph.nodes[i] for i in ids]
    edges = graph.edges[graph.sent_edges:]
    raw = {}
    if mode == COMPRESSED:
        raw = {n.id: n.feat512 for n in nodes if n.keep_raw and n.feat512 is not None}
    data = encode_message(DeltaMessage(graph.robot, nodes, edges, raw, mode))
    graph.sent_nodes = len(graph.nodes)
    graph.sent_edges = len(graph.edges)
    graph.dirty.clear()
    return data


def deserialize_delta(data: bytes) -> DeltaMessage:
    if len(data) < HEADER.size:
        raise Truncated(f"message of {len(data)} bytes is shorter than the header")
    robot, node_field, n_edges = HEADER.unpack_from(data, 0)
    raw_mode = bool(node_field & RAW_FLAG)
    n_nodes = node_field & ~RAW_FLAG
    per_node = RAW_NODE_BYTES if raw_mode else NODE_BYTES
    body = len(data) - HEADER.size
    need = n_nodes * per_node + n_edges * EDGE.size
    if need > body:
        raise BadCounts(f"header declares {n_nodes} nodes/{n_edges} edges "
                        f"({need} bytes) but only {body} bytes follow")
    extra = body - need
    if raw_mode and extra:
        raise BadCounts(f"{extra} trailing bytes after a raw-512 message")
    if extra % RAW_ENTRY_BYTES:
        raise Truncated(f"raw-feature section of {extra} bytes is not a whole number of entries")

    msg = DeltaMessage(robot, mode=RAW512 if raw_mode else COMPRESSED)
    off = HEADER.size
    for _ in range(n_nodes):
        r, nid, x, y, z, label, b0, b1, b2 = NODE_PREFIX.unpack_from(data, off)
        off += NODE_PREFIX.size
        node = NodeRecord(r, nid, np.array([x, y, z], dtype=np.float32).astype(np.float64),
                          label, (b0, b1, b2))
        if raw_mode:
            node.feat512 = unpack_raw_feature(data[off : off + RAW_FEATURE_BYTES])
            off += RAW_FEATURE_BYTES
        else:
            node.feat3 = tuple(data[off : off + FEAT3_BYTES])
            off += FEAT3_BYTES
        msg.nodes.append(node)
    for _ in range(n_edges):
        r, a, b = EDGE.unpack_from(data, off)
        off += EDGE.size
        msg.edges.append(EdgeRecord(r, a, b))
    while off < len(data):
        nid = data[off]
        msg.raw_features[nid] = unpack_raw_feature(data[off + 1 : off + RAW_ENTRY_BYTES])
        off += RAW_ENTRY_BYTES
    return msg


def message_size(n_nodes: int, n_edges: int, n_keep_raw: int = 0, mode: str = COMPRESSED) -> int:
    per_node = RAW_NODE_BYTES if mode == RAW512 else NODE_BYTES
    extra = 0 if mode == RAW512 else n_keep_raw * RAW_ENTRY_BYTES
    return HEADER.size + n_nodes * per_node + n_edges * EDGE.size + extra


@dataclass
class ReceivedGraph:
    """What one robot knows about another robot's graph."""

    graph: COGraph
    pending: list[EdgeRecord] = field(default_factory=list)
    raw: dict[int, np.ndarray] = field(default_factory=dict)

    def feature_source(self, nid: int) -> np.ndarray | None:
        return self.raw.get(nid)


class Registry(dict):
    """robot id -> ReceivedGraph. Senders are independent of each other."""

    def for_robot(self, robot: int) -> ReceivedGraph:
        if robot not in self:
            self[robot] = ReceivedGraph(COGraph(robot))
        return self[robot]


def apply_delta(registry: Registry, msg: DeltaMessage | bytes) -> Registry:
    if isinstance(msg, (bytes, bytearray)):
        msg = deserialize_delta(bytes(msg))
    rg = registry.for_robot(msg.robot)
    g = rg.graph
    for n in msg.nodes:
        g.nodes[n.id] = n  # latest wins
        if msg.mode == RAW512:
            rg.raw[n.id] = n.feat512
        elif n.id not in msg.raw_features:
            rg.raw.pop(n.id, None)
    for nid, f in msg.raw_features.items():
        rg.raw[nid] = f
        if nid in g.nodes:
            g.nodes[nid].keep_raw = True
            g.nodes[nid].feat512 = f
    still = []
    for e in [*rg.pending, *msg.edges]:
        if e.a in g.nodes and e.b in g.nodes:
            g.add_edge(e.a, e.b, robot=e.robot)
        else:
            still.append(e)
    rg.pending = still
    return registry
