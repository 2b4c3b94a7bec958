import numpy as np
import pytest

from cograph.core import (COGraph, IdSpaceExhausted, SelfLoop, UnknownNode, dump_graph,
                          load_graph, quantize_extents)

from conftest import make_node


def test_first_node_gets_id_zero():
    g = COGraph(3)
    assert g.add_node(make_node(3)) == 0


def test_id_space_boundary():
    g = COGraph(0)
    for _ in range(255):
        g.add_node(make_node())
    assert g.add_node(make_node()) == 255
    with pytest.raises(IdSpaceExhausted):
        g.add_node(make_node())


def test_edges_are_canonical_and_idempotent():
    g = COGraph(0)
    for _ in range(4):
        g.add_node(make_node())
    g.add_edge(3, 1)
    g.add_edge(1, 3)
    assert [(e.a, e.b) for e in g.edges] == [(1, 3)]
    assert g.has_edge(3, 1)


def test_edge_errors():
    g = COGraph(0)
    for _ in range(4):
        g.add_node(make_node())
    with pytest.raises(SelfLoop):
        g.add_edge(2, 2)
    with pytest.raises(UnknownNode):
        g.add_edge(0, 9)


def test_bbox_quantization_rounds_and_saturates():
    assert quantize_extents([0.04, 0.05, 0.26]) == (0, 1, 3)
    assert quantize_extents([30.0, 25.5, 0.0]) == (255, 255, 0)
    with pytest.raises(ValueError):
        quantize_extents([-0.1, 0, 0])


def test_update_marks_sent_nodes_dirty_only_on_change():
    g = COGraph(0)
    g.add_node(make_node(pos=(1, 2, 3)))
    g.add_node(make_node())
    g.sent_nodes = 1
    g.update_node(0, pos=np.array([1.0, 2.0, 3.0]))
    assert g.dirty == set()
    g.update_node(0, pos=np.array([1.5, 2.0, 3.0]))
    g.update_node(1, pos=np.array([9.0, 9.0, 9.0]))  # never sent, nothing to re-send
    assert g.dirty == {0}


def test_dump_round_trip():
    rng = np.random.default_rng(0)
    g = COGraph(7)
    for k in range(5):
        g.add_node(make_node(7, rng.normal(size=3), label=k + 1, bbox=(k, 2, 3),
                             feat512=rng.normal(size=512) if k % 2 else None,
                             feat3=(k, 10, 200), keep_raw=bool(k == 3)))
    g.add_edge(0, 4)
    g.add_edge(2, 1)
    back, meta = load_graph(dump_graph(g, embedding_seed=5))
    assert meta == {"embedding_seed": "5"}
    assert back.robot == 7
    assert [e for e in back.edges] == g.edges
    for i, n in g.nodes.items():
        m = back.nodes[i]
        assert m.state_key() == n.state_key()
