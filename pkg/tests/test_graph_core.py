import pytest

from app.models.errors import GraphError
from app.services.graph_core import (
    Branch,
    Edge,
    EdgePath,
    StableGraph,
    Tail,
    contract_edge,
    cyclic_reduction,
    fundamental_group_generators,
    generator_edges,
    is_isomorphic,
    lollipop_graph,
    one_vertex_graph,
    reduce_path,
    split_vertex,
    tree_path,
    type_of,
    validate_stable,
)


def _issues(graph: StableGraph):
    return [i.issue for i in validate_stable(graph)]


def test_standard_shapes_are_stable() -> None:
    for graph in (one_vertex_graph(1, 1), one_vertex_graph(2, 1), lollipop_graph(1, 2), lollipop_graph(2, 1)):
        assert validate_stable(graph) == []
    assert type_of(lollipop_graph(2, 1)) == (2, 1)
    assert type_of(one_vertex_graph(3, 2)) == (3, 2)


def test_unstable_vertex_is_reported() -> None:
    assert "vertex branch count < 3" in _issues(one_vertex_graph(1, 0))


def test_disconnected_graph_is_reported() -> None:
    graph = StableGraph(
        ("a", "b"),
        (Edge("l1", "a", "a"), Edge("l2", "b", "b")),
        (Tail("t1", "a", 1), Tail("t2", "b", 2)),
    )
    assert "not connected" in _issues(graph)
    with pytest.raises(GraphError, match="not connected"):
        type_of(graph)


def test_tail_numbering_must_be_a_bijection() -> None:
    graph = StableGraph(("v0",), (Edge("l1", "v0", "v0"),), (Tail("t1", "v0", 2),))
    assert "numbering nu is not a bijection onto 1..n" in _issues(graph)


def test_infinity_set_rules() -> None:
    both = StableGraph(("v0",), (Edge("l1", "v0", "v0"),), (Tail("t1", "v0", 1),), frozenset({Branch("l1", 1), Branch("l1", -1)}))
    issues = _issues(both)
    assert "infinity set contains an edge together with its reverse" in issues
    assert any(i.startswith("infinity set has two branches ending at") for i in issues)

    unknown = StableGraph(("v0",), (Edge("l1", "v0", "v0"),), (Tail("t1", "v0", 1),), frozenset({Branch("zz", 1)}))
    assert "infinity set names an unknown branch" in _issues(unknown)


def test_tails_have_no_reverse() -> None:
    assert -Branch("e", 1) == Branch("e", -1)
    with pytest.raises(GraphError):
        -Branch("t1", 0)


def test_path_reduction() -> None:
    e, f = Branch("e", 1), Branch("f", 1)
    assert reduce_path([e, f, -f, -e, f]) == (f,)
    sigma, kappa = cyclic_reduction(EdgePath((-e, f, e)))
    assert sigma.branches == (-e,)
    assert kappa.branches == (f,)


def test_lollipop_generators_run_through_the_loop() -> None:
    graph = lollipop_graph(1, 2)
    assert generator_edges(graph) == ["l1"]
    assert tree_path(graph, "v0", "v1").branches == (Branch("e1", -1),)
    (gen,) = fundamental_group_generators(graph, "v0")
    assert str(gen) == "-e1·l1·e1"
    assert gen.is_reduced()


def test_split_then_contract_restores_the_graph() -> None:
    graph = one_vertex_graph(2, 1)
    split, h0 = split_vertex(graph, "v0", Branch("l1", 1), Branch("l1", -1), new_vertex="w", new_edge="h0")
    assert h0 == "h0"
    assert validate_stable(split) == []
    assert type_of(split) == type_of(graph)
    assert split.terminal(Branch("h0", 1)) == "v0"
    assert split.terminal(Branch("h0", -1)) == "w"
    assert split.tail("t1").vertex == "w"
    assert contract_edge(split, "h0") == graph


def test_split_needs_four_branches() -> None:
    graph = lollipop_graph(1, 2)
    with pytest.raises(GraphError, match="cannot split trivalent vertex"):
        split_vertex(graph, "v0", Branch("t1", 0), Branch("t2", 0))


def test_split_rejects_foreign_branches() -> None:
    graph = one_vertex_graph(2, 1)
    with pytest.raises(GraphError):
        split_vertex(graph, "v0", Branch("l1", 1), Branch("nope", 1))


def test_contracting_a_loop_fails() -> None:
    with pytest.raises(GraphError, match="cannot contract a loop"):
        contract_edge(lollipop_graph(1, 2), "l1")


def test_file_model_round_trip_is_isomorphic() -> None:
    graph = lollipop_graph(2, 2)
    again = StableGraph.from_model(graph.to_model())
    assert again == graph
    assert is_isomorphic(again, graph)
    assert not is_isomorphic(lollipop_graph(1, 2), one_vertex_graph(1, 2))


def test_parse_branch_resolves_signs_and_tails() -> None:
    graph = lollipop_graph(1, 2)
    assert graph.parse_branch("-e1") == Branch("e1", -1)
    assert graph.parse_branch("t2") == Branch("t2", 0)
    with pytest.raises(GraphError):
        graph.parse_branch("x9")
