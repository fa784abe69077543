from fractions import Fraction

import numpy as np
import pytest

from app.config import Settings
from app.models.errors import InputError, SchottkyError
from app.models.schemas import GraphFile
from app.services.differentials import (
    closed_form_restriction,
    degenerate_forms,
    eval_first_kind,
    eval_second_kind,
    eval_third_kind,
    first_kind,
    node_residue_balance,
    parse_kind,
    restrict_to_component,
    second_kind,
    third_kind,
    vertex_classes,
)
from app.services.graph_core import StableGraph
from app.services.moebius import derivative_at
from app.services.params import series_ring_for
from app.services.rings import ComplexRing


@pytest.fixture
def genus1_series(genus1_graph, genus1_params, settings, group_factory):
    graph = StableGraph.from_model(GraphFile.model_validate(genus1_graph))
    return group_factory(genus1_graph, genus1_params, series_ring_for(graph, settings.degree), settings)


def test_genus_one_first_kind_is_dz_over_z(genus1_series) -> None:
    omega = first_kind(genus1_series, 1)
    assert omega(Fraction(2)) == Fraction(1, 2)
    form = restrict_to_component(omega, "v0")
    assert [(t.at, t.order, t.coefficient) for t in form.terms] == [(Fraction(0), 1, Fraction(1)), (None, 1, Fraction(-1))]
    assert form(Fraction(4)) == Fraction(1, 4)
    assert form.same_as(closed_form_restriction(omega, "v0"))


def test_genus_one_complex_evaluation(genus1_graph, genus1_params, settings, group_factory) -> None:
    group = group_factory(genus1_graph, genus1_params, ComplexRing(), settings)
    assert eval_first_kind(group, 1, 2) == pytest.approx(0.5)
    with pytest.raises(SchottkyError, match="evaluation at pole"):
        eval_first_kind(group, 1, 0)


@pytest.mark.parametrize("kind", ["first:1", "second:t1:2", "second:t2:3", "third:t1:t2"])
def test_lollipop_restrictions_match_closed_forms(lollipop_series, kind) -> None:
    diff = parse_kind(lollipop_series, kind)
    for v in lollipop_series.graph.vertices:
        assert restrict_to_component(diff, v).same_as(closed_form_restriction(diff, v)), (kind, v)


def test_lollipop_first_kind_lives_on_the_loop_vertex(lollipop_series) -> None:
    omega = first_kind(lollipop_series, 1)
    assert restrict_to_component(omega, "v0").terms == []
    on_loop = restrict_to_component(omega, "v1")
    assert on_loop.residue_at(Fraction(1)) == 1
    assert on_loop.residue_at(Fraction(2)) == -1
    assert on_loop.residue_at(None) == 0


def test_node_residues_balance(lollipop_series) -> None:
    for kind in ("first:1", "third:t1:t2"):
        balance = node_residue_balance(parse_kind(lollipop_series, kind))
        assert set(balance) == {"e1", "l1"}
        assert all(r == 0 for r in balance.values())


def test_third_kind_residues_on_the_tail_vertex(lollipop_series) -> None:
    form = restrict_to_component(third_kind(lollipop_series, "t1", "t2"), "v0")
    assert form.residue_at(Fraction(1)) == 1
    assert form.residue_at(Fraction(2)) == -1


def test_second_kind_pole_order(lollipop_series) -> None:
    form = restrict_to_component(second_kind(lollipop_series, "t1", 3), "v0")
    assert [(t.at, t.order) for t in form.terms] == [(Fraction(1), 3)]
    assert form(Fraction(3)) == Fraction(1, 8)


def test_kind_parsing_errors(lollipop_series) -> None:
    with pytest.raises(InputError):
        parse_kind(lollipop_series, "fourth:1")
    with pytest.raises(InputError):
        parse_kind(lollipop_series, "first:x")
    with pytest.raises(InputError):
        first_kind(lollipop_series, 2)
    with pytest.raises(InputError):
        second_kind(lollipop_series, "t1", 1)
    with pytest.raises(InputError):
        third_kind(lollipop_series, "t1", "t1")


def test_second_kind_needs_a_finite_base(genus1_series) -> None:
    with pytest.raises(SchottkyError, match="infinity branch"):
        second_kind(genus1_series, "t1", 2)


def test_partial_degeneration_splits_the_vertices(lollipop_series) -> None:
    assert vertex_classes(lollipop_series, ["e1"]) == [["v0"], ["v1"]]
    assert vertex_classes(lollipop_series, []) == [["v0", "v1"]]
    classes = {tuple(members): poles for members, _, poles in degenerate_forms(lollipop_series, ["e1"])}
    assert classes[("v0",)] == []
    loop_poles = sorted((p.point.affine().constant_term(), p.residue) for p in classes[("v1",)])
    assert loop_poles == [(Fraction(1), 1), (Fraction(2), -1)]
    with pytest.raises(InputError):
        degenerate_forms(lollipop_series, ["nope"])


def test_second_kind_over_series_uses_reduced_paths(lollipop_series) -> None:
    value = eval_second_kind(lollipop_series, "t1", 2, Fraction(1, 2))
    assert value.constant_term() == 4
    form = restrict_to_component(second_kind(lollipop_series, "t1", 2), "v0")
    assert [(t.at, t.order, t.coefficient) for t in form.terms] == [(Fraction(1), 2, Fraction(1))]


# Complex evaluation ---------------------------------------------------------

def _contour_integral(diff, center: complex, radius: float, samples: int = 256) -> complex:
    # (1 / 2 pi i) of the integral over the circle, trapezoid rule
    points = center + radius * np.exp(2j * np.pi * np.arange(samples) / samples)
    return complex(np.mean([diff(z) * (z - center) for z in points]))


@pytest.fixture
def lollipop_complex(lollipop_graph_file, lollipop_params, settings, group_factory):
    return group_factory(lollipop_graph_file, lollipop_params, ComplexRing(settings.tol), settings)


def test_first_kind_is_invariant_under_the_generators(genus2_graph, genus2_params, group_factory) -> None:
    settings = Settings(wordlen=6, degree=4)
    group = group_factory(genus2_graph, genus2_params, ComplexRing(settings.tol), settings)
    z = 3 + 1j
    for i in (1, 2):
        omega = first_kind(group, i)
        for j in (1, 2):
            m = group.gamma(j)
            moved = omega(m.apply_value(z)) * derivative_at(m, z)
            assert abs(moved - omega(z)) < 1e-6 * max(1.0, abs(omega(z))), (i, j)


def test_third_kind_contour_residues(lollipop_complex) -> None:
    omega = third_kind(lollipop_complex, "t1", "t2")
    assert _contour_integral(omega, 1, 0.2) == pytest.approx(1, abs=1e-8)
    assert _contour_integral(omega, 2, 0.2) == pytest.approx(-1, abs=1e-8)


def test_third_kind_is_antisymmetric(lollipop_complex) -> None:
    for z in (0.5 + 0.5j, 1.5 - 0.25j, -1 + 2j):
        assert eval_third_kind(lollipop_complex, "t1", "t2", z) == pytest.approx(
            -eval_third_kind(lollipop_complex, "t2", "t1", z), abs=1e-10
        )


def test_second_kind_has_no_residue(genus2_complex) -> None:
    omega = second_kind(genus2_complex, "t1", 2)
    assert abs(_contour_integral(omega, 20, 1.0)) < 1e-8


@pytest.mark.parametrize("k", [2, 3])
def test_second_kind_matches_the_word_sum(genus2_complex, k) -> None:
    z = 3 + 1j
    expected = sum(
        derivative_at(m, z) / (m.apply_value(z) - 20) ** k for _, m in genus2_complex.enumerate_reduced_words()
    )
    assert eval_second_kind(genus2_complex, "t1", k, z) == pytest.approx(expected, rel=1e-9)


# Special fibre on larger graphs ---------------------------------------------

LOLLIPOP_2_2 = {
    "vertices": ["v0", "v1", "v2"],
    "edges": [
        {"id": "e1", "from": "v1", "to": "v0"},
        {"id": "l1", "from": "v1", "to": "v1", "loop": True},
        {"id": "e2", "from": "v2", "to": "v0"},
        {"id": "l2", "from": "v2", "to": "v2", "loop": True},
    ],
    "tails": [{"id": "t1", "vertex": "v0", "nu": 1}, {"id": "t2", "vertex": "v0", "nu": 2}],
}
LOLLIPOP_2_2_PARAMS = {
    "x": {"e1": "3", "e2": "4", "t1": "1", "t2": "2", "-e1": "0", "l1": "1", "-l1": "2", "-e2": "0", "l2": "1", "-l2": "2"},
    "y": {"e1": "1/100", "l1": "1/100", "e2": "1/100", "l2": "1/100"},
}

# trivalent, genus 2, one tail: e1 and e2 span the tree, f1 and f2 close the cycles
THETA_WITH_TAIL = {
    "vertices": ["v0", "v1", "v2"],
    "edges": [
        {"id": "e1", "from": "v0", "to": "v1"},
        {"id": "e2", "from": "v0", "to": "v2"},
        {"id": "f1", "from": "v1", "to": "v2"},
        {"id": "f2", "from": "v1", "to": "v2"},
    ],
    "tails": [{"id": "t1", "vertex": "v0", "nu": 1}],
}
THETA_PARAMS = {
    "x": {"t1": "1", "-e1": "2", "-e2": "3", "e1": "0", "-f1": "1", "-f2": "2", "e2": "0", "f1": "1", "f2": "2"},
    "y": {"e1": "1/100", "e2": "1/100", "f1": "1/100", "f2": "1/120"},
}


@pytest.mark.parametrize(
    "graph_data, params_data, kinds",
    [
        (LOLLIPOP_2_2, LOLLIPOP_2_2_PARAMS, ["first:1", "first:2", "second:t1:2", "second:t2:3", "third:t1:t2"]),
        (THETA_WITH_TAIL, THETA_PARAMS, ["first:1", "first:2", "second:t1:2", "second:t1:3"]),
    ],
    ids=["lollipop", "theta"],
)
def test_genus_two_restrictions_match_closed_forms(graph_data, params_data, kinds, settings, group_factory) -> None:
    graph = StableGraph.from_model(GraphFile.model_validate(graph_data))
    group = group_factory(graph_data, params_data, series_ring_for(graph, settings.degree), settings)
    assert group.genus == 2
    for kind in kinds:
        diff = parse_kind(group, kind)
        for v in graph.vertices:
            assert restrict_to_component(diff, v).same_as(closed_form_restriction(diff, v)), (kind, v)
        assert all(r == 0 for r in node_residue_balance(diff).values()), kind
