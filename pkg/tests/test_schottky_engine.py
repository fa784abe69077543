from fractions import Fraction

import pytest

from app.config import Settings
from app.models.errors import GraphError, InputError, SchottkyError
from app.models.schemas import GraphFile, ParamsFile
from app.services.graph_core import StableGraph
from app.services.params import parse_params
from app.services.rings import ComplexRing, RationalRing
from app.services.schottky_engine import alphabet, build_group, word_count, word_label


def test_alphabet_and_labels() -> None:
    assert alphabet(2) == [1, -1, 2, -2]
    assert word_label(()) == "1"
    assert word_label((1, -2)) == "g1*g2^-1"
    assert word_count(2, 3) == 53
    assert word_count(0, 5) == 1


def test_reduced_words_are_complete_and_reduced(genus2_rational) -> None:
    words = [w for w, _ in genus2_rational.enumerate_reduced_words(3)]
    assert len(words) == word_count(2, 3)
    assert len(set(words)) == len(words)
    assert all(a != -b for w in words for a, b in zip(w, w[1:]))
    assert words[:3] == [(), (1,), (1, 1)]


def test_word_matrices_multiply(genus2_rational) -> None:
    group = genus2_rational
    for word, m in group.enumerate_reduced_words(2):
        assert m.projectively_equal(group.word_matrix(word), group.ring)


def test_threaded_enumeration_is_deterministic(genus2_graph, genus2_params, group_factory) -> None:
    single = group_factory(genus2_graph, genus2_params, RationalRing(), Settings(wordlen=3, threads=1))
    many = group_factory(genus2_graph, genus2_params, RationalRing(), Settings(wordlen=3, threads=4))
    assert [w for w, _ in single.enumerate_reduced_words()] == [w for w, _ in many.enumerate_reduced_words()]
    assert [m.entries() for _, m in single.enumerate_reduced_words()] == [m.entries() for _, m in many.enumerate_reduced_words()]


def test_coset_representatives(genus2_rational) -> None:
    reps = genus2_rational.coset_reps(1, 2)
    assert all(not w or abs(w[-1]) != 1 for w, _ in reps)
    double = genus2_rational.double_coset_reps(1, 2, 2)
    assert all(not w or (abs(w[0]) != 1 and abs(w[-1]) != 2) for w, _ in double)
    with pytest.raises(InputError):
        genus2_rational.coset_reps(3)


def test_one_vertex_generators_are_the_atoms(genus2_rational) -> None:
    group = genus2_rational
    assert [gen.edge for gen in group.generators] == ["l1", "l2"]
    assert group.beta(1) == Fraction(1, 100)
    assert group.beta(2) == Fraction(1, 120)
    assert group.alpha(1).affine() == 0
    assert group.alpha(-1).affine() == 2
    assert group.alpha(2).affine() == 5
    assert group.alpha(-2).affine() == 8


def test_lollipop_multiplier_is_the_loop_variable(lollipop_series) -> None:
    group = lollipop_series
    assert str(group.generators[0].path) == "-e1·l1·e1"
    assert group.beta(1) == group.ring.variable("l1")


def test_word_multiplier_matches_generator(genus2_complex) -> None:
    assert genus2_complex.word_multiplier((1,)) == pytest.approx(0.01)
    assert genus2_complex.word_multiplier((1, 1)) == pytest.approx(1e-4)


def test_overlapping_isometric_circles_fail(genus2_graph, genus2_params, group_factory) -> None:
    crowded = {**genus2_params, "y": {"l1": "9/10", "l2": "9/10"}}
    with pytest.raises(SchottkyError, match="isometric circles overlap"):
        group_factory(genus2_graph, crowded, ComplexRing(), Settings(wordlen=2))


def test_isometric_circles_surround_the_fixed_points(genus2_complex) -> None:
    circles = {c.letter: c for c in genus2_complex.isometric_circles()}
    assert set(circles) == {1, -1, 2, -2}
    # the circle of gamma_i^-1 encloses alpha_i
    assert abs(circles[-1].center - 0) < circles[-1].radius
    assert abs(circles[1].center - 2) < circles[1].radius


def test_rebased_group_keeps_the_multipliers(lollipop_series) -> None:
    local = lollipop_series.rebased("v1")
    assert local.base == "v1"
    assert local.beta(1) == lollipop_series.beta(1)
    assert lollipop_series.rebased("v0") is lollipop_series


def test_build_rejects_unknown_base(genus2_graph, genus2_params) -> None:
    graph = StableGraph.from_model(GraphFile.model_validate(genus2_graph))
    params = parse_params(graph, ParamsFile.model_validate(genus2_params), ComplexRing())
    with pytest.raises(GraphError, match="unknown vertex"):
        build_group(graph, params, "nowhere", 2)


def _strip(word, lead, trail):
    word = list(word)
    while word and lead and abs(word[0]) == lead:
        word.pop(0)
    while word and abs(word[-1]) == trail:
        word.pop()
    return tuple(word)


@pytest.mark.parametrize("i", [1, 2])
def test_coset_representatives_partition_the_words(genus2_rational, i) -> None:
    words = [w for w, _ in genus2_rational.enumerate_reduced_words(4)]
    reps = [w for w, _ in genus2_rational.coset_reps(i, 4)]
    assert len(reps) == len(set(reps))
    produced = []
    for r in reps:
        for k in range(-4, 5):
            w = r + (i if k > 0 else -i,) * abs(k)
            if len(w) <= 4:
                produced.append(w)
    assert sorted(produced) == sorted(words)
    assert {_strip(w, None, i) for w in words} == set(reps)


@pytest.mark.parametrize("i, j", [(1, 1), (1, 2), (2, 1)])
def test_double_coset_representatives_partition_the_words(genus2_rational, i, j) -> None:
    words = [w for w, _ in genus2_rational.enumerate_reduced_words(4)]
    reps = [w for w, _ in genus2_rational.double_coset_reps(i, j, 4)]
    assert len(reps) == len(set(reps))
    assert {_strip(w, i, j) for w in words} == set(reps)


def test_schottky_check_reports_generators_without_circles(forge, genus1_graph, genus1_params, genus2_graph, genus2_params) -> None:
    # the genus-one generator fixes infinity, so it has no isometric circle
    assert forge.periods(genus1_graph, genus1_params).schottky_check == "partial"
    assert forge.periods(genus2_graph, genus2_params).schottky_check == "complete"
    assert forge.periods(genus2_graph, genus2_params, ring="rational", wordlen=2).schottky_check is None


def test_unchecked_build_leaves_the_status_open(genus2_graph, genus2_params, settings) -> None:
    graph = StableGraph.from_model(GraphFile.model_validate(genus2_graph))
    ring = ComplexRing(settings.tol)
    params = parse_params(graph, ParamsFile.model_validate(genus2_params), ring)
    group = build_group(graph, params, "v0", settings.wordlen, settings, check=False)
    assert group.schottky_check is None
    assert group.check_schottky() == "complete"
