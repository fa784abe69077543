import math
from fractions import Fraction

import pytest

from app.models.errors import MoebiusError
from app.services.graph_core import Branch
from app.services.moebius import (
    MoebiusMap,
    ProjectivePoint,
    conjugate,
    cross_ratio,
    derivative_at,
    fixed_points,
    multiplier,
    phi_of_edge,
    word_to_map,
)
from app.services.rings import ComplexRing, RationalRing, SeriesRing

Q = RationalRing()


def _pt(v) -> ProjectivePoint:
    return ProjectivePoint.finite(v, Q)


def test_atom_at_zero_and_infinity_is_a_scaling() -> None:
    m = phi_of_edge(_pt(0), ProjectivePoint.infinity(Q), Fraction(1, 5))
    assert m.apply_value(Fraction(3)) == Fraction(3, 5)
    assert m.projectively_equal(MoebiusMap(Fraction(1, 5), 0, 0, 1), Q)


def test_atom_fixed_points_and_multiplier_over_q() -> None:
    y = Fraction(1, 4)
    m = phi_of_edge(_pt(1), _pt(2), y)
    attractive, repulsive = fixed_points(m, Q)
    assert attractive.affine() == 1
    assert repulsive.affine() == 2
    assert multiplier(m, Q) == y
    assert m.det == y * (1 - 2) ** 2


def test_atom_over_complex_matches_rational() -> None:
    C = ComplexRing(1e-10)
    m = phi_of_edge(ProjectivePoint.finite(1, C), ProjectivePoint.finite(2, C), C.coerce("1/4"))
    attractive, repulsive = fixed_points(m, C)
    assert attractive.as_complex() == pytest.approx(1.0)
    assert repulsive.as_complex() == pytest.approx(2.0)
    assert multiplier(m, C) == pytest.approx(0.25)


def test_series_fixed_points_need_start_points() -> None:
    R = SeriesRing(("e",), 3)
    y = R.variable("e")
    m = phi_of_edge(ProjectivePoint.finite(0, R), ProjectivePoint.finite(1, R), y)
    with pytest.raises(MoebiusError):
        fixed_points(m, R)
    starts = (ProjectivePoint.finite(0, R), ProjectivePoint.finite(1, R))
    attractive, repulsive = fixed_points(m, R, starts=starts)
    assert attractive.affine() == 0
    assert repulsive.affine() == 1
    assert multiplier(m, R, starts=starts) == y


def test_rotation_is_not_loxodromic() -> None:
    c, s = math.cos(0.3), math.sin(0.3)
    with pytest.raises(MoebiusError, match="not loxodromic"):
        fixed_points(MoebiusMap(c, -s, s, c), ComplexRing())


def test_degenerate_parameters_are_rejected() -> None:
    with pytest.raises(MoebiusError, match="degenerate edge parameters"):
        phi_of_edge(_pt(1), _pt(1), Fraction(1, 2))


def test_word_to_map_is_an_anti_homomorphism() -> None:
    e, f = Branch("e", 1), Branch("f", 1)
    atoms = {
        e: phi_of_edge(_pt(0), _pt(1), Fraction(1, 3)),
        f: phi_of_edge(_pt(2), _pt(5), Fraction(1, 7)),
    }
    assert word_to_map([e, f], atoms, Q).projectively_equal(atoms[f] @ atoms[e], Q)
    with pytest.raises(MoebiusError, match="path not reduced"):
        word_to_map([e, -e], {**atoms, -e: atoms[e].inverse()}, Q)
    with pytest.raises(MoebiusError, match="no atom"):
        word_to_map([f, -e], atoms, Q)


def test_cross_ratio_is_conjugation_invariant() -> None:
    points = [_pt(0), ProjectivePoint.infinity(Q), _pt(1), _pt(2)]
    assert cross_ratio(*points) == Fraction(1, 2)
    g = MoebiusMap(Fraction(2), Fraction(1), Fraction(1), Fraction(1))
    moved = [g.apply(p).normalized() for p in points]
    assert cross_ratio(*moved) == Fraction(1, 2)
    with pytest.raises(MoebiusError, match="degenerate cross-ratio"):
        cross_ratio(points[0], points[1], points[2], points[0])


def test_conjugate_moves_fixed_points() -> None:
    m = phi_of_edge(_pt(1), _pt(2), Fraction(1, 4))
    g = MoebiusMap(Fraction(1), Fraction(3), Fraction(0), Fraction(1))
    attractive, repulsive = fixed_points(conjugate(m, g), Q)
    assert attractive.affine() == 4
    assert repulsive.affine() == 5
    assert multiplier(conjugate(m, g), Q) == Fraction(1, 4)


def test_derivative_and_infinity() -> None:
    m = MoebiusMap(Fraction(1), Fraction(0), Fraction(1), Fraction(-2))
    assert derivative_at(m, Fraction(0)) == Fraction(-2, 4)
    with pytest.raises(MoebiusError, match="pole of derivative"):
        derivative_at(m, Fraction(2))
    with pytest.raises(MoebiusError):
        ProjectivePoint.infinity(Q).affine()
