from fractions import Fraction

import pytest

from app.models.errors import InputError
from app.services.invariants import (
    InvariantComparer,
    conjugation_invariant_report,
    fixed_point_quadratic,
    window_condition,
)
from app.services.moebius import MoebiusMap, ProjectivePoint, conjugate
from app.services.rings import ComplexRing, RationalRing


def test_conjugated_group_has_the_same_invariants(forge, genus2_graph, genus2_params) -> None:
    report = forge.invariants(genus2_graph, genus2_params, ring="rational", conjugator=["2", "1", "1", "1"])
    assert report.passed
    assert report.compared > 0
    assert report.discrepancies == []
    kinds = {e.kind for e in report.entries}
    assert {"multiplier", "fixed_point", "cross_ratio"} <= kinds


def test_report_flags_a_different_group(genus2_graph, genus2_params, settings, group_factory) -> None:
    first = group_factory(genus2_graph, genus2_params, RationalRing(), settings)
    other = group_factory(genus2_graph, {**genus2_params, "y": {"l1": "1/50", "l2": "1/120"}}, RationalRing(), settings)
    result = conjugation_invariant_report(first, other)
    assert not result["passed"]
    assert any(c.kind == "multiplier" and c.item == "g1" for c in result["discrepancies"])


def test_conjugator_fixed_points_are_checked(genus2_rational) -> None:
    g = MoebiusMap(Fraction(2), Fraction(1), Fraction(1), Fraction(1))
    result = conjugation_invariant_report(genus2_rational, genus2_rational.conjugated(g), g)
    fixed = [c for c in result["entries"] if c.kind == "fixed_point"]
    assert fixed and all(c.agrees for c in fixed)


def test_groups_must_share_a_ring(genus2_rational, genus2_complex) -> None:
    with pytest.raises(InputError, match="same ring"):
        InvariantComparer(genus2_rational, genus2_complex)


def test_invariant_request_errors(forge, genus2_graph, genus2_params) -> None:
    with pytest.raises(InputError, match="series ring"):
        forge.invariants(genus2_graph, genus2_params, ring="rational", split="v0:l1:-l1")
    with pytest.raises(InputError, match="four entries"):
        forge.invariants(genus2_graph, genus2_params, ring="rational", conjugator=["1", "0", "0"])
    with pytest.raises(InputError, match="either a conjugator or a split"):
        forge.invariants(genus2_graph, genus2_params, ring="rational")


def test_complex_invariants_agree_within_tolerance(forge, genus2_graph, genus2_params) -> None:
    report = forge.invariants(genus2_graph, genus2_params, ring="complex", conjugator=["1", "3", "0", "1"])
    assert report.passed
    assert any(e.kind == "fixed_point" for e in report.entries)


def test_rational_comparison_skips_no_word(forge, genus2_graph, genus2_params) -> None:
    report = forge.invariants(genus2_graph, genus2_params, ring="rational", conjugator=["2", "1", "1", "1"])
    assert report.passed
    assert report.skipped == 0
    quadratics = [e for e in report.entries if e.kind == "fixed_point_quadratic"]
    assert quadratics and all(e.agrees for e in quadratics)


def test_fixed_point_quadratic_moves_with_the_conjugator() -> None:
    one, zero = Fraction(1), Fraction(0)
    golden = MoebiusMap(one, one, one, zero)
    assert fixed_point_quadratic(golden) == (1, -1, -1)
    shift = MoebiusMap(one, one, zero, one)
    # roots (1 +- sqrt 5)/2 shifted by one solve z^2 - 3z + 1 = 0
    assert fixed_point_quadratic(conjugate(golden, shift)) == (1, -3, 1)


def test_window_condition_grows_with_close_points() -> None:
    ring = ComplexRing()
    spread = [ProjectivePoint.finite(z, ring) for z in (0, 1, 2, 3)]
    assert window_condition(spread) == pytest.approx(3 * (1 / 2 + 1 / 2 + 1 / 3 + 1))
    close = [ProjectivePoint.finite(z, ring) for z in (0, 1, 1e-3, 3)]
    assert window_condition(close) > 1000
    with_infinity = [spread[0], spread[1], ProjectivePoint.infinity(ring), spread[3]]
    assert window_condition(with_infinity) == pytest.approx(3 * (1 / 2 + 1 / 3))


def test_complex_tolerance_scales_with_the_window(genus2_complex) -> None:
    cmp = InvariantComparer(genus2_complex, genus2_complex)
    assert not cmp.agree(395.77976973, 395.77977779)
    assert cmp.agree(395.77976973, 395.77977779, condition=10.0)
