from fractions import Fraction

import pytest

from app.models.errors import InputError, RingError
from app.services.rings import (
    ComplexRing,
    RationalRing,
    SeriesRing,
    TruncatedSeries,
    as_fraction,
    make_ring,
)

VARS = ("e", "f")


def _x(cutoff: int = 4) -> TruncatedSeries:
    return TruncatedSeries.variable(VARS, cutoff, "e")


def test_geometric_series_inverse() -> None:
    x = _x(4)
    inv = (1 - x).inverse()
    assert inv == sum((x ** k for k in range(5)), TruncatedSeries.constant(VARS, 4, 0))
    assert (1 - x) * inv == 1


def test_products_are_truncated_at_the_cutoff() -> None:
    x = _x(2)
    assert x ** 3 == 0
    assert (x * x).order() == 2
    assert TruncatedSeries(VARS, 2, {(2, 1): 5}).terms == {}


def test_non_units_cannot_be_inverted() -> None:
    with pytest.raises(RingError, match="not a unit"):
        _x().inverse()
    with pytest.raises(RingError):
        _x() / 0


def test_series_from_different_rings_do_not_mix() -> None:
    with pytest.raises(RingError):
        _x(3) + _x(4)


def test_substitute_zero_and_evaluate() -> None:
    e = _x(3)
    f = TruncatedSeries.variable(VARS, 3, "f")
    s = 1 + e + f + e * f
    assert s.substitute_zero(["e"]) == 1 + f
    assert s.evaluate({"e": Fraction(1, 2), "f": Fraction(1, 3)}) == Fraction(2)
    assert s.constant_term() == 1
    assert s.truncate(1) == TruncatedSeries(VARS, 1, {(0, 0): 1, (1, 0): 1, (0, 1): 1})


def test_json_round_trip() -> None:
    s = Fraction(3, 7) * _x() ** 2 - 2
    assert TruncatedSeries.from_json(s.to_json()) == s
    with pytest.raises(InputError):
        TruncatedSeries.from_json({"vars": ["e"], "terms": []})


def test_ring_descriptors() -> None:
    assert RationalRing().coerce("3/4") == Fraction(3, 4)
    c = ComplexRing(1e-8)
    assert c.coerce("1/2") == 0.5
    assert c.coerce([1, 2]) == 1 + 2j
    assert c.close(1.0, 1.0 + 1e-12)
    series = SeriesRing(VARS, 3)
    assert series.order(series.variable("f") * series.variable("e")) == 2
    assert series.is_unit(series.one())
    assert not series.is_unit(series.variable("e"))


def test_bad_values_are_input_errors() -> None:
    with pytest.raises(InputError):
        as_fraction("abc")
    with pytest.raises(InputError):
        as_fraction(True)
    with pytest.raises(InputError):
        ComplexRing().coerce("zz")
    with pytest.raises(InputError, match="unknown ring"):
        make_ring("p-adic")


def _samples(cutoff: int = 4):
    e = TruncatedSeries.variable(VARS, cutoff, "e")
    f = TruncatedSeries.variable(VARS, cutoff, "f")
    return [
        1 + e,
        Fraction(2, 3) - e * f + f ** 2,
        e ** 3 - Fraction(1, 5) * f,
        3 + e + Fraction(7, 2) * e * e * f,
    ]


@pytest.mark.parametrize("i, j, k", [(0, 1, 2), (1, 2, 3), (3, 0, 1), (2, 2, 0)])
def test_series_ring_axioms(i, j, k) -> None:
    s = _samples()
    a, b, c = s[i], s[j], s[k]
    zero = TruncatedSeries.constant(VARS, 4, 0)
    assert a + b == b + a
    assert a * b == b * a
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a + zero == a and a * 1 == a
    assert a - a == zero
    if a.is_unit():
        assert a * a.inverse() == 1


@pytest.mark.parametrize("cutoff", [0, 1, 2, 3])
def test_truncation_commutes_with_the_operations(cutoff) -> None:
    for a in _samples():
        for b in _samples():
            assert (a + b).truncate(cutoff) == a.truncate(cutoff) + b.truncate(cutoff)
            assert (a * b).truncate(cutoff) == a.truncate(cutoff) * b.truncate(cutoff)
        if a.is_unit():
            assert a.inverse().truncate(cutoff) == a.truncate(cutoff).inverse()
