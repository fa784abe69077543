import cmath
from fractions import Fraction

import pytest

from app.config import Settings
from app.models.errors import InputError
from app.models.schemas import GraphFile
from app.services.graph_core import StableGraph
from app.services.params import series_ring_for
from app.services.periods import (
    a_cycle_integral,
    default_base_point,
    eta_basis,
    is_symmetric,
    period_matrix,
    period_oracle_residuals,
    vandermonde_check,
    verify_eta_normalisation,
)
from app.services.rings import ComplexRing


def _series_group(graph_data, params_data, settings, group_factory):
    graph = StableGraph.from_model(GraphFile.model_validate(graph_data))
    return group_factory(graph_data, params_data, series_ring_for(graph, settings.degree), settings)


def test_genus_one_period_is_the_multiplier(genus1_graph, genus1_params, settings, group_factory) -> None:
    group = _series_group(genus1_graph, genus1_params, settings, group_factory)
    P = period_matrix(group)
    assert P == [[group.ring.variable("l1")]]
    assert P[0][0].to_json() == {"vars": ["l1"], "cutoff": settings.degree, "terms": [{"exp": [1], "num": "1", "den": "1"}]}


def test_rational_period_matrix_is_symmetric(genus2_rational) -> None:
    P = period_matrix(genus2_rational, 3)
    assert len(P) == 2
    assert is_symmetric(P, genus2_rational.ring)
    # the diagonal carries the multiplier times corrections of higher order
    assert abs(P[0][0] - Fraction(1, 100)) < Fraction(1, 10000)


def test_genus_one_cycles_by_quadrature(genus1_graph, genus1_params, settings, group_factory) -> None:
    group = group_factory(genus1_graph, genus1_params, ComplexRing(), settings)
    assert a_cycle_integral(group, 1, 1) == pytest.approx(2j * cmath.pi, abs=1e-8)
    assert default_base_point(group) == pytest.approx(1 + 0.5j)
    residuals = period_oracle_residuals(group, period_matrix(group))
    assert residuals[0][0] < 1e-8


def test_genus_two_a_cycles(genus2_complex) -> None:
    for i in (1, 2):
        for j in (1, 2):
            expected = 2j * cmath.pi if i == j else 0
            assert abs(a_cycle_integral(genus2_complex, i, j) - expected) < 1e-6


def test_genus_two_oracle(genus2_complex) -> None:
    P = period_matrix(genus2_complex)
    assert is_symmetric(P, genus2_complex.ring)
    assert max(max(row) for row in period_oracle_residuals(genus2_complex, P)) < 1e-4


def test_genus_two_oracle_at_word_length_eight(genus2_graph, genus2_params, group_factory) -> None:
    settings = Settings(wordlen=8, degree=4)
    group = group_factory(genus2_graph, genus2_params, ComplexRing(settings.tol), settings)
    for i in (1, 2):
        for j in (1, 2):
            expected = 2j * cmath.pi if i == j else 0
            assert abs(a_cycle_integral(group, i, j) - expected) < 1e-6
    P = period_matrix(group)
    assert is_symmetric(P, group.ring)
    assert max(max(row) for row in period_oracle_residuals(group, P)) < 1e-6


def test_quadrature_needs_the_complex_ring(genus2_rational) -> None:
    with pytest.raises(InputError, match="complex ring"):
        default_base_point(genus2_rational)


def test_vandermonde_identity(genus2_graph, genus2_params, settings, group_factory) -> None:
    group = _series_group(genus2_graph, genus2_params, settings, group_factory)
    direct, formula = vandermonde_check(group, "t1")
    assert direct == formula
    assert direct != 0


def test_eta_basis_is_normalised(genus2_complex) -> None:
    C, det, M = eta_basis(genus2_complex, "t1")
    assert abs(det) > 0
    assert len(C) == len(M) == 2
    assert verify_eta_normalisation(genus2_complex, "t1", C) < 1e-5


def test_eta_conventions(genus2_complex) -> None:
    with pytest.raises(InputError, match="unknown eta convention"):
        eta_basis(genus2_complex, "t1", "sideways")
    C, _, _ = eta_basis(genus2_complex, "t1", "b_path")
    assert verify_eta_normalisation(genus2_complex, "t1", C) < 1e-8


def test_gauss_manin_a_periods_stay_constant(forge, genus2_graph, genus2_params) -> None:
    report = forge.gauss_manin(genus2_graph, genus2_params, {"y:l1": 1})
    assert report.step == 1e-4
    assert report.omega_a_residual < 1e-5
    assert report.eta_a_residual < 1e-5
    assert report.connection_residual < 1e-3


def test_gauss_manin_needs_a_known_direction(forge, genus2_graph, genus2_params) -> None:
    with pytest.raises(InputError, match="unknown edge"):
        forge.gauss_manin(genus2_graph, genus2_params, {"y:l9": 1})
