import pytest

from app.models.errors import InputError, KZError
from app.services.mzv import mzv, mzv_direct, parse_indices, stuffle_residual, word_of_indices


def test_single_zeta_values() -> None:
    assert float(mzv([2])) == pytest.approx(1.6449340668482264, abs=1e-15)
    assert float(mzv([3], 40)) == pytest.approx(1.2020569031595942, abs=1e-15)


def test_euler_relation() -> None:
    assert abs(mzv([2, 1]) - mzv([3])) < 1e-9


@pytest.mark.parametrize("a, b", [(2, 3), (2, 2), (3, 4)])
def test_stuffle_relation(a, b) -> None:
    assert stuffle_residual(a, b) < 1e-9


def test_direct_summation_agrees() -> None:
    for indices in ([2], [3, 1], [2, 2]):
        assert abs(mzv(indices, 20) - mzv_direct(indices, 20)) < 1e-12


def test_words_and_parsing() -> None:
    assert word_of_indices([2, 1]) == (0, 1, 1)
    assert parse_indices("3, 1,2") == [3, 1, 2]
    with pytest.raises(InputError):
        parse_indices("2,x")


def test_bad_indices() -> None:
    with pytest.raises(KZError, match="divergent"):
        mzv([1, 2])
    with pytest.raises(InputError):
        mzv([])
    with pytest.raises(InputError):
        mzv([2, 0])
