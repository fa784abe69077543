import json

import pytest

from app.config import Settings, load_settings
from app.models.errors import InputError


def test_precedence(monkeypatch, tmp_path) -> None:
    monkeypatch.setenv("FORGE_WORDLEN", "5")
    monkeypatch.setenv("FORGE_WEIGHT", "3")
    config = tmp_path / "forge.json"
    config.write_text(json.dumps({"weight": 2, "epsilons": "1e-6,5e-7,2.5e-7"}))
    settings = load_settings(str(config), {"wordlen": 7, "degree": None})
    assert settings.wordlen == 7
    assert settings.weight == 2
    assert settings.degree == Settings().degree
    assert settings.epsilons == (1e-6, 5e-7, 2.5e-7)


def test_invalid_settings(monkeypatch, tmp_path) -> None:
    monkeypatch.setenv("FORGE_KZ_SIGN", "2")
    with pytest.raises(InputError, match="invalid settings"):
        load_settings()
    monkeypatch.delenv("FORGE_KZ_SIGN")
    with pytest.raises(InputError, match="cannot read config file"):
        load_settings(str(tmp_path / "nope.json"))
    (tmp_path / "list.json").write_text("[1, 2]")
    with pytest.raises(InputError, match="JSON object"):
        load_settings(str(tmp_path / "list.json"))


def test_default_epsilons_halve_below_the_extrapolation_tolerance() -> None:
    settings = Settings()
    first, second, third = settings.epsilons
    assert first == second * 2 == third * 4
    assert first < settings.extrapolation_tol
