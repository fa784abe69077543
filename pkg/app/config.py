# app/config.py

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError, field_validator

from app.models.errors import InputError

logger = logging.getLogger(__name__)


class Settings(BaseModel):
    """Engine-wide knobs. Resolved as flags > config file > environment > defaults."""

    wordlen: int = 6
    degree: int = 6
    weight: int = 4
    tol: float = 1e-8
    threads: int = 1
    loxodromy_margin: float = 0.95
    schottky_margin: float = 1.05
    pole_guard: float = 1e-9
    quad_limit: int = 200
    kz_sign: int = 1
    # Tangential cutoffs for segment transport, far below the
    # 1e-2 scale: the O(eps log eps) remainder left after the log subtraction
    # has to stay under extrapolation_tol.
    epsilons: Tuple[float, float, float] = (1e-8, 5e-9, 2.5e-9)
    extrapolation_tol: float = 1e-6
    mzv_dps: int = 30
    log_level: str = "INFO"

    @field_validator("wordlen", "degree", "weight", "threads", "quad_limit", "mzv_dps")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("must be positive")
        return v

    @field_validator("tol", "pole_guard", "extrapolation_tol")
    @classmethod
    def _positive_float(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("must be positive")
        return v

    @field_validator("loxodromy_margin")
    @classmethod
    def _margin(cls, v: float) -> float:
        if not 0 < v < 1:
            raise ValueError("loxodromy margin must lie in (0, 1)")
        return v

    @field_validator("schottky_margin")
    @classmethod
    def _separation(cls, v: float) -> float:
        if v < 1:
            raise ValueError("schottky margin must be at least 1")
        return v

    @field_validator("kz_sign")
    @classmethod
    def _sign(cls, v: int) -> int:
        if v not in (1, -1):
            raise ValueError("kz_sign must be 1 or -1")
        return v

    @field_validator("epsilons", mode="before")
    @classmethod
    def _epsilons(cls, v: Any) -> Any:
        if isinstance(v, str):
            v = [float(x) for x in v.split(",") if x.strip()]
        return v


ENV_PREFIX = "FORGE_"


def _from_env() -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for name in Settings.model_fields:
        raw = os.getenv(f"{ENV_PREFIX}{name.upper()}")
        if raw is not None and raw != "":
            values[name] = raw
    return values


def load_settings(
    config_path: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> Settings:
    load_dotenv()
    values = _from_env()
    if config_path:
        try:
            data = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"cannot read config file {config_path}: {e}") from e
        if not isinstance(data, dict):
            raise InputError("config file must hold a JSON object")
        values.update(data)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        settings = Settings(**values)
    except ValidationError as e:
        raise InputError(f"invalid settings: {e}") from e
    logger.debug(f"settings resolved: {settings.model_dump()}")
    return settings
