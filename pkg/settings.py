"""Environment settings for the matrix concentration lab."""

import os
from functools import lru_cache
from pathlib import Path
from typing import Literal

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from errors import ConfigError

load_dotenv()

_DEFAULT_PRESETS_DIR = Path(__file__).resolve().parent / "presets"


class LabSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    enumeration_cap: int = Field(default=100_000, ge=1)
    semigroup_max_factors: int = Field(default=20, ge=1, le=30)
    psd_tol: float = Field(default=1e-9, ge=0.0)
    eig_method: Literal["jacobi", "lapack"] = "jacobi"
    jacobi_max_sweeps: int = Field(default=30, ge=1)
    jacobi_rtol: float = Field(default=1e-13, gt=0.0)
    log_level: str = "WARNING"
    record_timing: bool = True
    presets_dir: Path = _DEFAULT_PRESETS_DIR

    @field_validator("log_level", mode="before")
    @classmethod
    def normalize_level(cls, v):
        level = str(v).upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"unknown log level {v!r}")
        return level


_ENV_FIELDS = {
    "MCLAB_ENUMERATION_CAP": "enumeration_cap",
    "MCLAB_SEMIGROUP_MAX_FACTORS": "semigroup_max_factors",
    "MCLAB_PSD_TOL": "psd_tol",
    "MCLAB_EIG_METHOD": "eig_method",
    "MCLAB_JACOBI_MAX_SWEEPS": "jacobi_max_sweeps",
    "MCLAB_JACOBI_RTOL": "jacobi_rtol",
    "MCLAB_LOG_LEVEL": "log_level",
    "MCLAB_RECORD_TIMING": "record_timing",
    "MCLAB_PRESETS_DIR": "presets_dir",
}


def load_settings() -> LabSettings:
    """Read MCLAB_* variables from the environment (and .env) into settings."""
    raw = {field: os.getenv(var) for var, field in _ENV_FIELDS.items()}
    try:
        return LabSettings(**{k: v for k, v in raw.items() if v not in (None, "")})
    except ValidationError as e:
        raise ConfigError(f"Invalid MCLAB_* environment settings: {e}") from e


@lru_cache(maxsize=1)
def get_settings() -> LabSettings:
    return load_settings()
