import logging
import os
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Manages process-level settings loaded from the environment or a .env file.
    Pydantic's BaseSettings provides type validation for configuration variables.
    """
    # Load settings from the .env file in the project's root directory
    model_config = SettingsConfigDict(
        env_prefix="LATENT_RT_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Worker threads for per-subject likelihood terms and oracle reductions
    threads: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)

    # Default integration settings, overridden by a run config or CLI flags
    quad_order: int = Field(default=15, ge=1, le=100)
    mc_samples: int = Field(default=100_000, ge=1_000)

    log_level: str = "INFO"

    # Bearer token is optional; when unset the HTTP API is open
    api_bearer_token: Optional[str] = None


# Create a single, globally accessible instance of the settings
settings = Settings()


LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: Optional[str] = None) -> None:
    """
    Installs one stderr handler on the package logger.

    Args:
        level: Logging level name; falls back to settings.log_level.
    """
    logger = logging.getLogger("latent_rt")
    logger.setLevel((level or settings.log_level).upper())
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)
