"""Process settings using Pydantic settings."""

from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Process-level settings loaded from environment variables.

    Environment variables can be set in .env file or system environment.
    Experiment parameters live in ExperimentConfig files, not here.
    """

    # Execution
    BMDS_THREADS: Optional[int] = None  # overrides --threads when set

    # Logging
    BMDS_LOG_LEVEL: str = "INFO"

    # Run ledger file created inside each output directory
    BMDS_LEDGER_NAME: str = "runs.sqlite"

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore"  # Ignore extra env vars
    )


def get_settings() -> Settings:
    """Read settings fresh from the current environment."""
    return Settings()

