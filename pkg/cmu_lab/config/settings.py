"""Application settings using Pydantic for validation and type safety."""

import os
from functools import lru_cache
from typing import Literal, Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class SimulationSettings(BaseSettings):
    """Simulation engine configuration."""

    slot_cap: int = Field(10**9, gt=0)
    stream_chunk: int = Field(4096, gt=0)
    default_kappa: float = Field(1.0, gt=0)
    trace_dump: bool = False

    model_config = SettingsConfigDict(env_prefix="CMU_LAB_SIM_")


class HarnessSettings(BaseSettings):
    """Replication harness configuration."""

    threads: Optional[int] = Field(None, ge=1)

    model_config = SettingsConfigDict(env_prefix="CMU_LAB_HARNESS_")

    @property
    def worker_count(self) -> int:
        """Number of worker processes, defaulting to machine parallelism."""
        return self.threads or os.cpu_count() or 1


class MonitoringSettings(BaseSettings):
    """Logging configuration."""

    log_level: str = "WARNING"
    log_format: Literal["console", "json"] = "console"

    model_config = SettingsConfigDict(env_prefix="CMU_LAB_MONITORING_")

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if v.upper() not in levels:
            raise ValueError(f"Log level must be one of {levels}")
        return v.upper()


class Settings(BaseSettings):
    """Main application settings."""

    # Sub-configurations
    simulation: SimulationSettings = Field(default_factory=SimulationSettings)
    harness: HarnessSettings = Field(default_factory=HarnessSettings)
    monitoring: MonitoringSettings = Field(default_factory=MonitoringSettings)

    # Environment
    environment: str = "development"
    debug: bool = False

    model_config = SettingsConfigDict(
        env_prefix="CMU_LAB_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    @property
    def is_production(self) -> bool:
        """Check if running in production environment."""
        return (
            self.environment.lower() == "production"
            or self.monitoring.log_format == "json"
        )

    @property
    def log_config(self) -> dict:
        """Get logging configuration."""
        return {
            "version": 1,
            "disable_existing_loggers": False,
            "formatters": {
                "default": {"format": "%(message)s"},
            },
            "handlers": {
                "default": {
                    "level": "DEBUG" if self.debug else self.monitoring.log_level,
                    "class": "logging.StreamHandler",
                    "stream": "ext://sys.stderr",
                    "formatter": "default",
                },
            },
            "loggers": {
                "": {
                    "handlers": ["default"],
                    "level": self.monitoring.log_level,
                    "propagate": False,
                },
                "cmu_lab": {
                    "handlers": ["default"],
                    "level": "DEBUG" if self.debug else self.monitoring.log_level,
                    "propagate": False,
                },
            },
        }


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
