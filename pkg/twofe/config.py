"""Configuration settings for twofe."""

import os
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables (prefix `TWOFE_`)."""

    model_config = SettingsConfigDict(
        env_prefix="TWOFE_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Parallelism
    threads: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)

    # Logging
    log_level: str = "INFO"

    # Newton solver
    tol_grad: float = 1e-8
    tol_step: float = 1e-10
    max_iter: int = 200
    max_halvings: int = 30
    separation_bound: float = 1e3
    penalty_b: float = 1.0

    # Two-way projection
    projection_tol: float = 1e-12

    # Inference
    confidence_level: float = 0.95

    # Simulation
    default_seed: int = 0
    default_reps: int = 500
    failure_tolerance: float = 0.05
    output_dir: Path = Path("./output")


settings = Settings()
