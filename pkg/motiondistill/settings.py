"""Process-level knobs read from the environment."""

from __future__ import annotations

import os

from pydantic_settings import BaseSettings, SettingsConfigDict

BLAS_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class RuntimeSettings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="MOTIONDISTILL_")

    log_level: str = "INFO"
    progress: bool = True  # tqdm bars on training loops
    # applied before numpy loads; None leaves the BLAS defaults alone
    blas_threads: int | None = 1


def get_settings() -> RuntimeSettings:
    return RuntimeSettings()


def pinned_blas_threads() -> int | None:
    """Thread count every BLAS variable agrees on, or None when unset or inconsistent."""
    values = {os.environ.get(var) for var in BLAS_THREAD_VARS}
    if len(values) != 1:
        return None
    value = values.pop()
    return int(value) if value is not None and value.isdigit() else None
