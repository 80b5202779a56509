from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

TrialStatus = Literal["pending", "done", "failed"]


class Provenance(BaseModel):
    """Embedded in every artifact so it can be traced to the run that made it."""

    seed: int
    config_hash: str
    command: str | None = None
    created_by: str = "motiondistill"


class EpochRecord(BaseModel):
    stage: str
    epoch: int
    train_loss: float
    val_loss: float | None = None
    lr: float
    wall_seconds: float


class ObjectiveComponents(BaseModel):
    ratio_err: float
    ratio_acc: float
    ratio_inf: float
    student_acc: float | None = None
    reference_acc: float | None = None
    student_time: float | None = None
    reference_time: float | None = None


class TrialRecord(BaseModel):
    trial_id: int
    status: TrialStatus
    lam_raw: dict[str, float]
    lam_encoded: list[float]
    g: float | None = None
    components: ObjectiveComponents | None = None
    seed: int
    wall_seconds: float | None = None
    error: str | None = None
    config_hash: str | None = None


class BenchmarkResult(BaseModel):
    mean_seconds: float
    min_seconds: float
    std_seconds: float
    repeats: int = Field(ge=1)
    timer_resolution: float
    samples: list[float] = Field(default_factory=list)
    blas_threads: int | None = None


class BMW(BaseModel):
    best: float
    median: float
    worst: float


class MetricsRow(BaseModel):
    """One model's line of the results table."""

    model: str
    inference_seconds: float | None = None
    apd: float
    ade: BMW
    fde: BMW
    mmade: BMW
    mmfde: BMW
    n_items: int
    samples: int
    tau: float
