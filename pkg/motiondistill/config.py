from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from motiondistill.errors import ConfigError


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TeacherConfig(_Section):
    """SE-Transformer denoiser; L and J are bound from the data at build time."""

    n_layers: int = Field(2, ge=1)
    d_model: int = Field(32, ge=1)
    n_heads: int = Field(4, ge=1)
    ffn_dim: int = Field(64, ge=1)
    se_reduction: int = Field(4, ge=1)
    L: int | None = Field(None, ge=1)
    J: int | None = Field(None, ge=1)

    @model_validator(mode="after")
    def _heads_divide_width(self) -> TeacherConfig:
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")
        return self

    def bind(self, L: int, J: int) -> TeacherConfig:
        return self.model_copy(update={"L": L, "J": J})


class StudentConfig(_Section):
    """MLP-mixer denoiser without step conditioning."""

    n_layers: int = Field(2, ge=1)
    d_model: int = Field(32, ge=8)
    se_reduction: int = Field(4, ge=1)
    channel_expansion: int = Field(4, ge=1)
    token_expansion: int = Field(2, ge=1)
    L: int | None = Field(None, ge=1)
    J: int | None = Field(None, ge=1)

    def bind(self, L: int, J: int) -> StudentConfig:
        return self.model_copy(update={"L": L, "J": J})


class FrequencySection(_Section):
    L: int | None = Field(None, ge=1)  # None: half the sequence length


class ScheduleSection(_Section):
    steps: int = Field(1000, ge=1)
    kind: str = "cosine"


class SamplerSection(_Section):
    n_steps: int = Field(10, ge=1)
    eta: float = 0.0
    # sampled joint values above this multiple of the data amplitude abort; null disables
    divergence_factor: float | None = Field(10.0, gt=0)

    @model_validator(mode="after")
    def _deterministic_only(self) -> SamplerSection:
        if self.eta != 0.0:
            raise ValueError("only deterministic sampling (eta=0) is supported")
        return self


class TrainRunConfig(_Section):
    epochs: int = Field(100, ge=1)
    samples_per_epoch: int = Field(2000, ge=1)
    batch_size: int = Field(256, ge=1)
    base_lr: float = Field(1e-3, gt=0)
    weight_decay: float = Field(0.01, ge=0)
    warmup_frac: float = Field(0.10, ge=0, le=1)


class DistillRunConfig(TrainRunConfig):
    stage: Literal[1, 2] = 1
    samples_per_epoch: int = Field(50000, ge=1)
    teacher_steps: int | None = Field(None, ge=1)  # None: sampler.n_steps
    val_fraction: float = Field(0.10, gt=0, lt=1)
    divergence_factor: float = Field(10.0, gt=1)
    divergence_patience: int = Field(3, ge=1)


class BayesOptSection(_Section):
    lr_range: tuple[float, float] = (1e-4, 1e-3)
    layer_range: tuple[int, int] = (6, 12)
    dim_range: tuple[int, int] = (256, 768)
    dim_step: int = Field(64, ge=1)
    iterations: int = Field(40, ge=1)
    parallel: int = Field(5, ge=1)
    n_initial: int = Field(5, ge=1)
    candidates: int = Field(1024, ge=1)
    refine_starts: int = Field(8, ge=0)
    gp_restarts: int = Field(5, ge=0)
    trial_epochs: int = Field(20, ge=1)
    trial_samples_per_epoch: int = Field(1000, ge=1)
    validation_size: int = Field(64, ge=1)
    accuracy_samples: int = Field(10, ge=1)
    timing_repeats: int = Field(10, ge=1)
    weights: tuple[float, float, float] = (15.0, 15.0, 1.0)
    reference: Literal["one_step", "multi_step"] = "one_step"

    @model_validator(mode="after")
    def _ordered_ranges(self) -> BayesOptSection:
        for name in ("lr_range", "layer_range", "dim_range"):
            low, high = getattr(self, name)
            if not low < high:
                raise ValueError(f"{name} bounds must be ordered, got {low}, {high}")
        if self.lr_range[0] <= 0:
            raise ValueError("learning-rate bounds must be positive")
        return self


class EvaluationSection(_Section):
    samples: int = Field(10, ge=1)
    tau: float = Field(0.5, gt=0)
    repeats: int = Field(10, ge=1)
    max_items: int | None = Field(None, ge=1)


class ExperimentConfig(_Section):
    seed: int = 0
    frequency: FrequencySection = Field(default_factory=FrequencySection)
    schedule: ScheduleSection = Field(default_factory=ScheduleSection)
    teacher: TeacherConfig = Field(default_factory=TeacherConfig)
    student: StudentConfig = Field(default_factory=StudentConfig)
    sampler: SamplerSection = Field(default_factory=SamplerSection)
    teacher_training: TrainRunConfig = Field(default_factory=TrainRunConfig)
    distill_stage1: DistillRunConfig = Field(default_factory=lambda: DistillRunConfig(stage=1))
    distill_stage2: DistillRunConfig = Field(default_factory=lambda: DistillRunConfig(stage=2))
    bayesopt: BayesOptSection = Field(default_factory=BayesOptSection)
    evaluation: EvaluationSection = Field(default_factory=EvaluationSection)

    @model_validator(mode="before")
    @classmethod
    def _tag_stages(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        for key, stage in (("distill_stage1", 1), ("distill_stage2", 2)):
            section = data.get(key)
            if section is None:
                continue
            if isinstance(section, dict):
                if section.get("stage", stage) != stage:
                    raise ValueError(f"{key} declares stage {section['stage']}")
                data[key] = {**section, "stage": stage}
        return data

    @classmethod
    def load(cls, path: str | Path | None = None) -> ExperimentConfig:
        p = Path(path) if path else Path("config.yaml")
        if not p.exists() and path is None:
            # Fallback for running outside the repository root
            p = Path(__file__).parent.parent / "config.yaml"
        return cls.from_mapping(_read_yaml(p), source=str(p))

    @classmethod
    def from_mapping(cls, raw: dict[str, Any], source: str = "<mapping>") -> ExperimentConfig:
        try:
            return cls.model_validate(raw)
        except ValidationError as exc:
            raise ConfigError(f"invalid experiment config {source}:\n{exc}") from None

    def with_seed(self, seed: int | None) -> ExperimentConfig:
        return self if seed is None else self.model_copy(update={"seed": seed})

    def resolve_L(self, N: int) -> int:
        L = self.frequency.L if self.frequency.L is not None else max(1, N // 2)
        if L > N:
            raise ConfigError(f"frequency.L={L} exceeds sequence length N={N}")
        return L

    def config_hash(self) -> str:
        return canonical_hash(self.model_dump(mode="json"))

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False)


class SyntheticCorpusSpec(_Section):
    """Deterministic multi-modal stand-in for a motion-capture corpus."""

    J: int = Field(4, ge=1)
    H: int = Field(10, ge=1)
    F: int = Field(20, ge=1)
    n_train: int = Field(500, ge=1)
    n_test: int = Field(50, ge=1)
    n_modes: int = Field(3, ge=2)
    n_families: int = Field(4, ge=1)
    band_limit: int = Field(3, ge=1)
    noise_floor: float = Field(1e-3, ge=0)
    amplitude: float = Field(0.1, gt=0)
    frame_dt: float = Field(0.02, gt=0)
    seed: int = 0

    @property
    def N(self) -> int:
        return self.H + self.F

    @classmethod
    def load(cls, path: str | Path) -> SyntheticCorpusSpec:
        p = Path(path)
        try:
            return cls.model_validate(_read_yaml(p))
        except ValidationError as exc:
            raise ConfigError(f"invalid corpus spec {p}:\n{exc}") from None

    def spec_hash(self) -> str:
        return canonical_hash(self.model_dump(mode="json"))


def canonical_hash(payload: Any) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _read_yaml(p: Path) -> dict[str, Any]:
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    with open(p) as f:
        raw = yaml.safe_load(f) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{p}: top level must be a mapping")
    return raw
