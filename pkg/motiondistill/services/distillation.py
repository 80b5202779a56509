"""Two-stage distillation: multi-step teacher → one-step copy → step-free MLP student."""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from tqdm import tqdm

from motiondistill.autodiff import AdamW, OptimizerState, Tape, Tensor, as_tensor, cosine_lr
from motiondistill.config import DistillRunConfig, StudentConfig
from motiondistill.errors import DivergenceError, FrozenParameterError, NumericError, ShapeError
from motiondistill.models.records import EpochRecord
from motiondistill.motion.types import MotionCorpus
from motiondistill.networks.base import DenoiserModel
from motiondistill.networks.registry import build_model
from motiondistill.services.diffusion import NoiseSchedule, SamplerPlan
from motiondistill.services.predictors import DirectPredictor, MultiStepPredictor, OneStepPredictor, Predictor

logger = logging.getLogger("motiondistill.distill")

EpochCallback = Callable[[EpochRecord], None]


@dataclass(frozen=True)
class DistillBatch:
    """Observations ``(B, H, 3J)`` with their initial noises ``(B, L, 3J)``.

    ``seed`` regenerates ``eps`` and also seeds the observation re-noising of a
    multi-step teacher, so the teacher map is a function of the batch.
    """

    x_obs: np.ndarray
    eps: np.ndarray
    seed: int

    def __len__(self) -> int:
        return self.x_obs.shape[0]

    def sampler_rng(self) -> np.random.Generator:
        return np.random.default_rng([self.seed, 1])


def make_batch(corpus: MotionCorpus, size: int, L: int, rng: np.random.Generator) -> DistillBatch:
    seed = int(rng.integers(0, 2**32))
    local = np.random.default_rng(seed)
    idx = local.integers(0, len(corpus), size=size)
    eps = local.standard_normal((size, L, 3 * corpus.J))
    return DistillBatch(corpus.observations[idx], eps, seed)


def teacher_fn(teacher: Predictor, batch: DistillBatch) -> np.ndarray:
    return teacher.coefficients(batch.x_obs, batch.eps, batch.sampler_rng())


def student_fn(student: OneStepPredictor, batch: DistillBatch) -> Tensor:
    return student.output(student.condition(batch.x_obs), batch.eps)


def distill_loss(teacher_out: np.ndarray | Tensor, student_out: np.ndarray | Tensor) -> Tensor:
    """Mean over batch and elements of the squared difference."""
    t, s = as_tensor(teacher_out), as_tensor(student_out)
    if t.shape != s.shape:
        raise ShapeError("distill_loss", t.shape, s.shape)
    diff = s - t
    return (diff * diff).mean()


@dataclass
class DistillResult:
    model: DenoiserModel
    predictor: OneStepPredictor
    history: list[EpochRecord] = field(default_factory=list)
    initial_val_loss: float = math.nan
    best_epoch: int = -1
    best_val_loss: float = math.inf
    teacher_hash: str = ""


def run_stage1(
    teacher: DenoiserModel,
    schedule: NoiseSchedule,
    plan: SamplerPlan,
    corpus: MotionCorpus,
    run: DistillRunConfig,
    rng: np.random.Generator,
    on_epoch: EpochCallback | None = None,
    progress: bool = False,
    value_bound: float | None = None,
) -> DistillResult:
    """Distill the sampler into a copy of the teacher evaluated once at the noisiest step.

    ``value_bound`` turns on the divergence check of the multi-step reference.
    """
    reference = MultiStepPredictor(teacher, schedule, plan, corpus.H, corpus.F, value_bound)
    student = teacher.clone()
    student_pred = OneStepPredictor(student, corpus.H, corpus.F, step=schedule.K - 1)
    logger.info("Stage 1: %d-step teacher → one-step copy (%d parameters)", plan.n_steps, student.parameter_count)
    return _distill("stage1", reference, student_pred, corpus, run, rng, on_epoch, progress)


def run_stage2(
    one_step: DenoiserModel,
    student_config: StudentConfig,
    schedule: NoiseSchedule,
    corpus: MotionCorpus,
    run: DistillRunConfig,
    rng: np.random.Generator,
    on_epoch: EpochCallback | None = None,
    progress: bool = False,
) -> DistillResult:
    """Distill the one-step model into a randomly initialised mixer student."""
    reference = OneStepPredictor(one_step, corpus.H, corpus.F, step=schedule.K - 1)
    student = build_model("mixer", student_config.bind(one_step.config.L, corpus.J), rng)
    student_pred = DirectPredictor(student, corpus.H, corpus.F)
    logger.info("Stage 2: one-step model → mixer student (%d parameters)", student.parameter_count)
    return _distill("stage2", reference, student_pred, corpus, run, rng, on_epoch, progress)


def _distill(
    stage: str,
    teacher: Predictor,
    student: OneStepPredictor,
    corpus: MotionCorpus,
    run: DistillRunConfig,
    rng: np.random.Generator,
    on_epoch: EpochCallback | None,
    progress: bool,
) -> DistillResult:
    teacher_hash = teacher.model.parameter_hash()
    L = student.L

    # 1. Fixed validation pairs, teacher outputs computed once
    n_val = max(1, round(run.val_fraction * run.samples_per_epoch))
    val_batches = [
        make_batch(corpus, min(run.batch_size, n_val - start), L, rng)
        for start in range(0, n_val, run.batch_size)
    ]
    val_targets = [teacher_fn(teacher, b) for b in val_batches]

    def validate() -> float:
        total = sum(
            float(np.sum((student.coefficients(b.x_obs, b.eps) - t) ** 2)) for b, t in zip(val_batches, val_targets)
        )
        return total / sum(t.size for t in val_targets)

    result = DistillResult(model=student.model, predictor=student, teacher_hash=teacher_hash)
    result.initial_val_loss = validate()
    result.best_val_loss = result.initial_val_loss
    best_state = student.model.state_dict()
    logger.info("%s initial validation loss %.6g", stage, result.initial_val_loss)

    # 2. Epoch loop on fresh batches
    optimizer = AdamW(student.model.parameters(), OptimizerState(lr=run.base_lr, weight_decay=run.weight_decay))
    n_batches = max(1, math.ceil(run.samples_per_epoch / run.batch_size))
    over_limit = 0
    for epoch in tqdm(range(run.epochs), desc=stage, disable=not progress):
        start = time.perf_counter()
        losses = []
        for b in range(n_batches):
            lr = cosine_lr(epoch + (b + 0.5) / n_batches, run.epochs, run.base_lr, run.warmup_frac)
            batch = make_batch(corpus, run.batch_size, L, rng)
            target = teacher_fn(teacher, batch)
            with Tape() as tape:
                try:
                    loss = distill_loss(target, student_fn(student, batch))
                except NumericError as exc:
                    raise NumericError(f"{stage} loss is not finite", epoch=epoch, batch=b, cause=str(exc)) from exc
                tape.backward(loss)
            optimizer.step(lr)
            losses.append(loss.item())

        val_loss = validate()
        record = EpochRecord(
            stage=stage,
            epoch=epoch,
            train_loss=float(np.mean(losses)),
            val_loss=val_loss,
            lr=lr,
            wall_seconds=time.perf_counter() - start,
        )
        result.history.append(record)
        if on_epoch is not None:
            on_epoch(record)
        logger.debug("%s epoch %d train %.6g val %.6g", stage, epoch, record.train_loss, val_loss)

        current_hash = teacher.model.parameter_hash()
        if current_hash != teacher_hash:
            raise FrozenParameterError(stage, teacher_hash, current_hash, epoch)

        if val_loss < result.best_val_loss:
            result.best_val_loss, result.best_epoch = val_loss, epoch
            best_state = student.model.state_dict()

        # 3. Divergence guard
        over_limit = over_limit + 1 if val_loss > run.divergence_factor * result.initial_val_loss else 0
        if over_limit >= run.divergence_patience:
            raise DivergenceError(
                f"{stage} validation loss above {run.divergence_factor}x initial for {over_limit} epochs",
                [r.model_dump() for r in result.history],
            )

    student.model.load_state_dict(best_state)
    logger.info(
        "%s finished: best validation loss %.6g at epoch %d (initial %.6g)",
        stage, result.best_val_loss, result.best_epoch, result.initial_val_loss,
    )
    return result

