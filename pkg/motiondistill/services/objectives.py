"""Scores of a trained student against its reference model for hyperparameter search.

Case 1 is the output discrepancy alone. Case 2 mixes unitless ratios of
output error, best-of-many accuracy and inference time.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from motiondistill.errors import NumericError, ShapeError
from motiondistill.models.records import ObjectiveComponents
from motiondistill.motion.types import MotionCorpus
from motiondistill.services.benchmark import benchmark_predictor
from motiondistill.services.distillation import DistillBatch, make_batch, teacher_fn
from motiondistill.services.evaluation import sample_errors
from motiondistill.services.predictors import Predictor

logger = logging.getLogger("motiondistill.objectives")

DEFAULT_WEIGHTS = (15.0, 15.0, 1.0)


@dataclass(frozen=True)
class ValidationSet:
    """Observations with one fixed noise stream, shared by every trial of a study."""

    batches: tuple[DistillBatch, ...]
    corpus: MotionCorpus  # items scored for best-of-many accuracy
    seed: int

    @property
    def M(self) -> int:
        return sum(len(b) for b in self.batches)


def make_validation_set(corpus: MotionCorpus, size: int, L: int, seed: int, batch_size: int = 256) -> ValidationSet:
    rng = np.random.default_rng([seed, 2])
    batches = tuple(make_batch(corpus, min(batch_size, size - start), L, rng) for start in range(0, size, batch_size))
    items = np.random.default_rng([seed, 3]).permutation(len(corpus))[: min(size, len(corpus))]
    return ValidationSet(batches=batches, corpus=corpus.subset(np.sort(items)), seed=seed)


def reference_outputs(teacher: Predictor, validation: ValidationSet) -> list[np.ndarray]:
    return [teacher_fn(teacher, b) for b in validation.batches]


def _paired_outputs(
    student: Predictor, teacher: Predictor, validation: ValidationSet, teacher_outputs: Sequence[np.ndarray] | None
) -> tuple[np.ndarray, np.ndarray]:
    if validation.M == 0:
        raise ValueError("validation set is empty")
    targets = list(teacher_outputs) if teacher_outputs is not None else reference_outputs(teacher, validation)
    outputs = [student.coefficients(b.x_obs, b.eps, b.sampler_rng()) for b in validation.batches]
    t, s = np.concatenate(targets), np.concatenate(outputs)
    if t.shape != s.shape:
        raise ShapeError("objective", t.shape, s.shape)
    return t.reshape(len(t), -1), s.reshape(len(s), -1)


def objective_case1(
    student: Predictor,
    teacher: Predictor,
    validation: ValidationSet,
    teacher_outputs: Sequence[np.ndarray] | None = None,
) -> float:
    """Squared L2 distance between outputs, summed per sample and averaged over samples."""
    t, s = _paired_outputs(student, teacher, validation, teacher_outputs)
    return float(np.sum((t - s) ** 2) / len(t))


def relative_change(student_value: float, reference_value: float, what: str) -> float:
    if reference_value == 0:
        raise NumericError(f"reference {what} is zero; ratio undefined", student=student_value)
    return (student_value - reference_value) / reference_value


def best_of_many_ade(predictor: Predictor, corpus: MotionCorpus, S: int, seed: int) -> float:
    """Mean over items of the smallest ADE among S samples; same noise stream for every predictor."""
    rng = np.random.default_rng([seed, 4])
    best = [
        float(sample_errors(predictor.sample(corpus.observations[i], S, rng), corpus.futures[i])[0].min())
        for i in range(len(corpus))
    ]
    return float(np.mean(best))


def combine(components: ObjectiveComponents, weights: Sequence[float] = DEFAULT_WEIGHTS) -> float:
    a, b, c = weights
    return a * components.ratio_err + b * components.ratio_acc + c * components.ratio_inf


def objective_case2(
    student: Predictor,
    teacher: Predictor,
    validation: ValidationSet,
    weights: Sequence[float] = DEFAULT_WEIGHTS,
    samples: int = 10,
    repeats: int = 10,
    teacher_outputs: Sequence[np.ndarray] | None = None,
    reference_acc: float | None = None,
    reference_time: float | None = None,
) -> tuple[float, ObjectiveComponents]:
    """Weighted sum of error, accuracy and latency ratios.

    ``reference_acc`` and ``reference_time`` let a study measure the
    reference once and reuse it across trials.
    """
    # 1. Relative output error per sample
    t, s = _paired_outputs(student, teacher, validation, teacher_outputs)
    t_norm = np.linalg.norm(t, axis=1)
    if (t_norm == 0).any():
        raise NumericError("reference output with zero norm", samples=int((t_norm == 0).sum()))
    ratio_err = float(np.mean(np.linalg.norm(t - s, axis=1) / t_norm))

    # 2. Best-of-many accuracy
    if reference_acc is None:
        reference_acc = best_of_many_ade(teacher, validation.corpus, samples, validation.seed)
    student_acc = best_of_many_ade(student, validation.corpus, samples, validation.seed)

    # 3. Single-prediction latency
    x_obs = validation.corpus.observations[0]
    if reference_time is None:
        reference_time = benchmark_predictor(teacher, x_obs, repeats).mean_seconds
    student_time = benchmark_predictor(student, x_obs, repeats).mean_seconds

    components = ObjectiveComponents(
        ratio_err=ratio_err,
        ratio_acc=relative_change(student_acc, reference_acc, "accuracy"),
        ratio_inf=relative_change(student_time, reference_time, "inference time"),
        student_acc=student_acc,
        reference_acc=reference_acc,
        student_time=student_time,
        reference_time=reference_time,
    )
    g = combine(components, weights)
    logger.debug("case-2 objective %.6g from %s", g, components)
    return g, components
