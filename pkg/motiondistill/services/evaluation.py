"""Diversity and accuracy metrics over sets of sampled futures.

Errors are Euclidean distances between per-frame pose vectors (3J
coordinates). Sample sets are aggregated as best, lower-median and worst of
many; the multimodal variants score each sample against every future whose
observation ends close to the test observation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy.spatial.distance import cdist, pdist

from motiondistill.errors import ShapeError
from motiondistill.models.records import BMW, MetricsRow
from motiondistill.motion.types import MotionCorpus

logger = logging.getLogger("motiondistill.eval")

APD_NORMALIZATION = "mean over unordered sample pairs"


class Sampler(Protocol):
    def sample(self, x_obs: np.ndarray, S: int, rng: np.random.Generator) -> np.ndarray: ...


@dataclass(frozen=True)
class PredictionSet:
    samples: np.ndarray  # (S, F, 3J)
    gt: np.ndarray  # (F, 3J)
    obs: np.ndarray  # (H, 3J)

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 3 or samples.shape[0] < 1:
            raise ShapeError("PredictionSet", samples.shape, detail="samples must be (S>=1, F, 3J)")
        if samples.shape[1:] != np.shape(self.gt):
            raise ShapeError("PredictionSet", samples.shape[1:], np.shape(self.gt))
        if np.shape(self.obs)[-1] != samples.shape[-1]:
            raise ShapeError("PredictionSet", np.shape(self.obs), samples.shape[1:], detail="pose width")

    @property
    def S(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class MultimodalGT:
    """For each test item, indices of corpus futures that count as plausible."""

    futures: np.ndarray  # (n, F, 3J)
    members: tuple[np.ndarray, ...]

    def for_item(self, i: int) -> np.ndarray:
        return self.futures[self.members[i]]


def apd(samples: np.ndarray) -> float:
    samples = np.asarray(samples, dtype=np.float64)
    S = samples.shape[0]
    if S < 2:
        logger.warning("APD with a single sample is defined as 0")
        return 0.0
    return float(pdist(samples.reshape(S, -1)).mean())


def _frame_distances(sample: np.ndarray, gt: np.ndarray) -> np.ndarray:
    sample, gt = np.asarray(sample, dtype=np.float64), np.asarray(gt, dtype=np.float64)
    if sample.shape[-2:] != gt.shape[-2:]:
        raise ShapeError("displacement", sample.shape, gt.shape)
    return np.linalg.norm(sample - gt, axis=-1)


def ade(sample: np.ndarray, gt: np.ndarray) -> float:
    return float(_frame_distances(sample, gt).mean())


def fde(sample: np.ndarray, gt: np.ndarray) -> float:
    return float(_frame_distances(sample, gt)[-1])


def aggregate_bmw(errors: np.ndarray) -> BMW:
    ordered = np.sort(np.asarray(errors, dtype=np.float64).reshape(-1))
    if ordered.size == 0:
        raise ValueError("need at least one per-sample error")
    return BMW(best=float(ordered[0]), median=float(ordered[(ordered.size - 1) // 2]), worst=float(ordered[-1]))


def sample_errors(samples: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample ADE and FDE, each of shape (S,)."""
    d = _frame_distances(samples, gt)
    return d.mean(axis=-1), d[..., -1]


def mm_metrics(samples: np.ndarray, futures: np.ndarray) -> tuple[BMW, BMW]:
    """Multimodal ADE/FDE: each sample scored against its closest plausible future."""
    futures = np.asarray(futures, dtype=np.float64)
    if futures.ndim != 3 or futures.shape[0] == 0:
        raise ValueError("multimodal ground-truth set must be non-empty")
    # (S, M, F)
    d = _frame_distances(np.asarray(samples)[:, None], futures[None])
    return aggregate_bmw(d.mean(axis=-1).min(axis=1)), aggregate_bmw(d[..., -1].min(axis=1))


def build_multimodal_gt(corpus: MotionCorpus, tau: float) -> MultimodalGT:
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    last = corpus.observations[:, -1]
    within = cdist(last, last) <= tau
    members = tuple(np.flatnonzero(row) for row in within)
    sizes = np.array([len(m) for m in members])
    logger.info("Multimodal sets at tau=%.3g: mean size %.2f, max %d", tau, sizes.mean(), sizes.max())
    return MultimodalGT(futures=corpus.futures, members=members)


def evaluate_corpus(
    sampler: Sampler,
    corpus: MotionCorpus,
    samples: int,
    tau: float,
    rng: np.random.Generator,
    model: str = "model",
    max_items: int | None = None,
    inference_seconds: float | None = None,
) -> MetricsRow:
    """All metrics, averaged over test items, for ``samples`` predictions per item."""
    mm_gt = build_multimodal_gt(corpus, tau)
    n = len(corpus) if max_items is None else min(max_items, len(corpus))
    rows = {key: [] for key in ("apd", "ade", "fde", "mmade", "mmfde")}

    for i in range(n):
        pred = PredictionSet(
            samples=sampler.sample(corpus.observations[i], samples, rng),
            gt=corpus.futures[i],
            obs=corpus.observations[i],
        )
        ade_s, fde_s = sample_errors(pred.samples, pred.gt)
        mmade, mmfde = mm_metrics(pred.samples, mm_gt.for_item(i))
        rows["apd"].append(apd(pred.samples) if pred.S > 1 else 0.0)
        rows["ade"].append(aggregate_bmw(ade_s))
        rows["fde"].append(aggregate_bmw(fde_s))
        rows["mmade"].append(mmade)
        rows["mmfde"].append(mmfde)

    def mean_bmw(values: list[BMW]) -> BMW:
        return BMW(
            best=float(np.mean([v.best for v in values])),
            median=float(np.mean([v.median for v in values])),
            worst=float(np.mean([v.worst for v in values])),
        )

    if samples == 1:
        logger.warning("APD with a single sample is defined as 0")
    result = MetricsRow(
        model=model,
        inference_seconds=inference_seconds,
        apd=float(np.mean(rows["apd"])),
        ade=mean_bmw(rows["ade"]),
        fde=mean_bmw(rows["fde"]),
        mmade=mean_bmw(rows["mmade"]),
        mmfde=mean_bmw(rows["mmfde"]),
        n_items=n,
        samples=samples,
        tau=tau,
    )
    logger.info("%s: ADE-B %.4f FDE-B %.4f APD %.4f over %d items", model, result.ade.best, result.fde.best, result.apd, n)
    return result
