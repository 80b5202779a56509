"""Single-prediction latency measurement."""

from __future__ import annotations

import logging
import statistics
import time
from collections.abc import Callable
from typing import Any

import numpy as np

from motiondistill.models.records import BenchmarkResult
from motiondistill.services.predictors import Predictor
from motiondistill.settings import pinned_blas_threads

logger = logging.getLogger("motiondistill.bench")

RESOLUTION_FRACTION = 0.01


def benchmark_inference(runner: Callable[[], Any], repeats: int = 10, warmup: int = 1) -> BenchmarkResult:
    """Time ``repeats`` calls of ``runner`` after ``warmup`` untimed calls.

    BLAS threading is fixed when numpy loads, so the harness cannot change it
    here; it records the pinned count and warns unless it is 1.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    threads = pinned_blas_threads()
    if threads != 1:
        logger.warning("BLAS threads not pinned to 1 (got %s); set MOTIONDISTILL_BLAS_THREADS=1", threads)
    for _ in range(warmup):
        runner()

    timings: list[float] = []
    for _ in range(repeats):
        start = time.perf_counter()
        runner()
        timings.append(time.perf_counter() - start)

    mean = statistics.fmean(timings)
    resolution = time.get_clock_info("perf_counter").resolution
    if resolution > RESOLUTION_FRACTION * mean:
        logger.warning("Timer resolution %.3g s is coarse relative to the measured %.3g s", resolution, mean)
    result = BenchmarkResult(
        mean_seconds=mean,
        min_seconds=min(timings),
        std_seconds=statistics.stdev(timings) if repeats > 1 else 0.0,
        repeats=repeats,
        timer_resolution=resolution,
        samples=timings,
        blas_threads=threads,
    )
    logger.info("Inference %.4g s mean, %.4g s min over %d runs", result.mean_seconds, result.min_seconds, repeats)
    return result


def predictor_runner(predictor: Predictor, x_obs: np.ndarray, seed: int = 0) -> Callable[[], np.ndarray]:
    """One future from one observation per call; the noise stream restarts each call."""
    x_obs = np.asarray(x_obs, dtype=np.float64)

    def run() -> np.ndarray:
        return predictor.predict_one(x_obs, np.random.default_rng(seed))

    return run


def benchmark_predictor(predictor: Predictor, x_obs: np.ndarray, repeats: int = 10, seed: int = 0) -> BenchmarkResult:
    return benchmark_inference(predictor_runner(predictor, x_obs, seed), repeats=repeats)
