"""Noise schedules, forward noising, teacher training and the inpainting DDIM sampler."""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from tqdm import tqdm

from motiondistill.autodiff import AdamW, OptimizerState, Tape, Tensor, cosine_lr
from motiondistill.config import TrainRunConfig
from motiondistill.errors import ConfigError, NumericError, ShapeError
from motiondistill.models.records import EpochRecord
from motiondistill.motion.frequency import condition, dct, idct, inpaint
from motiondistill.motion.types import MotionCorpus, MotionSequence
from motiondistill.networks.base import DenoiserModel

logger = logging.getLogger("motiondistill.diffusion")

SCHEDULE_KINDS = ("cosine", "linear")
COSINE_OFFSET = 0.008
# floor of the terminal signal level; the ε → y0 conversion divides by √ᾱ
TERMINAL_ALPHA_BAR = 1e-3


@dataclass(frozen=True)
class NoiseSchedule:
    alpha_bar: np.ndarray
    kind: str = "cosine"

    @property
    def K(self) -> int:
        return len(self.alpha_bar)

    def level(self, k: int) -> float:
        """ᾱ_k, with k = −1 denoting the clean level ᾱ = 1."""
        if k == -1:
            return 1.0
        self.check_step(k)
        return float(self.alpha_bar[k])

    def check_step(self, k: np.ndarray | int) -> None:
        k = np.asarray(k)
        if (k < 0).any() or (k >= self.K).any():
            raise ConfigError(f"diffusion step out of range [0, {self.K}): {k.tolist()}")


def make_schedule(K_train: int = 1000, kind: str = "cosine") -> NoiseSchedule:
    if K_train < 1:
        raise ConfigError(f"K_train must be >= 1, got {K_train}")
    if kind == "cosine":
        t = np.arange(K_train + 1) / K_train
        f = np.cos((t + COSINE_OFFSET) / (1 + COSINE_OFFSET) * math.pi / 2) ** 2
        raw = f[1:] / f[0]
    elif kind == "linear":
        scale = 1000.0 / K_train
        raw = np.cumprod(1.0 - np.clip(np.linspace(1e-4 * scale, 0.02 * scale, K_train), 0.0, 0.999))
    else:
        raise ConfigError(f"unknown schedule kind {kind!r}; expected one of {SCHEDULE_KINDS}")
    alpha_bar = TERMINAL_ALPHA_BAR + (1.0 - TERMINAL_ALPHA_BAR) * raw
    alpha_bar.setflags(write=False)
    return NoiseSchedule(alpha_bar, kind)


def noise_to_level(y0: np.ndarray, alpha_bar: np.ndarray | float, eps: np.ndarray) -> np.ndarray:
    """√ᾱ·y0 + √(1−ᾱ)·ε, ᾱ broadcast over the trailing (L, D) axes."""
    y0 = np.asarray(y0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if y0.shape != eps.shape:
        raise ShapeError("q_sample", y0.shape, eps.shape)
    ab = np.asarray(alpha_bar, dtype=np.float64)
    if ab.ndim:
        ab = ab.reshape(ab.shape + (1, 1))
    return np.sqrt(ab) * y0 + np.sqrt(1.0 - ab) * eps


def q_sample(y0: np.ndarray, k: np.ndarray | int, eps: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    schedule.check_step(k)
    return noise_to_level(y0, schedule.alpha_bar[np.asarray(k)], eps)


def ddim_update(y: np.ndarray, eps_hat: np.ndarray, ab_from: float, ab_to: float) -> np.ndarray:
    """Deterministic (η = 0) move from level ᾱ_from to ᾱ_to given a noise estimate."""
    y0_hat = (y - math.sqrt(1.0 - ab_from) * eps_hat) / math.sqrt(ab_from)
    return math.sqrt(ab_to) * y0_hat + math.sqrt(1.0 - ab_to) * eps_hat


@dataclass(frozen=True)
class SamplerPlan:
    steps: tuple[int, ...]
    K_train: int
    eta: float = 0.0

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    def transitions(self) -> list[tuple[int, int]]:
        """(k, k′) pairs in sampling order; the last target is the clean level −1."""
        targets = self.steps[1:] + (-1,)
        return list(zip(self.steps, targets))


def divergence_bound(corpus: MotionCorpus, factor: float | None) -> float | None:
    """Largest joint magnitude a sampler may produce on this corpus; None when the check is off."""
    return None if factor is None else factor * corpus.amplitude


def make_plan(schedule: NoiseSchedule, n_steps: int, eta: float = 0.0) -> SamplerPlan:
    if eta != 0.0:
        raise ConfigError("only deterministic sampling (eta=0) is supported")
    if not 1 <= n_steps <= schedule.K:
        raise ConfigError(f"n_steps must be in [1, {schedule.K}], got {n_steps}")
    steps = tuple(int(k) for k in np.linspace(schedule.K - 1, 0, n_steps).round())
    if any(a <= b for a, b in zip(steps, steps[1:])):
        raise ConfigError(f"plan indices not strictly decreasing: {steps}")
    return SamplerPlan(steps, schedule.K, eta)


def denoise(
    model: DenoiserModel,
    schedule: NoiseSchedule,
    plan: SamplerPlan,
    c: np.ndarray,
    y_init: np.ndarray,
    H: int,
    N: int,
    rng: np.random.Generator,
    value_bound: float | None = None,
) -> np.ndarray:
    """Run the masked DDIM sampler on batched coefficients ``(B, L, 3J)``.

    Each step predicts the noise, moves y to the next plan level, re-noises the
    condition to that same level and splices observed frames from it. The final
    splice uses the clean condition. With ``value_bound`` set, any decoded joint
    value larger in magnitude raises ``NumericError``.
    """
    if plan.K_train != schedule.K:
        raise ConfigError(f"plan built for K={plan.K_train}, schedule has K={schedule.K}")
    y = np.asarray(y_init, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    for k, k_next in plan.transitions():
        eps_hat = model.predict(y, c, np.full(y.shape[0], k))
        ab_next = schedule.level(k_next)
        y_denoised = ddim_update(y, eps_hat, schedule.level(k), ab_next)
        if k_next == -1:
            y_observed = c
        else:
            y_observed = noise_to_level(c, ab_next, rng.standard_normal(c.shape))
        y = inpaint(y_denoised, y_observed, H, N)
    if not np.isfinite(y).all():
        raise NumericError("sampler produced non-finite coefficients", steps=plan.n_steps)
    if value_bound is not None:
        peak = float(np.abs(idct(y, N)).max())
        if peak > value_bound:
            raise NumericError("sampler diverged", steps=plan.n_steps, peak=f"{peak:.4g}", bound=f"{value_bound:.4g}")
    return y


def sample_teacher(
    model: DenoiserModel,
    schedule: NoiseSchedule,
    plan: SamplerPlan,
    x_obs: np.ndarray,
    F: int,
    rng: np.random.Generator,
    value_bound: float | None = None,
) -> MotionSequence:
    """One prediction for a single observation ``(H, 3J)``; ``.future`` holds the forecast."""
    x_obs = np.asarray(x_obs, dtype=np.float64)
    H, N, L = x_obs.shape[0], x_obs.shape[0] + F, model.config.L
    c = condition(x_obs, N, L)[None]
    y = denoise(model, schedule, plan, c, rng.standard_normal(c.shape), H, N, rng, value_bound)
    return MotionSequence(idct(y[0], N), H=H, F=F)


# ---------------------------------------------------------------------------
# Teacher training
# ---------------------------------------------------------------------------


def noise_prediction_loss(model: DenoiserModel, y_noisy: np.ndarray, c: np.ndarray, k: np.ndarray, eps: np.ndarray) -> Tensor:
    diff = model(Tensor(y_noisy), Tensor(c), k) - Tensor(eps)
    return (diff * diff).mean()


def teacher_train_step(
    model: DenoiserModel,
    optimizer: AdamW,
    schedule: NoiseSchedule,
    frames: np.ndarray,
    H: int,
    rng: np.random.Generator,
    lr: float | None = None,
    batch: int | None = None,
) -> float:
    """One noise-prediction update on a batch of full sequences ``(B, N, 3J)``."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 3 or frames.shape[0] == 0:
        raise ShapeError("teacher_train_step", frames.shape, detail="need a nonempty (B, N, 3J) batch")
    N, L = frames.shape[1], model.config.L
    y0 = dct(frames, L)
    c = condition(frames[:, :H], N, L)
    k = rng.integers(0, schedule.K, size=frames.shape[0])
    eps = rng.standard_normal(y0.shape)
    y_noisy = q_sample(y0, k, eps, schedule)

    with Tape() as tape:
        try:
            loss = noise_prediction_loss(model, y_noisy, c, k, eps)
        except NumericError as exc:
            raise NumericError("teacher loss is not finite", batch=batch, steps=k.tolist(), cause=str(exc)) from exc
        tape.backward(loss)
    optimizer.step(lr)
    return loss.item()


def train_teacher(
    model: DenoiserModel,
    corpus: MotionCorpus,
    schedule: NoiseSchedule,
    run: TrainRunConfig,
    rng: np.random.Generator,
    on_epoch: Callable[[EpochRecord], None] | None = None,
    progress: bool = False,
) -> list[EpochRecord]:
    optimizer = AdamW(model.parameters(), OptimizerState(lr=run.base_lr, weight_decay=run.weight_decay))
    n_batches = max(1, math.ceil(run.samples_per_epoch / run.batch_size))
    history: list[EpochRecord] = []
    logger.info(
        "Training teacher: %d epochs x %d batches of %d on %d sequences",
        run.epochs, n_batches, run.batch_size, len(corpus),
    )
    for epoch in tqdm(range(run.epochs), desc="teacher", disable=not progress):
        start = time.perf_counter()
        losses = []
        for b in range(n_batches):
            lr = cosine_lr(epoch + (b + 0.5) / n_batches, run.epochs, run.base_lr, run.warmup_frac)
            idx = rng.integers(0, len(corpus), size=run.batch_size)
            losses.append(teacher_train_step(model, optimizer, schedule, corpus.frames[idx], corpus.H, rng, lr, batch=b))
        record = EpochRecord(
            stage="teacher",
            epoch=epoch,
            train_loss=float(np.mean(losses)),
            lr=lr,
            wall_seconds=time.perf_counter() - start,
        )
        history.append(record)
        if on_epoch is not None:
            on_epoch(record)
        logger.debug("teacher epoch %d loss %.6f lr %.2e", epoch, record.train_loss, lr)
    logger.info("Teacher training finished: final loss %.6f", history[-1].train_loss)
    return history
