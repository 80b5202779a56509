"""AdamW with decoupled weight decay, and the warmup + cosine learning-rate schedule."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from motiondistill.autodiff.tensor import Tensor
from motiondistill.errors import ConfigError, NumericError, ShapeError

logger = logging.getLogger("motiondistill.autodiff.optim")


@dataclass
class OptimizerState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def hyperparameters(self) -> dict[str, float]:
        return {
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "weight_decay": self.weight_decay,
        }


def adamw_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: OptimizerState,
) -> list[np.ndarray]:
    """One AdamW update; returns new parameter arrays and advances ``state``.

    θ ← θ − lr·wd·θ − lr·m̂/(√v̂ + ε), with bias-corrected moments.
    """
    if state.lr <= 0:
        raise ConfigError(f"learning rate must be positive, got {state.lr}")
    if len(params) != len(grads):
        raise ShapeError("adamw_step", (len(params),), (len(grads),), detail="parameter/gradient count")
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeError("adamw_step", p.shape, g.shape, detail=f"parameter {i}")
        if not np.isfinite(g).all():
            raise NumericError("non-finite gradient", parameter_index=i)
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
        logger.debug(
            "AdamW moments allocated for %d tensors (%d values), lr %.3g, weight decay %.3g",
            len(params), sum(p.size for p in params), state.lr, state.weight_decay,
        )

    state.step += 1
    t = state.step
    bias1 = 1.0 - state.beta1**t
    bias2 = 1.0 - state.beta2**t
    updated = []
    for i, (p, g) in enumerate(zip(params, grads)):
        m = state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        v = state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        m_hat = m / bias1
        v_hat = v / bias2
        updated.append(
            p - state.lr * state.weight_decay * p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        )
    return updated


class AdamW:
    """Optimizer bound to a fixed, ordered list of parameter tensors."""

    def __init__(self, params: Sequence[Tensor], state: OptimizerState | None = None) -> None:
        self.params = list(params)
        self.state = state or OptimizerState()

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self, lr: float | None = None) -> None:
        if lr is not None:
            self.state.lr = lr
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        new_values = adamw_step([p.data for p in self.params], grads, self.state)
        for p, value in zip(self.params, new_values):
            p.data = value
        self.zero_grad()


def cosine_lr(epoch: float, total_epochs: int, base_lr: float, warmup_frac: float = 0.10) -> float:
    """Linear warmup from 0 over ``warmup_frac`` of training, then cosine decay to 0.

    ``epoch`` may be fractional so the schedule can advance per batch.
    """
    if total_epochs <= 0:
        raise ConfigError(f"total_epochs must be positive, got {total_epochs}")
    if not 0 <= epoch < total_epochs:
        raise ConfigError(f"epoch {epoch} outside [0, {total_epochs})")
    warmup = warmup_frac * total_epochs
    if epoch < warmup:
        return base_lr * epoch / warmup
    progress = (epoch - warmup) / (total_epochs - warmup)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))
