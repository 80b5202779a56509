"""Observation + noise → clean coefficient maps for each kind of trained model."""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod

import numpy as np

from motiondistill.autodiff import Tensor, add, matmul
from motiondistill.motion.frequency import condition, idct, splice_operators
from motiondistill.networks.base import DenoiserModel
from motiondistill.services.diffusion import NoiseSchedule, SamplerPlan, denoise

logger = logging.getLogger("motiondistill.predictors")


class Predictor(ABC):
    """Maps observations ``(B, H, 3J)`` and initial noise ``(B, L, 3J)`` to clean coefficients.

    Outputs always pass a final noise-free splice with the condition, so the
    observed frames are reproduced.
    """

    mode: str

    def __init__(self, model: DenoiserModel, H: int, F: int) -> None:
        self.model = model
        self.H = H
        self.F = F
        self.N = H + F
        self.L = model.config.L
        self.D = 3 * model.config.J

    def condition(self, x_obs: np.ndarray) -> np.ndarray:
        return condition(x_obs, self.N, self.L)

    @abstractmethod
    def coefficients(self, x_obs: np.ndarray, eps: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        ...

    def sample(self, x_obs: np.ndarray, S: int, rng: np.random.Generator) -> np.ndarray:
        """S predicted futures ``(S, F, 3J)`` for one observation ``(H, 3J)``."""
        batch = np.broadcast_to(np.asarray(x_obs, dtype=np.float64), (S, self.H, self.D))
        eps = rng.standard_normal((S, self.L, self.D))
        return idct(self.coefficients(batch, eps, rng), self.N)[:, self.H:]

    def predict_one(self, x_obs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return self.sample(x_obs, 1, rng)[0]


class MultiStepPredictor(Predictor):
    """Step-conditioned denoiser run through the masked DDIM plan."""

    mode = "multi_step"

    def __init__(
        self,
        model: DenoiserModel,
        schedule: NoiseSchedule,
        plan: SamplerPlan,
        H: int,
        F: int,
        value_bound: float | None = None,
    ) -> None:
        super().__init__(model, H, F)
        self.schedule = schedule
        self.plan = plan
        self.value_bound = value_bound

    def coefficients(self, x_obs: np.ndarray, eps: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        if rng is None:
            rng = np.random.default_rng(0)
        return denoise(
            self.model, self.schedule, self.plan, self.condition(x_obs), eps, self.H, self.N, rng, self.value_bound
        )


class OneStepPredictor(Predictor):
    """Single forward pass from pure noise whose output is read as clean coefficients.

    Step-conditioned models are evaluated with the step token pinned at
    ``step`` (the noisiest training level); step-free models take no step.
    """

    def __init__(self, model: DenoiserModel, H: int, F: int, step: int | None = None) -> None:
        super().__init__(model, H, F)
        if model.uses_step and step is None:
            raise ValueError("a step-conditioned model needs a pinned step index")
        self.step = step if model.uses_step else None
        self.mode = "one_step" if model.uses_step else "direct"

    def output(self, c: np.ndarray, eps: np.ndarray) -> Tensor:
        """Differentiable w.r.t. the model parameters when called inside a tape."""
        if self.step is None:
            raw = self.model(Tensor(eps), Tensor(c))
        else:
            raw = self.model(Tensor(eps), Tensor(c), np.full(eps.shape[0], self.step))
        observed, future = splice_operators(self.N, self.L, self.H)
        return add(matmul(future, raw), observed @ c)

    def coefficients(self, x_obs: np.ndarray, eps: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        return self.output(self.condition(x_obs), np.asarray(eps, dtype=np.float64)).data


class DirectPredictor(OneStepPredictor):
    """Step-free student."""

    def __init__(self, model: DenoiserModel, H: int, F: int) -> None:
        super().__init__(model, H, F, step=None)
