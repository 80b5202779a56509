"""Abstract base class for denoiser networks."""

from __future__ import annotations

import hashlib
import logging
import math
from abc import ABC, abstractmethod
from typing import Any, ClassVar

import numpy as np

from motiondistill.autodiff import Tensor
from motiondistill.errors import ConfigError, ShapeError

logger = logging.getLogger("motiondistill.networks")

ParameterShapes = dict[str, tuple[int, ...]]


def init_array(name: str, shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Initial value chosen from the segment name.

    ``*.weight`` fan-in scaled normal, ``*.gamma`` ones, ``pos_embed`` N(0, 0.02²),
    everything else (biases, ``*.beta``) zeros.
    """
    if name.endswith(".weight"):
        return rng.normal(0.0, 1.0 / math.sqrt(shape[0]), size=shape)
    if name.endswith(".gamma"):
        return np.ones(shape)
    if name == "pos_embed":
        return rng.normal(0.0, 0.02, size=shape)
    return np.zeros(shape)


class DenoiserModel(ABC):
    """Named float64 parameter segments plus a differentiable forward map.

    Subclasses declare their segments through ``parameter_shapes(config)`` so
    the count is a pure function of the config and can be computed without
    allocating a model.
    """

    kind: ClassVar[str]
    uses_step: ClassVar[bool]

    def __init__(
        self,
        config: Any,
        rng: np.random.Generator | None = None,
        state: dict[str, np.ndarray] | None = None,
    ) -> None:
        if config.L is None or config.J is None:
            raise ConfigError(f"{self.kind} config must be bound to (L, J) before building")
        self.config = config
        shapes = self.parameter_shapes(config)
        self.params: dict[str, Tensor] = {}
        if state is None:
            rng = rng if rng is not None else np.random.default_rng(0)
            for name, shape in shapes.items():
                self.params[name] = Tensor(init_array(name, shape, rng), requires_grad=True, name=name)
            logger.info("Built %s denoiser with %d parameters", self.kind, self.parameter_count)
        else:
            for name, shape in shapes.items():
                self.params[name] = Tensor(np.zeros(shape), requires_grad=True, name=name)
            self.load_state_dict(state)

    @classmethod
    @abstractmethod
    def parameter_shapes(cls, config: Any) -> ParameterShapes:
        """Ordered mapping of segment name to shape."""
        ...

    @classmethod
    def count_parameters(cls, config: Any) -> int:
        return sum(math.prod(shape) for shape in cls.parameter_shapes(config).values())

    @abstractmethod
    def forward(self, y_noisy: Any, c: Any, *args: Any) -> Tensor:
        """Map noisy coefficients ``(B, L, 3J)`` (or unbatched ``(L, 3J)``) to an output of the same shape."""
        ...

    def __call__(self, y_noisy: Any, c: Any, *args: Any) -> Tensor:
        return self.forward(y_noisy, c, *args)

    # -- parameter access -------------------------------------------------

    @property
    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(state)
        unexpected = set(state) - set(self.params)
        if missing or unexpected:
            raise ConfigError(
                f"state dict mismatch for {self.kind}: missing={sorted(missing)}, unexpected={sorted(unexpected)}"
            )
        for name, p in self.params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ShapeError("load_state_dict", value.shape, p.shape, detail=name)
            p.data = value.copy()
            p.grad = None

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([p.data.ravel() for p in self.params.values()])

    def load_flat_parameters(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.parameter_count,):
            raise ShapeError("load_flat_parameters", flat.shape, (self.parameter_count,))
        offset = 0
        for p in self.params.values():
            p.data = flat[offset:offset + p.size].reshape(p.shape).copy()
            offset += p.size

    def clone(self) -> DenoiserModel:
        return type(self)(self.config, state=self.state_dict())

    def parameter_hash(self) -> str:
        digest = hashlib.sha256()
        for name, p in self.params.items():
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(p.data).tobytes())
        return digest.hexdigest()

    # -- inference --------------------------------------------------------

    def predict(self, y_noisy: np.ndarray, c: np.ndarray, *args: Any) -> np.ndarray:
        """Forward pass on plain arrays; nothing is recorded."""
        return self.forward(Tensor(y_noisy, copy=False), Tensor(c, copy=False), *args).data

    def _check_inputs(self, y_noisy: Any, c: Any) -> tuple[Tensor, Tensor, bool]:
        """Coerce to batched tensors and check against the bound (L, 3J)."""
        y = y_noisy if isinstance(y_noisy, Tensor) else Tensor(y_noisy, copy=False)
        cond = c if isinstance(c, Tensor) else Tensor(c, copy=False)
        expected = (self.config.L, 3 * self.config.J)
        batched = y.ndim == 3
        if y.ndim == 2:
            y = y.reshape(1, *y.shape)
        if cond.ndim == 2:
            cond = cond.reshape(1, *cond.shape)
        if y.ndim != 3 or y.shape[1:] != expected:
            raise ShapeError(f"{self.kind}.forward", y.shape, expected, detail="noisy coefficients")
        if cond.shape != y.shape:
            raise ShapeError(f"{self.kind}.forward", cond.shape, y.shape, detail="condition")
        return y, cond, batched
