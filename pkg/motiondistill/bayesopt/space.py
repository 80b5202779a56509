"""Box-bounded search spaces and their [0, 1]^d encoding."""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass

import numpy as np

from motiondistill.config import BayesOptSection
from motiondistill.errors import ConfigError


@dataclass(frozen=True)
class ContinuousDimension:
    name: str
    low: float
    high: float
    log: bool = False

    def __post_init__(self) -> None:
        if not self.low < self.high:
            raise ConfigError(f"{self.name}: bounds must be ordered, got [{self.low}, {self.high}]")
        if self.log and self.low <= 0:
            raise ConfigError(f"{self.name}: log-scaled bounds must be positive")

    is_integer = False

    def encode(self, value: float) -> float:
        if self.log:
            return (math.log(value) - math.log(self.low)) / (math.log(self.high) - math.log(self.low))
        return (value - self.low) / (self.high - self.low)

    def decode(self, u: float) -> float:
        u = min(max(float(u), 0.0), 1.0)
        if self.log:
            return math.exp(math.log(self.low) + u * (math.log(self.high) - math.log(self.low)))
        return self.low + u * (self.high - self.low)

    def snap(self, u: float) -> float:
        return min(max(float(u), 0.0), 1.0)


@dataclass(frozen=True)
class IntegerDimension:
    name: str
    low: int
    high: int
    step: int = 1

    def __post_init__(self) -> None:
        if not self.low < self.high:
            raise ConfigError(f"{self.name}: bounds must be ordered, got [{self.low}, {self.high}]")
        if self.step < 1:
            raise ConfigError(f"{self.name}: step must be >= 1")

    is_integer = True

    @property
    def n_levels(self) -> int:
        return (self.high - self.low) // self.step + 1

    def levels(self) -> np.ndarray:
        return self.low + self.step * np.arange(self.n_levels)

    def encode(self, value: float) -> float:
        return (value - self.low) / (self.high - self.low)

    def decode(self, u: float) -> int:
        u = min(max(float(u), 0.0), 1.0)
        index = round(u * (self.high - self.low) / self.step)
        return int(self.low + min(index, self.n_levels - 1) * self.step)

    def snap(self, u: float) -> float:
        return self.encode(self.decode(u))

    def encoded_levels(self) -> np.ndarray:
        return (self.levels() - self.low) / (self.high - self.low)


Dimension = ContinuousDimension | IntegerDimension


class SearchSpace:
    def __init__(self, dimensions: Sequence[Dimension]) -> None:
        if not dimensions:
            raise ConfigError("search space needs at least one dimension")
        self.dimensions = tuple(dimensions)

    def __len__(self) -> int:
        return len(self.dimensions)

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dimensions]

    @property
    def all_integer(self) -> bool:
        return all(d.is_integer for d in self.dimensions)

    def encode(self, raw: dict[str, float]) -> np.ndarray:
        return np.array([d.encode(raw[d.name]) for d in self.dimensions])

    def decode(self, u: Sequence[float]) -> dict[str, float]:
        return {d.name: d.decode(v) for d, v in zip(self.dimensions, u)}

    def snap(self, u: Sequence[float]) -> np.ndarray:
        return np.array([d.snap(v) for d, v in zip(self.dimensions, u)])

    def integer_neighbours(self, u: np.ndarray) -> Iterator[np.ndarray]:
        """Grid points sharing u's continuous coordinates, nearest first."""
        int_axes = [i for i, d in enumerate(self.dimensions) if d.is_integer]
        grids = [self.dimensions[i].encoded_levels() for i in int_axes]
        points = []
        for combo in itertools.product(*grids):
            p = np.array(u, dtype=np.float64)
            p[int_axes] = combo
            points.append(p)
        points.sort(key=lambda p: float(np.sum((p - u) ** 2)))
        yield from points

    @classmethod
    def from_config(cls, section: BayesOptSection) -> SearchSpace:
        return cls(
            [
                ContinuousDimension("lr", *section.lr_range, log=True),
                IntegerDimension("n_layers", *section.layer_range),
                IntegerDimension("d_model", *section.dim_range, step=section.dim_step),
            ]
        )
