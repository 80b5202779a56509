"""Value types for skeletons, motion sequences and their frequency representation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from motiondistill.errors import ConfigError, NumericError, ShapeError


@dataclass(frozen=True)
class SkeletonSpec:
    J: int
    names: tuple[str, ...] = ()
    frame_dt: float = 0.02

    def __post_init__(self) -> None:
        if self.J < 1:
            raise ConfigError(f"skeleton needs at least one joint, got J={self.J}")
        if self.frame_dt <= 0:
            raise ConfigError(f"frame_dt must be positive, got {self.frame_dt}")
        if not self.names:
            object.__setattr__(self, "names", tuple(f"joint_{j}" for j in range(self.J)))
        elif len(self.names) != self.J:
            raise ConfigError(f"{len(self.names)} joint names for J={self.J}")

    @property
    def dim(self) -> int:
        return 3 * self.J


@dataclass(frozen=True)
class MotionSequence:
    """(H+F) × 3J Cartesian joint coordinates in meters; the first H frames are observed."""

    frames: np.ndarray
    H: int
    F: int

    def __post_init__(self) -> None:
        frames = np.asarray(self.frames, dtype=np.float64)
        object.__setattr__(self, "frames", frames)
        if self.H < 1 or self.F < 1:
            raise ConfigError(f"need H >= 1 and F >= 1, got H={self.H}, F={self.F}")
        if frames.ndim != 2 or frames.shape[0] != self.H + self.F or frames.shape[1] % 3:
            raise ShapeError("MotionSequence", frames.shape, (self.H + self.F, "3J"))
        if not np.isfinite(frames).all():
            raise NumericError("motion sequence contains non-finite coordinates")

    @property
    def N(self) -> int:
        return self.H + self.F

    @property
    def J(self) -> int:
        return self.frames.shape[1] // 3

    @property
    def observed(self) -> np.ndarray:
        return self.frames[: self.H]

    @property
    def future(self) -> np.ndarray:
        return self.frames[self.H:]


@dataclass(frozen=True)
class FrequencyCoeffs:
    """First L rows of the orthonormal DCT of an N-frame sequence."""

    coeffs: np.ndarray
    N: int
    H: int | None = None

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        object.__setattr__(self, "coeffs", coeffs)
        if coeffs.ndim != 2:
            raise ShapeError("FrequencyCoeffs", coeffs.shape, detail="expected L × 3J")
        if not 1 <= coeffs.shape[0] <= self.N:
            raise ConfigError(f"need 1 <= L <= N, got L={coeffs.shape[0]}, N={self.N}")

    @property
    def L(self) -> int:
        return self.coeffs.shape[0]


@dataclass(frozen=True)
class InpaintMask:
    H: int
    F: int

    def __post_init__(self) -> None:
        if self.H < 0 or self.F < 0 or self.H + self.F < 1:
            raise ConfigError(f"invalid mask lengths H={self.H}, F={self.F}")

    @property
    def N(self) -> int:
        return self.H + self.F

    @property
    def m(self) -> np.ndarray:
        return np.concatenate([np.ones(self.H), np.zeros(self.F)])


@dataclass(frozen=True)
class MotionCorpus:
    """A split of equal-length sequences, ``frames`` of shape (n, H+F, 3J)."""

    frames: np.ndarray
    H: int
    F: int
    modes: np.ndarray | None = None
    families: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        frames = np.asarray(self.frames, dtype=np.float64)
        object.__setattr__(self, "frames", frames)
        if frames.ndim != 3 or frames.shape[1] != self.H + self.F or frames.shape[2] % 3:
            raise ShapeError("MotionCorpus", frames.shape, ("n", self.H + self.F, "3J"))
        for label in ("modes", "families"):
            values = getattr(self, label)
            if values is not None and len(values) != len(frames):
                raise ShapeError("MotionCorpus", (len(values),), (len(frames),), detail=label)

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def N(self) -> int:
        return self.H + self.F

    @property
    def J(self) -> int:
        return self.frames.shape[2] // 3

    @property
    def amplitude(self) -> float:
        """Largest absolute joint coordinate in the corpus."""
        return float(np.abs(self.frames).max()) if self.frames.size else 0.0

    @property
    def observations(self) -> np.ndarray:
        return self.frames[:, : self.H]

    @property
    def futures(self) -> np.ndarray:
        return self.frames[:, self.H:]

    def item(self, i: int) -> MotionSequence:
        return MotionSequence(self.frames[i], H=self.H, F=self.F)

    def subset(self, indices: np.ndarray) -> MotionCorpus:
        indices = np.asarray(indices)
        return MotionCorpus(
            self.frames[indices],
            H=self.H,
            F=self.F,
            modes=None if self.modes is None else np.asarray(self.modes)[indices],
            families=None if self.families is None else np.asarray(self.families)[indices],
            metadata=dict(self.metadata),
        )
