"""Truncated orthonormal DCT, observation padding and inpainting splices.

The array-level functions accept any number of leading batch axes: sequences
are ``(..., N, D)`` and coefficients ``(..., L, D)`` with D = 3J.
"""

from __future__ import annotations

import functools

import numpy as np

from motiondistill.errors import ConfigError, ShapeError
from motiondistill.motion.types import FrequencyCoeffs, InpaintMask, MotionSequence


@functools.lru_cache(maxsize=64)
def dct_basis(N: int, L: int) -> np.ndarray:
    """First L rows of the orthonormal DCT-II matrix of size N (read-only)."""
    if not 1 <= L <= N:
        raise ConfigError(f"need 1 <= L <= N, got L={L}, N={N}")
    n = np.arange(N)
    k = np.arange(L)[:, None]
    basis = np.sqrt(2.0 / N) * np.cos(np.pi * (2 * n + 1) * k / (2 * N))
    basis[0] = 1.0 / np.sqrt(N)
    basis.setflags(write=False)
    return basis


def default_L(N: int) -> int:
    return max(1, N // 2)


def dct(x: np.ndarray, L: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2:
        raise ShapeError("dct", x.shape, detail="expected (..., N, D)")
    return dct_basis(x.shape[-2], L) @ x


def idct(y: np.ndarray, N: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim < 2:
        raise ShapeError("idct", y.shape, detail="expected (..., L, D)")
    return dct_basis(N, y.shape[-2]).T @ y


def pad_frames(x_obs: np.ndarray, total_len: int) -> np.ndarray:
    """Extend ``(..., H, D)`` observations to ``total_len`` frames by repeating the last one."""
    x_obs = np.asarray(x_obs, dtype=np.float64)
    if x_obs.ndim < 2 or x_obs.shape[-2] == 0:
        raise ShapeError("pad_observation", x_obs.shape, detail="empty observation")
    H = x_obs.shape[-2]
    if total_len < H:
        raise ConfigError(f"total length {total_len} shorter than observation H={H}")
    tail = np.repeat(x_obs[..., H - 1:H, :], total_len - H, axis=-2)
    return np.concatenate([x_obs, tail], axis=-2)


def condition(x_obs: np.ndarray, total_len: int, L: int) -> np.ndarray:
    """c = DCT of the padded observation."""
    return dct(pad_frames(x_obs, total_len), L)


@functools.lru_cache(maxsize=64)
def splice_operators(N: int, L: int, H: int) -> tuple[np.ndarray, np.ndarray]:
    """B_L·diag(M)·B_Lᵀ and B_L·diag(1−M)·B_Lᵀ for the mask with H observed frames."""
    basis = dct_basis(N, L)
    mask = InpaintMask(H, N - H).m
    observed = (basis * mask) @ basis.T
    future = (basis * (1.0 - mask)) @ basis.T
    observed.setflags(write=False)
    future.setflags(write=False)
    return observed, future


def inpaint(y_denoised: np.ndarray, y_observed: np.ndarray, H: int, N: int) -> np.ndarray:
    """DCT(M ⊙ IDCT(y_observed) + (1−M) ⊙ IDCT(y_denoised))."""
    y_denoised = np.asarray(y_denoised, dtype=np.float64)
    y_observed = np.asarray(y_observed, dtype=np.float64)
    if y_denoised.shape[-2:] != y_observed.shape[-2:]:
        raise ShapeError("inpaint", y_denoised.shape, y_observed.shape)
    observed, future = splice_operators(N, y_denoised.shape[-2], H)
    return observed @ y_observed + future @ y_denoised


# ---------------------------------------------------------------------------
# Typed wrappers
# ---------------------------------------------------------------------------


def to_frequency(x: MotionSequence, L: int) -> FrequencyCoeffs:
    if L > x.N:
        raise ConfigError(f"L={L} exceeds sequence length N={x.N}")
    return FrequencyCoeffs(dct(x.frames, L), N=x.N, H=x.H)


def from_frequency(y: FrequencyCoeffs, H: int | None = None) -> MotionSequence:
    H = y.H if H is None else H
    if H is None:
        raise ConfigError("observed length H unknown for this coefficient block")
    return MotionSequence(idct(y.coeffs, y.N), H=H, F=y.N - H)


def pad_observation(x_obs: np.ndarray, total_len: int) -> MotionSequence:
    x_obs = np.asarray(x_obs, dtype=np.float64)
    padded = pad_frames(x_obs, total_len)
    return MotionSequence(padded, H=x_obs.shape[0], F=total_len - x_obs.shape[0])


def observation_condition(x_obs: np.ndarray, total_len: int, L: int) -> FrequencyCoeffs:
    return to_frequency(pad_observation(x_obs, total_len), L)


def apply_inpaint(y_denoised: FrequencyCoeffs, y_observed: FrequencyCoeffs, mask: InpaintMask) -> FrequencyCoeffs:
    if y_denoised.N != y_observed.N or y_denoised.L != y_observed.L:
        raise ShapeError(
            "apply_inpaint",
            (y_denoised.L, y_denoised.N),
            (y_observed.L, y_observed.N),
            detail="L and N must match",
        )
    if mask.N != y_denoised.N:
        raise ShapeError("apply_inpaint", (mask.N,), (y_denoised.N,), detail="mask length != N")
    coeffs = inpaint(y_denoised.coeffs, y_observed.coeffs, mask.H, mask.N)
    return FrequencyCoeffs(coeffs, N=mask.N, H=mask.H)
