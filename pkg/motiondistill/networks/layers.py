"""Functional building blocks shared by both denoisers.

Each block reads its weights from a ``params`` mapping under a name prefix, so
``parameter_shapes`` in the model classes and the forward code agree on names.
"""

from __future__ import annotations

import math

import numpy as np

from motiondistill.autodiff import Tensor, gelu, layernorm, sigmoid, softmax

Params = dict[str, Tensor]


def linear_shapes(prefix: str, fan_in: int, fan_out: int) -> dict[str, tuple[int, ...]]:
    return {f"{prefix}.weight": (fan_in, fan_out), f"{prefix}.bias": (fan_out,)}


def norm_shapes(prefix: str, width: int) -> dict[str, tuple[int, ...]]:
    return {f"{prefix}.gamma": (width,), f"{prefix}.beta": (width,)}


def mlp_shapes(prefix: str, width: int, hidden: int) -> dict[str, tuple[int, ...]]:
    return {**linear_shapes(f"{prefix}.0", width, hidden), **linear_shapes(f"{prefix}.1", hidden, width)}


def se_hidden(tokens: int, reduction: int) -> int:
    # no bottleneck when there are fewer tokens than the reduction factor
    return tokens // reduction if tokens >= reduction else tokens


def se_shapes(prefix: str, tokens: int, reduction: int) -> dict[str, tuple[int, ...]]:
    hidden = se_hidden(tokens, reduction)
    return {**linear_shapes(f"{prefix}.fc1", tokens, hidden), **linear_shapes(f"{prefix}.fc2", hidden, tokens)}


def linear(x: Tensor, params: Params, prefix: str) -> Tensor:
    return x @ params[f"{prefix}.weight"] + params[f"{prefix}.bias"]


def norm(x: Tensor, params: Params, prefix: str) -> Tensor:
    return layernorm(x, params[f"{prefix}.gamma"], params[f"{prefix}.beta"])


def mlp(x: Tensor, params: Params, prefix: str) -> Tensor:
    return linear(gelu(linear(x, params, f"{prefix}.0")), params, f"{prefix}.1")


def se_block(tokens: Tensor, params: Params, prefix: str) -> Tensor:
    """Squeeze-and-excitation over tokens.

    tokens: (B, T, d). Squeeze averages channels to one value per token, the
    excitation MLP maps those T values to gates in (0, 1), and every token row
    is scaled by its gate.
    """
    B, T, _ = tokens.shape
    squeezed = tokens.mean(axis=-1)
    gates = sigmoid(linear(gelu(linear(squeezed, params, f"{prefix}.fc1")), params, f"{prefix}.fc2"))
    return tokens * gates.reshape(B, T, 1)


def self_attention(x: Tensor, params: Params, prefix: str, n_heads: int) -> Tensor:
    B, T, d = x.shape
    head_dim = d // n_heads
    qkv = linear(x, params, f"{prefix}.qkv").reshape(B, T, 3, n_heads, head_dim).transpose(2, 0, 3, 1, 4)
    q, k, v = qkv[0], qkv[1], qkv[2]
    scores = (q @ k.swapaxes(-1, -2)) * (1.0 / math.sqrt(head_dim))
    out = (softmax(scores, axis=-1) @ v).transpose(0, 2, 1, 3).reshape(B, T, d)
    return linear(out, params, f"{prefix}.out")


def step_embedding(k: np.ndarray, dim: int) -> np.ndarray:
    """Sinusoidal embedding of integer diffusion steps, shape (len(k), dim)."""
    k = np.asarray(k, dtype=np.float64).reshape(-1)
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / max(half, 1))
    angles = k[:, None] * freqs[None, :]
    emb = np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)
    if dim % 2:
        emb = np.pad(emb, ((0, 0), (0, 1)))
    return emb
