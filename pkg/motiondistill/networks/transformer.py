"""SE-Transformer denoiser conditioned on the diffusion step."""

from __future__ import annotations

from typing import Any

import numpy as np

from motiondistill.autodiff import Tensor, concat, gelu
from motiondistill.config import TeacherConfig
from motiondistill.errors import ConfigError
from motiondistill.networks.base import DenoiserModel, ParameterShapes
from motiondistill.networks.layers import (
    linear,
    linear_shapes,
    mlp,
    mlp_shapes,
    norm,
    norm_shapes,
    se_block,
    se_shapes,
    self_attention,
    step_embedding,
)


def skip_partner(layer: int, n_layers: int) -> int | None:
    """Shallow layer whose output is concatenated into ``layer``, if any."""
    partner = n_layers - 1 - layer
    return partner if partner < layer else None


class TransformerDenoiser(DenoiserModel):
    """Tokens are [embed(c) ; embed(y_k) ; step] with a learned position embedding.

    Each layer applies SE gating, pre-norm multi-head self-attention and a
    pre-norm feed-forward block, both residual. Layer i's output feeds the
    input of layer n−1−i through a concatenate-and-project long skip. The head
    reads the y-token block back out as (L, 3J).
    """

    kind = "transformer"
    uses_step = True

    config: TeacherConfig

    @classmethod
    def parameter_shapes(cls, config: TeacherConfig) -> ParameterShapes:
        D, d, T = 3 * config.J, config.d_model, 2 * config.L + 1
        shapes: ParameterShapes = {}
        shapes.update(linear_shapes("embed_c", D, d))
        shapes.update(linear_shapes("embed_y", D, d))
        shapes["pos_embed"] = (T, d)
        shapes.update(linear_shapes("step_mlp.0", d, d))
        shapes.update(linear_shapes("step_mlp.1", d, d))
        for i in range(config.n_layers):
            if skip_partner(i, config.n_layers) is not None:
                shapes.update(linear_shapes(f"skips.{i}", 2 * d, d))
            shapes.update(se_shapes(f"layers.{i}.se", T, config.se_reduction))
            shapes.update(norm_shapes(f"layers.{i}.norm1", d))
            shapes.update(linear_shapes(f"layers.{i}.attn.qkv", d, 3 * d))
            shapes.update(linear_shapes(f"layers.{i}.attn.out", d, d))
            shapes.update(norm_shapes(f"layers.{i}.norm2", d))
            shapes.update(mlp_shapes(f"layers.{i}.ffn", d, config.ffn_dim))
        shapes.update(norm_shapes("head_norm", d))
        shapes.update(linear_shapes("head", d, D))
        return shapes

    def forward(self, y_noisy: Any, c: Any, k: Any = None) -> Tensor:
        y, cond, batched = self._check_inputs(y_noisy, c)
        B, L = y.shape[0], self.config.L
        steps = self._steps(k, B)
        p = self.params

        step_in = Tensor(step_embedding(steps, self.config.d_model).reshape(B, 1, -1))
        step_token = linear(gelu(linear(step_in, p, "step_mlp.0")), p, "step_mlp.1")
        x = concat([linear(cond, p, "embed_c"), linear(y, p, "embed_y"), step_token], axis=1)
        x = x + p["pos_embed"]

        shallow: list[Tensor] = []
        n = self.config.n_layers
        for i in range(n):
            if skip_partner(i, n) is not None:
                x = linear(concat([x, shallow.pop()], axis=-1), p, f"skips.{i}")
            x = se_block(x, p, f"layers.{i}.se")
            x = x + self_attention(norm(x, p, f"layers.{i}.norm1"), p, f"layers.{i}.attn", self.config.n_heads)
            x = x + mlp(norm(x, p, f"layers.{i}.norm2"), p, f"layers.{i}.ffn")
            if i < n // 2:
                shallow.append(x)

        out = linear(norm(x, p, "head_norm")[:, L:2 * L, :], p, "head")
        return out if batched else out[0]

    @staticmethod
    def _steps(k: Any, batch: int) -> np.ndarray:
        if k is None:
            raise ConfigError("transformer denoiser needs a diffusion step index")
        steps = np.broadcast_to(np.asarray(k), (batch,))
        if not np.issubdtype(steps.dtype, np.integer) or (steps < 0).any():
            raise ConfigError(f"step indices must be non-negative integers, got {k!r}")
        return steps

