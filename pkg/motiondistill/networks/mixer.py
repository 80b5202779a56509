"""Step-free MLP-mixer denoiser used as the distilled student."""

from __future__ import annotations

from typing import Any

from motiondistill.autodiff import Tensor, concat
from motiondistill.config import StudentConfig
from motiondistill.networks.base import DenoiserModel, ParameterShapes
from motiondistill.networks.layers import linear, linear_shapes, mlp, mlp_shapes, norm, norm_shapes, se_block, se_shapes


class MixerDenoiser(DenoiserModel):
    """Tokens are [embed(c) ; embed(y)]; no diffusion-step input exists.

    Layer: x += token_mlp(se(LN x)) mixing across the 2L tokens, then
    x += channel_mlp(LN x) mixing across d_model.
    """

    kind = "mixer"
    uses_step = False

    config: StudentConfig

    @classmethod
    def parameter_shapes(cls, config: StudentConfig) -> ParameterShapes:
        D, d, T = 3 * config.J, config.d_model, 2 * config.L
        shapes: ParameterShapes = {}
        shapes.update(linear_shapes("embed_c", D, d))
        shapes.update(linear_shapes("embed_y", D, d))
        for i in range(config.n_layers):
            shapes.update(norm_shapes(f"layers.{i}.norm1", d))
            shapes.update(se_shapes(f"layers.{i}.se", T, config.se_reduction))
            shapes.update(mlp_shapes(f"layers.{i}.token_mlp", T, config.token_expansion * T))
            shapes.update(norm_shapes(f"layers.{i}.norm2", d))
            shapes.update(mlp_shapes(f"layers.{i}.channel_mlp", d, config.channel_expansion * d))
        shapes.update(norm_shapes("head_norm", d))
        shapes.update(linear_shapes("head", d, D))
        return shapes

    def forward(self, y_noisy: Any, c: Any) -> Tensor:
        y, cond, batched = self._check_inputs(y_noisy, c)
        L = self.config.L
        p = self.params

        x = concat([linear(cond, p, "embed_c"), linear(y, p, "embed_y")], axis=1)
        for i in range(self.config.n_layers):
            h = se_block(norm(x, p, f"layers.{i}.norm1"), p, f"layers.{i}.se")
            x = x + mlp(h.swapaxes(1, 2), p, f"layers.{i}.token_mlp").swapaxes(1, 2)
            x = x + mlp(norm(x, p, f"layers.{i}.norm2"), p, f"layers.{i}.channel_mlp")

        out = linear(norm(x, p, "head_norm")[:, L:, :], p, "head")
        return out if batched else out[0]
