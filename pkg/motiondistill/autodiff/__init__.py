from motiondistill.autodiff.gradcheck import gradcheck, gradcheck_parameters
from motiondistill.autodiff.optim import AdamW, OptimizerState, adamw_step, cosine_lr
from motiondistill.autodiff.tensor import (
    Tape,
    Tensor,
    active_tape,
    add,
    as_tensor,
    concat,
    gelu,
    layernorm,
    matmul,
    mean,
    mul,
    neg,
    reshape,
    sigmoid,
    slice_,
    softmax,
    square,
    sub,
    sum_,
    swapaxes,
    transpose,
)

__all__ = [
    "AdamW",
    "OptimizerState",
    "Tape",
    "Tensor",
    "active_tape",
    "adamw_step",
    "add",
    "as_tensor",
    "concat",
    "cosine_lr",
    "gelu",
    "gradcheck",
    "gradcheck_parameters",
    "layernorm",
    "matmul",
    "mean",
    "mul",
    "neg",
    "reshape",
    "sigmoid",
    "slice_",
    "softmax",
    "square",
    "sub",
    "sum_",
    "swapaxes",
    "transpose",
]
