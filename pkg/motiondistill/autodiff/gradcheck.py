"""Central-difference validation of tape gradients."""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np

from motiondistill.autodiff.tensor import Tape, Tensor
from motiondistill.errors import ConfigError, ShapeError


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))))


def _check_step(h: float) -> None:
    if not 1e-6 <= h <= 1e-3:
        raise ConfigError(f"finite-difference step {h} outside [1e-6, 1e-3]")


def _scalar(out: Tensor) -> float:
    if out.size != 1:
        raise ShapeError("gradcheck", out.shape, detail="function must return a scalar")
    return out.item()


def gradcheck(f: Callable[[Tensor], Tensor], x: np.ndarray | Tensor, h: float = 1e-5) -> float:
    """Max over coordinates of |analytic − central difference| / max(1, |analytic|)."""
    _check_step(h)
    base = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    leaf = Tensor(base, requires_grad=True)
    with Tape() as tape:
        out = f(leaf)
        _scalar(out)
        tape.backward(out)
    analytic = leaf.grad if leaf.grad is not None else np.zeros_like(base)

    numeric = np.zeros_like(base)
    flat = numeric.reshape(-1)
    for i in range(base.size):
        shifted = base.copy().reshape(-1)
        shifted[i] += h
        plus = _scalar(f(Tensor(shifted.reshape(base.shape))))
        shifted[i] -= 2 * h
        minus = _scalar(f(Tensor(shifted.reshape(base.shape))))
        flat[i] = (plus - minus) / (2 * h)
    return _relative_error(analytic, numeric)


def gradcheck_parameters(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-5,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Same check, against parameter tensors that ``loss_fn`` closes over.

    Parameters are perturbed in place and restored.  ``max_coords`` caps the
    number of checked coordinates per tensor (chosen with ``rng``).
    """
    _check_step(h)
    params = list(params)
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        out = loss_fn()
        _scalar(out)
        tape.backward(out)
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
    for p in params:
        p.zero_grad()

    rng = rng or np.random.default_rng(0)
    worst = 0.0
    for p, grad in zip(params, analytic):
        coords = np.arange(p.size)
        if max_coords is not None and p.size > max_coords:
            coords = np.sort(rng.choice(p.size, size=max_coords, replace=False))
        flat = p.data.reshape(-1)
        numeric = np.empty(len(coords))
        for j, i in enumerate(coords):
            original = flat[i]
            flat[i] = original + h
            plus = _scalar(loss_fn())
            flat[i] = original - h
            minus = _scalar(loss_fn())
            flat[i] = original
            numeric[j] = (plus - minus) / (2 * h)
        worst = max(worst, _relative_error(grad.reshape(-1)[coords], numeric))
    return worst
