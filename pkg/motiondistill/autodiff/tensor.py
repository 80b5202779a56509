"""Dense float64 tensors with tape-based reverse-mode differentiation.

Ops only record onto a ``Tape`` when one is active on the current thread and at
least one input requires a gradient.  Outside a tape every op is a plain numpy
evaluation, which is what inference and finite-difference checks use.
"""

from __future__ import annotations

import logging
import math
import threading
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import special

from motiondistill.errors import NumericError, ShapeError

logger = logging.getLogger("motiondistill.autodiff")

Backward = Callable[[np.ndarray], tuple[np.ndarray | None, ...]]

_local = threading.local()
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _tape_stack() -> list[Tape]:
    stack = getattr(_local, "tapes", None)
    if stack is None:
        stack = _local.tapes = []
    return stack


def active_tape() -> Tape | None:
    stack = _tape_stack()
    return stack[-1] if stack else None


@dataclass(slots=True)
class TapeEntry:
    op: str
    output: Tensor
    inputs: tuple[Tensor, ...]
    backward: Backward


class Tape:
    """Ordered record of primitive ops with what their backward pass needs.

    Entries are appended in execution order, which is a topological order of
    the graph; ``backward`` replays them in reverse and then drops them.
    """

    def __init__(self) -> None:
        self._entries: list[TapeEntry] = []

    def __enter__(self) -> Tape:
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc_info: object) -> None:
        stack = _tape_stack()
        if self in stack:
            stack.remove(self)
        self.clear()

    def __len__(self) -> int:
        return len(self._entries)

    def record(self, entry: TapeEntry) -> None:
        self._entries.append(entry)

    def clear(self) -> None:
        self._entries.clear()

    def backward(self, loss: Tensor) -> None:
        if loss.data.size != 1:
            raise ShapeError("backward", loss.shape, detail="loss must be a scalar")
        loss.grad = np.ones_like(loss.data)
        for entry in reversed(self._entries):
            upstream = entry.output.grad
            if upstream is None:
                continue
            grads = entry.backward(upstream)
            for inp, grad in zip(entry.inputs, grads):
                if grad is None or not inp.requires_grad:
                    continue
                grad = _unbroadcast(grad, inp.shape)
                inp.grad = grad if inp.grad is None else inp.grad + grad
        for entry in self._entries:
            entry.output.grad = None
        self.clear()


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name")
    # make ``ndarray <op> Tensor`` defer to the Tensor reflected operators
    __array_ufunc__ = None
    __array_priority__ = 100

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        name: str = "",
        copy: bool = True,
    ) -> None:
        arr = np.array(data, dtype=np.float64) if copy else np.asarray(data, dtype=np.float64)
        self.data: np.ndarray = np.ascontiguousarray(arr)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        tape = active_tape()
        if tape is None:
            raise RuntimeError("backward() needs an active Tape")
        tape.backward(self)

    def __add__(self, other: Any) -> Tensor:
        return add(self, other)

    def __radd__(self, other: Any) -> Tensor:
        return add(other, self)

    def __sub__(self, other: Any) -> Tensor:
        return sub(self, other)

    def __rsub__(self, other: Any) -> Tensor:
        return sub(other, self)

    def __mul__(self, other: Any) -> Tensor:
        return mul(self, other)

    def __rmul__(self, other: Any) -> Tensor:
        return mul(other, self)

    def __truediv__(self, other: float) -> Tensor:
        if isinstance(other, Tensor):
            raise TypeError("division is only defined by scalars")
        return mul(self, 1.0 / float(other))

    def __neg__(self) -> Tensor:
        return neg(self)

    def __matmul__(self, other: Any) -> Tensor:
        return matmul(self, other)

    def __rmatmul__(self, other: Any) -> Tensor:
        return matmul(other, self)

    def __getitem__(self, index: Any) -> Tensor:
        return slice_(self, index)

    def sum(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        return sum_(self, axis, keepdims)

    def mean(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        return mean(self, axis, keepdims)

    def reshape(self, *shape: int) -> Tensor:
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes: int) -> Tensor:
        return transpose(self, axes or None)

    def swapaxes(self, a: int, b: int) -> Tensor:
        return swapaxes(self, a, b)


def as_tensor(value: Any) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _result(op: str, value: np.ndarray, inputs: Sequence[Tensor], backward: Backward) -> Tensor:
    value = np.asarray(value, dtype=np.float64)
    if not np.isfinite(value).all():
        raise NumericError(f"{op} produced non-finite values", op=op, shape=value.shape)
    out = Tensor(value, copy=False)
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(TapeEntry(op, out, tuple(inputs), backward))
    return out


def _broadcast_check(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


def _normalize_axes(axis: int | tuple[int, ...] | None, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


# ---------------------------------------------------------------------------
# Elementwise arithmetic
# ---------------------------------------------------------------------------


def add(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("add", a, b)
    return _result("add", a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("sub", a, b)
    return _result("sub", a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("mul", a, b)
    return _result("mul", a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def neg(a: Tensor) -> Tensor:
    return _result("neg", -a.data, (a,), lambda g: (-g,))


def square(a: Tensor) -> Tensor:
    return _result("square", a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


# ---------------------------------------------------------------------------
# Linear algebra and shape ops
# ---------------------------------------------------------------------------


def matmul(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeError("matmul", a.shape, b.shape, detail="batch axes do not broadcast") from None

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return g @ np.swapaxes(b.data, -1, -2), np.swapaxes(a.data, -1, -2) @ g

    return _result("matmul", a.data @ b.data, (a, b), backward)


def transpose(a: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    perm = tuple(range(a.ndim))[::-1] if axes is None else tuple(p % a.ndim for p in axes)
    if sorted(perm) != list(range(a.ndim)):
        raise ShapeError("transpose", a.shape, detail=f"invalid permutation {perm}")
    inverse = tuple(np.argsort(perm))
    return _result("transpose", a.data.transpose(perm), (a,), lambda g: (g.transpose(inverse),))


def swapaxes(a: Tensor, i: int, j: int) -> Tensor:
    return _result("swapaxes", np.swapaxes(a.data, i, j), (a,), lambda g: (np.swapaxes(g, i, j),))


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        value = a.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeError("reshape", a.shape, tuple(shape)) from None
    return _result("reshape", value, (a,), lambda g: (g.reshape(a.shape),))


def concat(tensors: Sequence[Any], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ShapeError("concat", detail="nothing to concatenate")
    ndim = parts[0].ndim
    ax = axis % ndim
    for p in parts[1:]:
        if p.ndim != ndim or p.shape[:ax] + p.shape[ax + 1:] != parts[0].shape[:ax] + parts[0].shape[ax + 1:]:
            raise ShapeError("concat", parts[0].shape, p.shape, detail=f"axis={axis}")
    bounds = np.cumsum([p.shape[ax] for p in parts])[:-1]

    def backward(g: np.ndarray) -> tuple[np.ndarray, ...]:
        return tuple(np.split(g, bounds, axis=ax))

    return _result("concat", np.concatenate([p.data for p in parts], axis=ax), parts, backward)


def _is_basic_index(index: Any) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice)) or i is Ellipsis or i is None for i in items)


def slice_(a: Tensor, index: Any) -> Tensor:
    try:
        value = a.data[index]
    except IndexError as exc:
        raise ShapeError("slice", a.shape, detail=str(exc)) from None
    basic = _is_basic_index(index)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        full = np.zeros_like(a.data)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)

    return _result("slice", np.array(value), (a,), backward)


# ---------------------------------------------------------------------------
# Reductions
# ---------------------------------------------------------------------------


def sum_(a: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, a.ndim)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape),)

    return _result("sum", a.data.sum(axis=axes, keepdims=keepdims), (a,), backward)


def mean(a: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, a.shape),)

    return _result("mean", a.data.mean(axis=axes, keepdims=keepdims), (a,), backward)


# ---------------------------------------------------------------------------
# Normalization and nonlinearities
# ---------------------------------------------------------------------------


def layernorm(x: Tensor, gamma: Any = None, beta: Any = None, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale by ``gamma`` and shift by ``beta``."""
    width = x.shape[-1]
    gamma = as_tensor(np.ones(width) if gamma is None else gamma)
    beta = as_tensor(np.zeros(width) if beta is None else beta)
    if gamma.shape != (width,) or beta.shape != (width,):
        raise ShapeError("layernorm", x.shape, gamma.shape, beta.shape)
    centered = x.data - x.data.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        dxhat = g * gamma.data
        dx = (inv_std / width) * (
            width * dxhat
            - dxhat.sum(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
        )
        return dx, g * xhat, g

    return _result("layernorm", xhat * gamma.data + beta.data, (x, gamma, beta), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return _result("softmax", s, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    s = special.expit(x.data)
    return _result("sigmoid", s, (x,), lambda g: (g * s * (1.0 - s),))


def gelu(x: Tensor) -> Tensor:
    """Exact GELU, x·Φ(x), with Φ the standard normal CDF."""
    cdf = special.ndtr(x.data)
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
    return _result("gelu", x.data * cdf, (x,), lambda g: (g * (cdf + x.data * pdf),))
