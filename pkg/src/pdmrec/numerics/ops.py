"""Differentiable primitives used by the encoder and the losses.

AIDEV-NOTE: Each function computes its forward value with numpy and hands
`make_node` a closure with the hand-derived backward rule. Broadcasting is
supported for the element-wise ops and for batched matmul; `_unbroadcast`
folds gradients back onto the operand's shape.
"""

import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

from pdmrec.errors import ConfigError, DataError, DimensionError
from pdmrec.numerics.autograd import Array, Tensor, make_node

Operand = Tensor | ArrayLike


def _as_tensor(x: Operand, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# Linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes, batched over leading axes."""
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    a_data, b_data = a.data, b.data

    def _backward(g: Array) -> tuple[Array, Array]:
        ga = np.matmul(g, np.swapaxes(b_data, -1, -2))
        gb = np.matmul(np.swapaxes(a_data, -1, -2), g)
        return _unbroadcast(ga, a_data.shape), _unbroadcast(gb, b_data.shape)

    return make_node(np.matmul(a_data, b_data), (a, b), _backward)


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes."""

    def _backward(g: Array) -> tuple[Array]:
        return (np.swapaxes(g, -1, -2),)

    return make_node(np.swapaxes(a.data, -1, -2), (a,), _backward)


def broadcast_to(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    in_shape = a.shape

    def _backward(g: Array) -> tuple[Array]:
        return (_unbroadcast(g, in_shape),)

    return make_node(np.broadcast_to(a.data, shape).copy(), (a,), _backward)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    in_shape = a.shape

    def _backward(g: Array) -> tuple[Array]:
        return (g.reshape(in_shape),)

    return make_node(a.data.reshape(shape), (a,), _backward)


# Element-wise


def add(a: Operand, b: Operand) -> Tensor:
    ta = _as_tensor(a)
    tb = _as_tensor(b, ta)

    def _backward(g: Array) -> tuple[Array, Array]:
        return _unbroadcast(g, ta.shape), _unbroadcast(g, tb.shape)

    return make_node(ta.data + tb.data, (ta, tb), _backward)


def sub(a: Operand, b: Operand) -> Tensor:
    ta = _as_tensor(a)
    tb = _as_tensor(b, ta)

    def _backward(g: Array) -> tuple[Array, Array]:
        return _unbroadcast(g, ta.shape), _unbroadcast(-g, tb.shape)

    return make_node(ta.data - tb.data, (ta, tb), _backward)


def mul(a: Operand, b: Operand) -> Tensor:
    ta = _as_tensor(a)
    tb = _as_tensor(b, ta)
    a_data, b_data = ta.data, tb.data

    def _backward(g: Array) -> tuple[Array, Array]:
        return _unbroadcast(g * b_data, a_data.shape), _unbroadcast(
            g * a_data, b_data.shape
        )

    return make_node(a_data * b_data, (ta, tb), _backward)


def scale(a: Tensor, factor: float) -> Tensor:
    """Multiply by a constant scalar."""
    c = a.dtype.type(factor)

    def _backward(g: Array) -> tuple[Array]:
        return (g * c,)

    return make_node(a.data * c, (a,), _backward)


def relu(a: Tensor) -> Tensor:
    positive = a.data > 0

    def _backward(g: Array) -> tuple[Array]:
        return (g * positive,)

    return make_node(np.where(positive, a.data, 0).astype(a.dtype), (a,), _backward)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a: Tensor) -> Tensor:
    """Tanh approximation of the Gaussian error linear unit."""
    x = a.data
    t = np.tanh(_GELU_C * (x + 0.044715 * x**3))

    def _backward(g: Array) -> tuple[Array]:
        dt = (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * x * x)
        return ((g * (0.5 * (1.0 + t) + 0.5 * x * dt)).astype(x.dtype),)

    return make_node((0.5 * x * (1.0 + t)).astype(x.dtype), (a,), _backward)


# Structural


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    """Concatenate along `axis`; the gradient is split back per input."""
    if not tensors:
        raise DimensionError("concat needs at least one tensor")
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def _backward(g: Array) -> tuple[Array, ...]:
        return tuple(np.split(g, bounds, axis=axis))

    return make_node(
        np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), _backward
    )


def index(a: Tensor, key: int | slice | tuple[int | slice | None, ...]) -> Tensor:
    """Basic (slice/integer) indexing."""
    in_shape, dtype = a.shape, a.dtype

    def _backward(g: Array) -> tuple[Array]:
        full = np.zeros(in_shape, dtype=dtype)
        full[key] += g
        return (full,)

    return make_node(a.data[key], (a,), _backward)


def take_rows(table: Tensor, indices: NDArray[np.integer]) -> Tensor:
    """Embedding lookup: output[..., :] = table[indices[...], :]."""
    idx = np.asarray(indices)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise DataError(
            f"index out of range for table with {table.shape[0]} rows: "
            f"[{idx.min()}, {idx.max()}]"
        )
    in_shape, dtype = table.shape, table.dtype

    def _backward(g: Array) -> tuple[Array]:
        full = np.zeros(in_shape, dtype=dtype)
        np.add.at(full, idx, g)
        return (full,)

    return make_node(table.data[idx], (table,), _backward)


def sum_all(a: Tensor) -> Tensor:
    shape = a.shape

    def _backward(g: Array) -> tuple[Array]:
        return (np.broadcast_to(g, shape).copy(),)

    return make_node(np.asarray(a.data.sum(), dtype=a.dtype), (a,), _backward)


def mean_all(a: Tensor) -> Tensor:
    return scale(sum_all(a), 1.0 / max(a.data.size, 1))


# Normalization and regularization


def row_softmax(m: Tensor, mask: NDArray[np.bool_] | None = None) -> Tensor:
    """Softmax over the last axis, stabilized by max-subtraction.

    Entries where `mask` is False get zero weight. A row with every entry
    masked produces all zeros instead of NaN.
    """
    x = m.data
    if x.size == 0:
        return make_node(x.copy(), (m,), lambda g: (g,))
    if mask is None:
        shifted = x - x.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        y = e / e.sum(axis=-1, keepdims=True)
    else:
        keep = np.broadcast_to(mask, x.shape)
        z = np.where(keep, x, -np.inf)
        top = z.max(axis=-1, keepdims=True)
        top = np.where(np.isfinite(top), top, 0)
        e = np.where(keep, np.exp(np.where(keep, x, 0) - top), 0)
        total = e.sum(axis=-1, keepdims=True)
        y = e / np.where(total > 0, total, 1)
    y = y.astype(x.dtype)

    def _backward(g: Array) -> tuple[Array]:
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return make_node(y, (m,), _backward)


def layer_norm(m: Tensor, gain: Tensor, bias: Tensor, eps: float) -> Tensor:
    """Normalize each row to zero mean / unit variance, then apply gain and bias."""
    width = m.shape[-1]
    if gain.shape != (width,) or bias.shape != (width,):
        raise DimensionError(
            f"layer_norm affine terms must have shape ({width},), "
            f"got {gain.shape} and {bias.shape}"
        )
    x = m.data
    centered = x - x.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    x_hat = (centered * inv_std).astype(x.dtype)
    gain_data = gain.data

    def _backward(g: Array) -> tuple[Array, Array, Array]:
        g_hat = g * gain_data
        gx = inv_std * (
            g_hat
            - g_hat.mean(axis=-1, keepdims=True)
            - x_hat * (g_hat * x_hat).mean(axis=-1, keepdims=True)
        )
        lead = tuple(range(g.ndim - 1))
        return (
            gx.astype(x.dtype),
            (g * x_hat).sum(axis=lead),
            g.sum(axis=lead),
        )

    return make_node(x_hat * gain_data + bias.data, (m, gain, bias), _backward)


def dropout(
    m: Tensor, rate: float, training: bool, rng: np.random.Generator | None
) -> Tensor:
    """Inverted dropout; in eval mode (or rate 0) the input is returned as-is."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return m
    if rng is None:
        raise ConfigError("dropout in training mode needs a random generator")
    keep = rng.random(m.shape) >= rate
    factor = (keep / (1.0 - rate)).astype(m.dtype)

    def _backward(g: Array) -> tuple[Array]:
        return (g * factor,)

    return make_node(m.data * factor, (m,), _backward)


# Losses


def cross_entropy(
    logits: Tensor,
    targets: NDArray[np.integer],
    mask: NDArray[np.bool_] | None = None,
) -> Tensor:
    """Mean over rows of -log softmax(logits)[target].

    Entries where `mask` is False are left out of the normalizer; the target
    entry of every row must stay unmasked.
    """
    if logits.ndim != 2:
        raise DimensionError(f"cross_entropy expects (rows, classes), got {logits.shape}")
    x = logits.data
    rows = np.arange(x.shape[0])
    tgt = np.asarray(targets)
    keep = np.ones(x.shape, dtype=bool) if mask is None else np.asarray(mask)
    if not keep[rows, tgt].all():
        raise DataError("cross_entropy target is masked out")
    z = np.where(keep, x, -np.inf)
    top = z.max(axis=1, keepdims=True)
    e = np.where(keep, np.exp(np.where(keep, x, 0) - top), 0)
    total = e.sum(axis=1, keepdims=True)
    log_prob = x[rows, tgt] - top[:, 0] - np.log(total[:, 0])
    n = max(x.shape[0], 1)
    prob = e / total

    def _backward(g: Array) -> tuple[Array]:
        grad = prob.copy()
        grad[rows, tgt] -= 1.0
        return ((grad * (g / n)).astype(x.dtype),)

    return make_node(np.asarray(-log_prob.mean(), dtype=x.dtype), (logits,), _backward)
