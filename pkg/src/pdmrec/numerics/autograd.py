"""Tensor node and reverse-mode gradient tape.

AIDEV-NOTE: Every primitive in `pdmrec.numerics.ops` produces its output
through `make_node`, which records the parent tensors and a closure mapping
the output gradient to one gradient per parent. `backward` walks that
record in reverse topological order. Only tensors with requires_grad=True
are recorded, so forward passes over constants cost no bookkeeping.
"""

from collections.abc import Callable, Iterator, Mapping
from contextlib import contextmanager
from contextvars import ContextVar

import numpy as np
from numpy.typing import ArrayLike, DTypeLike, NDArray

from pdmrec.errors import DimensionError

Array = NDArray[np.floating]
BackwardFn = Callable[[Array], tuple[Array | None, ...]]

_grad_enabled: ContextVar[bool] = ContextVar("pdmrec_grad_enabled", default=True)


class Tensor:
    """Dense real-valued array plus the bookkeeping needed for gradients.

    2-D tensors play the role of dense matrices; the model also uses
    batched 3-D tensors of shape (batch, L, d).
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        name: str = "",
        dtype: DTypeLike | None = None,
    ) -> None:
        self.data: Array = np.asarray(data, dtype=dtype)
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype[np.floating]:
        return self.data.dtype

    def item(self) -> float:
        """Return the value of a single-element tensor as a float."""
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label})"


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


@contextmanager
def no_grad() -> Iterator[None]:
    """Run forward passes without recording the tape."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def make_node(
    data: Array, parents: tuple[Tensor, ...], backward_fn: BackwardFn
) -> Tensor:
    """Wrap a primitive's output, recording it when any parent needs gradients."""
    out = Tensor(data)
    if _grad_enabled.get() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


def _topological_order(root: Tensor) -> list[Tensor]:
    """Post-order over the recorded graph (parents before children)."""
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(
    loss: Tensor, params: Mapping[str, Tensor] | None = None
) -> dict[str, Array]:
    """Accumulate d(loss)/d(leaf) into every reachable leaf's `.grad`.

    Returns one gradient per entry of `params`; parameters the loss does
    not reach get an all-zero gradient.
    """
    if loss.data.size != 1:
        raise DimensionError(f"backward needs a scalar loss, got shape {loss.shape}")

    if loss.requires_grad:
        pending: dict[int, Array] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(_topological_order(loss)):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g), strict=True):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = pg if key not in pending else pending[key] + pg

    if params is None:
        return {}
    return {
        name: t.grad if t.grad is not None else np.zeros_like(t.data)
        for name, t in params.items()
    }
