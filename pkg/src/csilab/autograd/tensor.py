"""Dense tensor with reverse-mode gradients."""

from __future__ import annotations

import contextlib
import itertools
from typing import Callable, Optional, Sequence

import numpy as np

_ids = itertools.count()
_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference, finite differences)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """
    A numpy array plus the bookkeeping needed for reverse-mode AD.

    Floating data keeps its dtype; anything else becomes float32. Leaves
    created with ``requires_grad=True`` start with a zero ``grad`` buffer and
    accumulate into it on every :func:`backward` call until
    :meth:`zero_grad`.
    """

    __slots__ = ("data", "requires_grad", "grad", "op", "_parents", "_backward", "_id", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, *, _parents: Sequence["Tensor"] = (),
                 _backward: Optional[Callable] = None, op: str = ""):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(arr) if (requires_grad and not _parents) else None
        self.op = op
        self._parents = tuple(_parents)
        self._backward = _backward
        self._id = next(_ids)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def zero_grad(self):
        self.grad = np.zeros_like(self.data) if self.requires_grad else None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # arithmetic sugar; the differentiable definitions live in ops
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __mul__(self, c):
        from . import ops
        if isinstance(c, Tensor):
            raise TypeError("only scaling by a constant is supported")
        return ops.scale(self, c)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def backward(self):
        backward(self)


def make_result(data: np.ndarray, parents: Sequence[Tensor], backward_fn: Callable, op: str) -> Tensor:
    """Wrap an op output, recording it on the graph only if an input is tracked."""
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=parents, _backward=backward_fn, op=op)
    return Tensor(data)


class Tape:
    """The operations reachable from a root, in execution order.

    Creation ids increase monotonically, so sorting the reachable nodes by id
    recovers the order in which they were executed.
    """

    def __init__(self, root: Tensor):
        seen = {}
        stack = [root]
        while stack:
            node = stack.pop()
            if node._id in seen or not node.requires_grad:
                continue
            seen[node._id] = node
            stack.extend(node._parents)
        self.nodes = [seen[k] for k in sorted(seen)]

    def __len__(self):
        return len(self.nodes)

    def reversed(self):
        return reversed(self.nodes)


def backward(loss: Tensor) -> None:
    """
    Populate ``.grad`` of every tracked tensor that ``loss`` depends on.

    Gradients are added to existing buffers, so two calls without an
    intervening ``zero_grad`` yield twice the gradient.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar root, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("loss does not depend on any tensor that requires grad")
    pending = {loss._id: np.ones_like(loss.data)}
    for node in Tape(loss).reversed():
        g = pending.pop(node._id, None)
        if g is None:
            continue
        node.grad = g.copy() if node.grad is None else node.grad + g
        if node._backward is None:
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            prev = pending.get(parent._id)
            pending[parent._id] = pg if prev is None else prev + pg
