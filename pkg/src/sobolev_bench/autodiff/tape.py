"""Reverse-mode differentiation over numpy arrays.

Every operation on a :class:`Var` appends a node to its :class:`Tape` holding
the output value and one vector-Jacobian product per parent. The reverse
sweep walks the tape backwards from the root, so each node is visited once.

Forward-mode input derivatives (see ``derivatives.py``) are built out of the
same ``Var`` operations, which is what lets a parameter gradient see through
a loss containing input gradients or Laplacians.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable

import numpy as np

from ..errors import ContractError


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tape:
    """Ordered record of elementary operations.

    A tape is built fresh for every evaluation and never shared between
    calls.
    """

    def __init__(self) -> None:
        self.nodes: list[Var] = []

    def var(self, value) -> Var:
        """Register a leaf (an input or a parameter)."""
        return Var(np.asarray(value, dtype=np.float64), self, ())

    def _record(self, value: np.ndarray, parents) -> Var:
        return Var(value, self, parents)

    def backward(self, root: Var, leaves: Iterable[Var] | None = None):
        """Propagate d(root)/d(node) to every node reachable from ``root``.

        Returns the gradient arrays for ``leaves`` in order (zeros for a leaf
        the root does not depend on). Without ``leaves`` returns a dict keyed
        by node position on the tape.
        """
        if root.tape is not self:
            raise ContractError("root was recorded on a different tape")
        if root.value.size != 1:
            raise ContractError(
                f"backward needs a scalar root, got shape {root.value.shape}"
            )
        for node in self.nodes:
            node.grad = None
        grads: dict[int, np.ndarray] = {root.index: np.ones_like(root.value)}
        for node in reversed(self.nodes[: root.index + 1]):
            g = grads.pop(node.index, None)
            if g is None:
                continue
            node.grad = g
            for parent, vjp in node.parents:
                contrib = vjp(g)
                prev = grads.get(parent.index)
                grads[parent.index] = contrib if prev is None else prev + contrib
        if leaves is None:
            return {n.index: n.grad for n in self.nodes if n.grad is not None}
        return [
            leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value)
            for leaf in leaves
        ]


class Var:
    """A node on a tape: an array value plus its local partials."""

    __slots__ = ("grad", "index", "parents", "tape", "value")
    __array_ufunc__ = None

    def __init__(self, value: np.ndarray, tape: Tape, parents) -> None:
        self.value = value
        self.tape = tape
        self.parents = parents
        self.grad: np.ndarray | None = None
        self.index = len(tape.nodes)
        tape.nodes.append(self)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Var(shape={self.value.shape}, index={self.index})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, negative(other))

    def __rsub__(self, other):
        return add(negative(self), other)

    def __mul__(self, other):
        return multiply(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return negative(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    @property
    def T(self) -> Var:
        return swap_last(self)

    def sum(self, axis=None) -> Var:
        return reduce_sum(self, axis)

    def mean(self, axis=None) -> Var:
        n = self.value.size if axis is None else self.value.shape[axis]
        return reduce_sum(self, axis) * (1.0 / n)


def _tape_of(*xs) -> Tape | None:
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    return None


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def add(a, b):
    tape = _tape_of(a, b)
    va, vb = value_of(a), value_of(b)
    out = va + vb
    if tape is None:
        return out
    parents = []
    if isinstance(a, Var):
        parents.append((a, lambda g, s=va.shape: _unbroadcast(g, s)))
    if isinstance(b, Var):
        parents.append((b, lambda g, s=vb.shape: _unbroadcast(g, s)))
    return tape._record(out, tuple(parents))


def negative(a):
    if not isinstance(a, Var):
        return -np.asarray(a, dtype=np.float64)
    return a.tape._record(-a.value, ((a, lambda g: -g),))


def multiply(a, b):
    tape = _tape_of(a, b)
    va, vb = value_of(a), value_of(b)
    out = va * vb
    if tape is None:
        return out
    parents = []
    if isinstance(a, Var):
        parents.append((a, lambda g, s=va.shape: _unbroadcast(g * vb, s)))
    if isinstance(b, Var):
        parents.append((b, lambda g, s=vb.shape: _unbroadcast(g * va, s)))
    return tape._record(out, tuple(parents))


def matmul(a, b):
    tape = _tape_of(a, b)
    va, vb = value_of(a), value_of(b)
    if va.ndim < 2 or vb.ndim < 2:
        raise ContractError("matmul operands must be at least 2-d")
    out = va @ vb
    if tape is None:
        return out
    parents = []
    if isinstance(a, Var):
        parents.append(
            (a, lambda g, s=va.shape: _unbroadcast(g @ np.swapaxes(vb, -1, -2), s))
        )
    if isinstance(b, Var):
        parents.append(
            (b, lambda g, s=vb.shape: _unbroadcast(np.swapaxes(va, -1, -2) @ g, s))
        )
    return tape._record(out, tuple(parents))


def swap_last(a):
    if not isinstance(a, Var):
        return np.swapaxes(np.asarray(a), -1, -2)
    return a.tape._record(
        np.swapaxes(a.value, -1, -2), ((a, lambda g: np.swapaxes(g, -1, -2)),)
    )


def reduce_sum(a, axis=None):
    if not isinstance(a, Var):
        return np.sum(a, axis=axis)
    shape = a.value.shape

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, shape).copy()
        return np.broadcast_to(np.expand_dims(g, axis), shape).copy()

    return a.tape._record(np.sum(a.value, axis=axis), ((a, vjp),))


def step(a) -> np.ndarray:
    """Indicator 1[x > 0]; a constant (zero derivative) with step(0) = 0."""
    return (value_of(a) > 0.0).astype(np.float64)


def relu(a):
    v = value_of(a)
    out = np.maximum(v, 0.0)
    if not isinstance(a, Var):
        return out
    mask = step(v)
    return a.tape._record(out, ((a, lambda g: g * mask),))


def square(a):
    if not isinstance(a, Var):
        v = np.asarray(a, dtype=np.float64)
        return v * v
    v = a.value
    return a.tape._record(v * v, ((a, lambda g: 2.0 * v * g),))


def elementwise(a, fn: Callable[[np.ndarray], np.ndarray], dfn: Callable[[np.ndarray], np.ndarray]):
    """Lift a scalar function with known derivative onto the tape."""
    v = value_of(a)
    out = fn(v)
    if not isinstance(a, Var):
        return out
    d = dfn(v)
    return a.tape._record(out, ((a, lambda g: g * d),))
