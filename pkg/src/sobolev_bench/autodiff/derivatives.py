"""Network evaluation with input derivatives, and parameter gradients.

Input derivatives are propagated forward through the layer recursion as a
truncated Taylor jet: the value, the d directional derivatives (one forward
pass per coordinate, batched together) and the Laplacian accumulated from
the second-order terms. When the weights are tape nodes the whole jet is
recorded, so a reverse sweep over a loss that contains gradients or
Laplacians yields exact parameter gradients.
"""

from __future__ import annotations

import enum
from collections.abc import Callable, Sequence
from typing import NamedTuple

import numpy as np

from ..errors import InputShapeError
from . import dual as _dual
from .tape import Tape, Var, reduce_sum, relu, square, step, swap_last, value_of


class ActivationKind(str, enum.Enum):
    """Per-layer activation tag.

    ``relu`` is sigma_1, ``relu_squared`` is sigma_2 = relu(x)**2 and
    ``identity`` marks the final affine layer.
    """

    RELU = "relu"
    RELU_SQUARED = "relu_squared"
    IDENTITY = "identity"

    def apply(self, z):
        if self is ActivationKind.RELU:
            return relu(z)
        if self is ActivationKind.RELU_SQUARED:
            return square(relu(z))
        return z

    def first(self, z):
        """sigma'(z), with sigma_1'(0) = 0."""
        if self is ActivationKind.RELU:
            return step(z)
        if self is ActivationKind.RELU_SQUARED:
            return 2.0 * relu(z)
        return np.ones_like(value_of(z))

    def second(self, z) -> np.ndarray:
        """sigma''(z) a.e., with sigma_2''(0) = 0."""
        if self is ActivationKind.RELU_SQUARED:
            return 2.0 * step(z)
        return np.zeros_like(value_of(z))


# (weight, bias, activation); weight and bias are arrays or tape nodes
LayerParams = tuple


class Jet(NamedTuple):
    value: object
    grad: object | None = None
    laplacian: object | None = None


def layer_params(model) -> list[LayerParams]:
    return [(layer.weight, layer.bias, ActivationKind(layer.activation)) for layer in model.layers]


def _check_input(params: Sequence[LayerParams], X) -> np.ndarray | Var:
    d = value_of(params[0][0]).shape[1]
    xv = value_of(X)
    if xv.ndim != 2 or xv.shape[1] != d:
        raise InputShapeError(f"expected inputs of shape (batch, {d}), got {xv.shape}")
    return X


def propagate(params: Sequence[LayerParams], X, order: int = 0) -> Jet:
    """Push a batch ``X`` of shape (B, d) through the layer recursion.

    ``order`` 0 returns values only; 1 adds the input gradient (B, d); 2 adds
    the input gradient and the Laplacian (B,).
    """
    X = _check_input(params, X)
    d = value_of(X).shape[1]
    h = X
    G = np.eye(d)[:, None, :] if order >= 1 else None  # (d, 1, d): dx/dx_i
    lap = None
    for W, b, act in params:
        Wt = swap_last(W)
        z = h @ Wt + b
        if G is not None:
            G = G @ Wt
        if lap is not None:
            lap = lap @ Wt
        if act is ActivationKind.IDENTITY:
            h = z
            continue
        h = act.apply(z)
        if G is None:
            continue
        s1 = act.first(z)
        if order >= 2:
            s2 = act.second(z)
            curv = reduce_sum(square(G), axis=0) * s2 if s2.any() else None
            if lap is not None:
                lap = lap * s1
                if curv is not None:
                    lap = lap + curv
            else:
                lap = curv
        G = G * s1
    value = reduce_sum(h, axis=-1)
    grad = swap_last(reduce_sum(G, axis=-1)) if G is not None else None
    if order >= 2:
        if lap is None:
            lap = np.zeros(value_of(value).shape)
        else:
            lap = reduce_sum(lap, axis=-1)
    return Jet(value, grad, lap)


def _batch(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x[None, :] if x.ndim == 1 else x


def evaluate(model, X) -> np.ndarray:
    """phi(X) for a batch (B, d); a 1-d point gives a length-1 array."""
    return propagate(layer_params(model), _batch(X), order=0).value


def eval_point(model, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InputShapeError(f"expected a single point, got shape {x.shape}")
    return float(evaluate(model, x)[0])


def input_gradient(model, x, mode: str = "forward") -> np.ndarray:
    """grad_x phi at a point (d,) or a batch (B, d).

    ``mode="forward"`` uses the batched directional passes, ``"reverse"``
    records the value on a tape and sweeps back to the inputs.
    """
    X = _batch(x)
    if mode == "forward":
        g = propagate(layer_params(model), X, order=1).grad
    elif mode == "reverse":
        tape = Tape()
        xv = tape.var(X)
        out = propagate(layer_params(model), xv, order=0).value
        (g,) = tape.backward(reduce_sum(out), [xv])
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return g[0] if np.ndim(x) == 1 else g


def input_laplacian(model, x):
    """Laplacian of phi at a point (returns float) or a batch (returns (B,))."""
    lap = propagate(layer_params(model), _batch(x), order=2).laplacian
    return float(lap[0]) if np.ndim(x) == 1 else lap


def input_hessian(model, x) -> np.ndarray:
    """Full input Hessian, shape (B, d, d) for a batch or (d, d) for a point.

    Arrays only (no tape); used for H^2 error norms and as a cross-check on
    the Laplacian.
    """
    X = _batch(x)
    params = layer_params(model)
    _check_input(params, X)
    d = X.shape[1]
    h = X
    G = np.broadcast_to(np.eye(d)[:, None, :], (d, X.shape[0], d))
    H = np.zeros((d, d, X.shape[0], d))
    for W, b, act in params:
        z = h @ W.T + b
        G = G @ W.T
        H = H @ W.T
        if act is ActivationKind.IDENTITY:
            h = z
            continue
        h = act.apply(z)
        s1, s2 = act.first(z), act.second(z)
        H = H * s1 + s2 * np.einsum("ibn,jbn->ijbn", G, G)
        G = G * s1
    out = np.moveaxis(H[..., 0], -1, 0)
    return out[0] if np.ndim(x) == 1 else out


def _dual_forward(model, xs: list) -> object:
    h = xs
    for layer in model.layers:
        W, b = layer.weight, layer.bias
        act = ActivationKind(layer.activation)
        z = [sum((W[r, c] * h[c] for c in range(W.shape[1])), 0.0) + b[r] for r in range(W.shape[0])]
        if act is ActivationKind.RELU:
            h = [_dual.relu(v) for v in z]
        elif act is ActivationKind.RELU_SQUARED:
            h = [_dual.relu_squared(v) for v in z]
        else:
            h = z
    return h[0]


def dual_gradient(model, x) -> np.ndarray:
    """Pointwise gradient from d scalar dual-number passes (slow reference)."""
    x = np.asarray(x, dtype=np.float64)
    return np.array([_dual_forward(model, _dual.seed(x, i)).tangent for i in range(x.size)])


def dual_laplacian(model, x) -> float:
    """Pointwise Laplacian from d nested dual passes (slow reference)."""
    x = np.asarray(x, dtype=np.float64)
    total = 0.0
    for i in range(x.size):
        out = _dual_forward(model, _dual.seed(x, i, inner=i))
        total += float(out.tangent.tangent)
    return total


class ParamGradient(NamedTuple):
    loss: float
    gradient: list[tuple[np.ndarray, np.ndarray]]

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([gw.ravel(), gb.ravel()]) for gw, gb in self.gradient])


def param_gradient(model, loss_fn: Callable[[list[LayerParams]], Var]) -> ParamGradient:
    """Value and parameter gradient of a scalar loss built by ``loss_fn``.

    ``loss_fn`` receives the layer parameters as tape nodes and must return a
    scalar node; it may call :func:`propagate` at any order.
    """
    tape = Tape()
    leaves = []
    params = []
    for W, b, act in layer_params(model):
        wv, bv = tape.var(W), tape.var(b)
        leaves += [wv, bv]
        params.append((wv, bv, act))
    loss = loss_fn(params)
    grads = tape.backward(loss, leaves)
    pairs = [(grads[i], grads[i + 1]) for i in range(0, len(grads), 2)]
    return ParamGradient(float(loss.value), pairs)
