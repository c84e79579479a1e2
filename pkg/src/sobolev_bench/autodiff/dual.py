"""Scalar dual numbers for forward-mode directional derivatives.

A ``DualValue`` whose primal and tangent are themselves ``DualValue`` objects
carries second derivatives (forward-over-forward), which is how the
pointwise Laplacian oracle in the tests is assembled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

Number = Union[float, "DualValue"]


def _primal(x: Number) -> float:
    while isinstance(x, DualValue):
        x = x.primal
    return float(x)


@dataclass(frozen=True)
class DualValue:
    primal: Number
    tangent: Number = 0.0

    def __add__(self, other: Number) -> DualValue:
        if isinstance(other, DualValue):
            return DualValue(self.primal + other.primal, self.tangent + other.tangent)
        return DualValue(self.primal + other, self.tangent)

    __radd__ = __add__

    def __neg__(self) -> DualValue:
        return DualValue(-self.primal, -self.tangent)

    def __sub__(self, other: Number) -> DualValue:
        return self + (-other)

    def __rsub__(self, other: Number) -> DualValue:
        return (-self) + other

    def __mul__(self, other: Number) -> DualValue:
        if isinstance(other, DualValue):
            return DualValue(
                self.primal * other.primal,
                self.primal * other.tangent + self.tangent * other.primal,
            )
        return DualValue(self.primal * other, self.tangent * other)

    __rmul__ = __mul__


def relu(x: Number) -> Number:
    if not isinstance(x, DualValue):
        return x if x > 0.0 else 0.0 * x
    # kink convention: derivative 0 at exactly 0
    if _primal(x.primal) > 0.0:
        return x
    return DualValue(0.0 * x.primal, 0.0 * x.tangent)


def relu_squared(x: Number) -> Number:
    r = relu(x)
    return r * r


def seed(values, direction: int, inner: int | None = None) -> list[DualValue]:
    """Dual inputs with unit tangent on coordinate ``direction``.

    With ``inner`` given, returns nested duals seeding coordinate ``inner`` on
    the inner level and ``direction`` on the outer level, so that
    ``out.tangent.tangent`` is the mixed second partial.
    """
    out = []
    for i, v in enumerate(values):
        if inner is None:
            out.append(DualValue(float(v), 1.0 if i == direction else 0.0))
        else:
            p = DualValue(float(v), 1.0 if i == inner else 0.0)
            t = DualValue(1.0 if i == direction else 0.0, 0.0)
            out.append(DualValue(p, t))
    return out
