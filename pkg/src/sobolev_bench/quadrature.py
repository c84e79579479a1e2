"""Quadrature rules on [0,1]^d, the inscribed disk, and their boundaries.

Every rule returns ``(points, weights)`` with weights summing to 1, i.e. an
average against the uniform probability measure of the region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError


@dataclass(frozen=True)
class QuadratureSpec:
    """``gauss``: tensor Gauss-Legendre with ``size`` nodes per axis (d <= 3).
    ``mc``: ``size`` uniform points drawn with ``seed``."""

    kind: str = "gauss"
    size: int = 64
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("gauss", "mc"):
            raise InvalidConfigError(f"unknown quadrature kind {self.kind!r}")
        if self.size < 1:
            raise InvalidConfigError("quadrature size must be >= 1")

    @classmethod
    def default(cls, d: int) -> QuadratureSpec:
        return cls("gauss", 64) if d <= 2 else cls("mc", 2**16, 0)


def gauss_legendre_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def cube_rule(spec: QuadratureSpec, d: int) -> tuple[np.ndarray, np.ndarray]:
    if spec.kind == "mc":
        rng = np.random.default_rng(spec.seed)
        return rng.uniform(0.0, 1.0, size=(spec.size, d)), np.full(spec.size, 1.0 / spec.size)
    if d > 3:
        raise InvalidConfigError("tensor Gauss rules are limited to d <= 3; use Monte Carlo")
    x, w = gauss_legendre_01(spec.size)
    grids = np.meshgrid(*([x] * d), indexing="ij")
    wgrids = np.meshgrid(*([w] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return pts, wts


def square_boundary_rule(spec: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Arclength-uniform rule on the perimeter of [0,1]^2."""
    if spec.kind == "mc":
        return sample_square_boundary(spec.size, np.random.default_rng(spec.seed)), np.full(spec.size, 1.0 / spec.size)
    t, w = gauss_legendre_01(spec.size)
    zeros, ones = np.zeros_like(t), np.ones_like(t)
    sides = [
        np.stack([t, zeros], 1),
        np.stack([ones, t], 1),
        np.stack([t, ones], 1),
        np.stack([zeros, t], 1),
    ]
    return np.concatenate(sides), np.tile(w, 4) / 4.0


DISK_CENTER = np.array([0.5, 0.5])
DISK_RADIUS = 0.5


def disk_rule(spec: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Area-uniform rule on the disk inscribed in the unit square.

    Gauss-Legendre in r^2 against a uniform trapezoid rule in angle.
    """
    if spec.kind == "mc":
        return sample_disk(spec.size, np.random.default_rng(spec.seed)), np.full(spec.size, 1.0 / spec.size)
    s, ws = gauss_legendre_01(spec.size)
    n_theta = 2 * spec.size
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    r = DISK_RADIUS * np.sqrt(s)
    R, T = np.meshgrid(r, theta, indexing="ij")
    pts = DISK_CENTER + np.stack([R.ravel() * np.cos(T.ravel()), R.ravel() * np.sin(T.ravel())], 1)
    wts = np.repeat(ws, n_theta) / n_theta
    return pts, wts


def circle_rule(spec: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    if spec.kind == "mc":
        return sample_circle(spec.size, np.random.default_rng(spec.seed)), np.full(spec.size, 1.0 / spec.size)
    n = 4 * spec.size
    theta = 2.0 * np.pi * np.arange(n) / n
    pts = DISK_CENTER + DISK_RADIUS * np.stack([np.cos(theta), np.sin(theta)], 1)
    return pts, np.full(n, 1.0 / n)


def sample_square_boundary(m: int, rng: np.random.Generator) -> np.ndarray:
    side = rng.integers(0, 4, size=m)
    t = rng.uniform(0.0, 1.0, size=m)
    x = np.where(side == 0, t, np.where(side == 1, 1.0, np.where(side == 2, t, 0.0)))
    y = np.where(side == 0, 0.0, np.where(side == 1, t, np.where(side == 2, 1.0, t)))
    return np.stack([x, y], 1)


def sample_disk(m: int, rng: np.random.Generator) -> np.ndarray:
    r = DISK_RADIUS * np.sqrt(rng.uniform(0.0, 1.0, size=m))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=m)
    return DISK_CENTER + np.stack([r * np.cos(theta), r * np.sin(theta)], 1)


def sample_circle(m: int, rng: np.random.Generator) -> np.ndarray:
    theta = rng.uniform(0.0, 2.0 * np.pi, size=m)
    return DISK_CENTER + DISK_RADIUS * np.stack([np.cos(theta), np.sin(theta)], 1)
