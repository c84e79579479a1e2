"""Adaptive-moment gradient descent over a model's flat parameter vector."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .autodiff.derivatives import param_gradient
from .errors import InvalidConfigError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    iterations: int = 1000
    batch_size: int | None = 4096  # None: always full batch
    seed: int = 0
    k: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr_decay: float = 1.0  # multiplicative decay applied over the whole budget

    def __post_init__(self) -> None:
        if not self.lr > 0:
            raise InvalidConfigError(f"step size must be > 0, got {self.lr}")
        if self.iterations < 0:
            raise InvalidConfigError(f"iteration budget must be >= 0, got {self.iterations}")
        if self.k not in (0, 1, 2):
            raise InvalidConfigError(f"loss order must be 0, 1 or 2, got {self.k}")
        if self.batch_size is not None and self.batch_size < 1:
            raise InvalidConfigError("batch size must be >= 1")
        if not 0 < self.lr_decay <= 1:
            raise InvalidConfigError("lr_decay must lie in (0, 1]")


@dataclass
class TrainResult:
    model: object
    trace: list[float] = field(default_factory=list)
    best_loss: float = math.inf
    best_iteration: int = -1
    failed: bool = False
    failed_at: int | None = None


class Adam:
    def __init__(self, size: int, lr: float, beta1: float, beta2: float, eps: float) -> None:
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray, lr: float | None = None) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1**self.t)
        vhat = self.v / (1 - self.beta2**self.t)
        return theta - (self.lr if lr is None else lr) * mhat / (np.sqrt(vhat) + self.eps)


def minimize(
    model,
    loss_builder: Callable[[list, int], object],
    config: TrainConfig,
    full_loss: Callable[[object], float] | None = None,
) -> TrainResult:
    """Run ``config.iterations`` Adam steps on ``loss_builder(params, it)``.

    The trace records the loss at the parameters before each step. The
    returned model is the best snapshot seen, so its loss never exceeds the
    initial one. ``full_loss`` re-scores the final iterate (needed when the
    per-step loss is on a minibatch).
    """
    theta = model.parameters()
    result = TrainResult(model=model)
    if config.iterations == 0:
        return result
    opt = Adam(theta.size, config.lr, config.beta1, config.beta2, config.eps)
    current = model
    gamma = config.lr_decay ** (1.0 / max(1, config.iterations))
    for it in range(config.iterations):
        with np.errstate(over="ignore", invalid="ignore"):  # divergence is detected below
            pg = param_gradient(current, lambda p: loss_builder(p, it))
        if not math.isfinite(pg.loss) or not np.all(np.isfinite(pg.flat())):
            result.failed, result.failed_at = True, it
            log.warning("non-finite loss at iteration %d; keeping best snapshot", it)
            break
        result.trace.append(pg.loss)
        if pg.loss < result.best_loss:
            result.best_loss, result.best_iteration, result.model = pg.loss, it, current
        theta = opt.step(theta, pg.flat(), config.lr * gamma**it)
        current = current.with_parameters(theta)
    else:
        if full_loss is None:
            final = float(param_gradient(current, lambda p: loss_builder(p, config.iterations)).loss)
            if math.isfinite(final) and final < result.best_loss:
                result.best_loss, result.best_iteration, result.model = final, config.iterations, current
    if full_loss is not None:
        # minibatch losses are not comparable across steps; rescore on the full objective
        scored = [(full_loss(model), -1, model), (full_loss(result.model), result.best_iteration, result.model)]
        if not result.failed:
            scored.append((full_loss(current), config.iterations, current))
        scored = [s for s in scored if math.isfinite(s[0])]
        best = min(scored, key=lambda s: s[0])
        result.best_loss, result.best_iteration, result.model = best
    return result
