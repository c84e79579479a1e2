"""H^0 / H^1 / H^2 regression losses, risks, and the supervised trainer."""

from __future__ import annotations

import csv
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff.derivatives import layer_params, propagate
from .autodiff.tape import reduce_sum, square, value_of
from .errors import ContractError
from .optim import TrainConfig, TrainResult, minimize
from .quadrature import QuadratureSpec, cube_rule


@dataclass(frozen=True)
class SobolevSample:
    x: np.ndarray
    value: float
    grad: np.ndarray | None = None
    lap: float | None = None


@dataclass(frozen=True, eq=False)
class SobolevDataset:
    """Column-stored samples: X (M, d), values (M,), grads (M, d), laps (M,)."""

    X: np.ndarray
    values: np.ndarray
    grads: np.ndarray | None = None
    laps: np.ndarray | None = None

    def __post_init__(self) -> None:
        m = self.X.shape[0]
        if self.values.shape != (m,):
            raise ContractError("values must have one entry per point")
        if self.grads is not None and self.grads.shape != self.X.shape:
            raise ContractError("grads must have shape (M, d)")
        if self.laps is not None and self.laps.shape != (m,):
            raise ContractError("laps must have one entry per point")
        if m and (np.any(self.X < 0.0) or np.any(self.X > 1.0)):
            raise ContractError("sample points must lie in [0,1]^d")

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def require(self, k: int) -> None:
        if k >= 1 and self.grads is None:
            raise ContractError(f"loss order {k} needs the 'grad' target field")
        if k == 2 and self.laps is None:
            raise ContractError("loss order 2 needs the 'lap' target field")

    def subset(self, idx) -> SobolevDataset:
        return SobolevDataset(
            self.X[idx],
            self.values[idx],
            None if self.grads is None else self.grads[idx],
            None if self.laps is None else self.laps[idx],
        )

    @classmethod
    def from_samples(cls, samples: Sequence[SobolevSample]) -> SobolevDataset:
        if not samples:
            raise ContractError("empty sample set")
        X = np.array([np.asarray(s.x, dtype=np.float64) for s in samples])
        values = np.array([s.value for s in samples], dtype=np.float64)
        grads = None if any(s.grad is None for s in samples) else np.array([s.grad for s in samples], dtype=np.float64)
        laps = None if any(s.lap is None for s in samples) else np.array([s.lap for s in samples], dtype=np.float64)
        return cls(X, values, grads, laps)

    def samples(self) -> Iterable[SobolevSample]:
        for i in range(len(self)):
            yield SobolevSample(
                self.X[i],
                float(self.values[i]),
                None if self.grads is None else self.grads[i],
                None if self.laps is None else float(self.laps[i]),
            )

    @staticmethod
    def concat(parts: Sequence[SobolevDataset]) -> SobolevDataset:
        def cat(name):
            cols = [getattr(p, name) for p in parts]
            return None if any(c is None for c in cols) else np.concatenate(cols)

        return SobolevDataset(cat("X"), cat("values"), cat("grads"), cat("laps"))

    # CSV: header x1..xd, f, [g1..gd], [lap]
    def to_csv(self, path: str | Path) -> None:
        d = self.d
        header = [f"x{i + 1}" for i in range(d)] + ["f"]
        cols = [self.X, self.values[:, None]]
        if self.grads is not None:
            header += [f"g{i + 1}" for i in range(d)]
            cols.append(self.grads)
        if self.laps is not None:
            header.append("lap")
            cols.append(self.laps[:, None])
        table = np.hstack(cols)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in table:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path: str | Path) -> SobolevDataset:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], np.array(rows[1:], dtype=np.float64).reshape(len(rows) - 1, len(rows[0]))
        xs = [i for i, h in enumerate(header) if h.startswith("x")]
        gs = [i for i, h in enumerate(header) if h.startswith("g")]
        if "f" not in header or not xs:
            raise ContractError(f"dataset header must contain x1..xd and f, got {header}")
        if gs and len(gs) != len(xs):
            raise ContractError("gradient columns must match the input dimension")
        return cls(
            body[:, xs],
            body[:, header.index("f")],
            body[:, gs] if gs else None,
            body[:, header.index("lap")] if "lap" in header else None,
        )


@dataclass(frozen=True)
class AnalyticTarget:
    """Target f with vectorised value, gradient and Laplacian callables on (M, d) arrays."""

    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    laplacian: Callable[[np.ndarray], np.ndarray] | None = None
    hessian: Callable[[np.ndarray], np.ndarray] | None = None

    def dataset(self, X: np.ndarray, k: int = 2) -> SobolevDataset:
        grads = self.grad(X) if k >= 1 and self.grad is not None else None
        laps = self.laplacian(X) if k >= 2 and self.laplacian is not None else None
        return SobolevDataset(X, np.asarray(self.value(X), dtype=np.float64), grads, laps)


@dataclass(frozen=True)
class RiskValue:
    k: int
    value: float
    m: int


def h_k_terms(params, data: SobolevDataset, k: int):
    """Per-point h_k as a node or array of shape (M,)."""
    data.require(k)
    jet = propagate(params, data.X, order=k)
    h = square(jet.value - data.values)
    if k == 1:
        h = h + reduce_sum(square(jet.grad - data.grads), axis=1)
    elif k == 2:
        h = h + square(jet.laplacian - data.laps)
    return h


def h_k(x, sample: SobolevSample, model, k: int) -> float:
    """Pointwise loss at one sample.

    k=0: |f - phi|^2; k=1 adds |grad(f - phi)|^2; k=2 adds |Lap(f - phi)|^2.
    """
    data = SobolevDataset.from_samples([SobolevSample(np.asarray(x, dtype=np.float64), sample.value, sample.grad, sample.lap)])
    return float(value_of(h_k_terms(layer_params(model), data, k))[0])


def pointwise_losses(model, data: SobolevDataset, k: int) -> np.ndarray:
    return value_of(h_k_terms(layer_params(model), data, k))


def _as_dataset(samples) -> SobolevDataset:
    if isinstance(samples, SobolevDataset):
        return samples
    return SobolevDataset.from_samples(list(samples))


def empirical_risk(model, samples, k: int) -> RiskValue:
    """Mean of h_k over the samples."""
    data = _as_dataset(samples)
    if len(data) == 0:
        raise ContractError("empirical risk of an empty sample set")
    return RiskValue(k, float(np.mean(pointwise_losses(model, data, k))), len(data))


def continuous_risk(model, target: AnalyticTarget, k: int, quad: QuadratureSpec | None = None) -> RiskValue:
    """Quadrature estimate of the integral of h_k over [0,1]^d."""
    quad = quad or QuadratureSpec.default(model.d)
    X, w = cube_rule(quad, model.d)
    h = pointwise_losses(model, target.dataset(X, k), k)
    return RiskValue(k, float(np.dot(w, h)), X.shape[0])


def train(model, samples, config: TrainConfig) -> TrainResult:
    """Minimise the empirical H^k risk with Adam.

    Full batch up to ``config.batch_size`` samples (or always when it is
    None); otherwise reshuffled minibatches drawn from ``config.seed``.
    """
    data = _as_dataset(samples)
    if len(data) == 0:
        raise ContractError("training needs at least one sample")
    data.require(config.k)
    k = config.k
    full = config.batch_size is None or len(data) <= config.batch_size
    if full:
        return minimize(model, lambda p, it: h_k_terms(p, data, k).mean(), config)

    rng = np.random.default_rng(config.seed)
    bs = config.batch_size
    per_epoch = len(data) // bs
    perms: dict[int, np.ndarray] = {}

    def builder(p, it):
        epoch, slot = divmod(it, per_epoch)
        if epoch not in perms:
            perms.clear()
            perms[epoch] = rng.permutation(len(data))
        idx = perms[epoch][slot * bs : (slot + 1) * bs]
        return h_k_terms(p, data.subset(idx), k).mean()

    return minimize(model, builder, config, full_loss=lambda m: empirical_risk(m, data, k).value)
