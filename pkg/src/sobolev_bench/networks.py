"""Fully connected sigma_1 / sigma_2 networks and the WeNN, DeNN, DSRN families."""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff.derivatives import (
    ActivationKind,
    evaluate,
    input_gradient,
    input_laplacian,
)
from .errors import ContractError, InvalidConfigError


@dataclass(frozen=True, eq=False)
class Layer:
    weight: np.ndarray  # (rows, cols) = (N_i, N_{i-1})
    bias: np.ndarray  # (N_i,)
    activation: str = ActivationKind.RELU.value

    @property
    def rows(self) -> int:
        return self.weight.shape[0]

    @property
    def cols(self) -> int:
        return self.weight.shape[1]


@dataclass(frozen=True, eq=False)
class MlpModel:
    """phi(x) = W_{L+1} s(... s(W_1 x + b_1) ...) + b_{L+1}.

    Every layer but the last carries an activation; the last is affine with
    a single output.
    """

    layers: tuple[Layer, ...]

    def __post_init__(self) -> None:
        if not self.layers:
            raise ContractError("a model needs at least the output layer")
        prev = self.layers[0].cols
        for i, layer in enumerate(self.layers):
            if layer.cols != prev:
                raise ContractError(f"layer {i} expects {layer.cols} inputs, previous layer gives {prev}")
            if layer.bias.shape != (layer.rows,):
                raise ContractError(f"layer {i} bias has shape {layer.bias.shape}")
            prev = layer.rows
        last = self.layers[-1]
        if last.rows != 1 or last.activation != ActivationKind.IDENTITY.value:
            raise ContractError("final layer must be affine with one output")

    @property
    def d(self) -> int:
        return self.layers[0].cols

    @property
    def hidden_widths(self) -> list[int]:
        return [layer.rows for layer in self.layers[:-1]]

    @property
    def width(self) -> int:
        return max(self.hidden_widths, default=0)

    @property
    def depth(self) -> int:
        return len(self.layers) - 1

    @property
    def activations(self) -> list[str]:
        return [layer.activation for layer in self.layers]

    def parameters(self) -> np.ndarray:
        """Flattened parameter vector: per layer, weights row-major then bias."""
        return np.concatenate([np.concatenate([l.weight.ravel(), l.bias]) for l in self.layers])

    def with_parameters(self, theta: np.ndarray) -> MlpModel:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.size != param_count(self):
            raise ContractError(f"expected {param_count(self)} parameters, got {theta.size}")
        layers, pos = [], 0
        for l in self.layers:
            nw = l.weight.size
            w = theta[pos : pos + nw].reshape(l.weight.shape).copy()
            b = theta[pos + nw : pos + nw + l.rows].copy()
            pos += nw + l.rows
            layers.append(Layer(w, b, l.activation))
        return MlpModel(tuple(layers))

    def __call__(self, X) -> np.ndarray:
        return evaluate(self, X)

    # checkpoint format: {d, layers: [{rows, cols, activation, weights, bias}]}
    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "layers": [
                {
                    "rows": l.rows,
                    "cols": l.cols,
                    "activation": l.activation,
                    "weights": [float(v) for v in l.weight.ravel()],
                    "bias": [float(v) for v in l.bias],
                }
                for l in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> MlpModel:
        layers = []
        for entry in doc["layers"]:
            w = np.array(entry["weights"], dtype=np.float64).reshape(entry["rows"], entry["cols"])
            layers.append(Layer(w, np.array(entry["bias"], dtype=np.float64), entry["activation"]))
        model = cls(tuple(layers))
        if model.d != doc["d"]:
            raise ContractError(f"checkpoint declares d={doc['d']} but first layer has {model.d} inputs")
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> MlpModel:
        return cls.from_dict(json.loads(Path(path).read_text()))


def param_count(model: MlpModel) -> int:
    return sum(l.rows * l.cols + l.rows for l in model.layers)


def from_arrays(weights: Sequence, biases: Sequence, activations: Sequence[str]) -> MlpModel:
    """Model from explicit arrays; the output layer's activation must be identity."""
    layers = tuple(
        Layer(np.atleast_2d(np.asarray(w, dtype=np.float64)), np.atleast_1d(np.asarray(b, dtype=np.float64)), a)
        for w, b, a in zip(weights, biases, activations)
    )
    return MlpModel(layers)


def init_model(d: int, widths: Sequence[int], activations: Sequence[str], seed: int) -> MlpModel:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases, layer by layer."""
    rng = np.random.default_rng(seed)
    sizes = [d, *widths, 1]
    acts = [*activations, ActivationKind.IDENTITY.value]
    layers = []
    for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], acts):
        bound = 1.0 / math.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = rng.uniform(-bound, bound, size=fan_out)
        layers.append(Layer(w, b, act))
    return MlpModel(tuple(layers))


def _clog2(x: float) -> int:
    return math.ceil(math.log2(x)) if x > 1 else 0


@dataclass(frozen=True)
class ArchitectureFamily:
    """Size rule for a family.

    * ``wenn``: width N = size, depth max(1, ceil(log2 N)).
    * ``denn``: depth L = size, width max(2, ceil(log2 L)).
    * ``dsrn``: relu body of depth L = size feeding a relu^2 head of depth
      max(1, ceil(log2 L)), width max(2, ceil(log2 L)).

    ``width`` and ``depth`` override the derived values.
    """

    tag: str
    size: int
    width: int | None = None
    depth: int | None = None
    head_depth: int | None = None
    activation: str | None = None
    C1: float = 1.0
    C2: float = 1.0

    def __post_init__(self) -> None:
        if self.tag not in ("wenn", "denn", "dsrn"):
            raise InvalidConfigError(f"unknown family {self.tag!r}")
        if self.size < 1:
            raise InvalidConfigError(f"size must be >= 1, got {self.size}")
        for name in ("width", "depth", "head_depth"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise InvalidConfigError(f"{name} must be >= 1, got {v}")

    def layout(self) -> tuple[list[int], list[str]]:
        """Hidden widths and activations for this family."""
        if self.tag == "wenn":
            width = self.width or self.size
            depth = self.depth or max(1, _clog2(self.size))
            act = self.activation or ActivationKind.RELU.value
            return [width] * depth, [act] * depth
        if self.tag == "denn":
            depth = self.depth or self.size
            width = self.width or max(2, _clog2(self.size))
            act = self.activation or ActivationKind.RELU.value
            return [width] * depth, [act] * depth
        body = self.depth or self.size
        head = self.head_depth or max(1, _clog2(self.size))
        width = self.width or max(2, _clog2(self.size))
        acts = [ActivationKind.RELU.value] * body + [ActivationKind.RELU_SQUARED.value] * head
        return [width] * (body + head), acts

    def dsrn_budget(self) -> tuple[float, float]:
        """(total depth budget, head depth budget) of the class N_{6, 10(L+1)log2(4L)}."""
        total = 10 * (self.size + 1) * math.log2(4 * self.size)
        return total, 6 * math.log(total)


def build(family: ArchitectureFamily, d: int, seed: int) -> MlpModel:
    if d < 1:
        raise InvalidConfigError(f"input dimension must be >= 1, got {d}")
    widths, acts = family.layout()
    return init_model(d, widths, acts, seed)


def dsrn_split(model: MlpModel) -> tuple[int, int]:
    """(relu body depth, relu^2 head depth) of a psi_2 o psi_1 model."""
    acts = model.activations[:-1]
    body = 0
    while body < len(acts) and acts[body] == ActivationKind.RELU.value:
        body += 1
    if any(a != ActivationKind.RELU_SQUARED.value for a in acts[body:]):
        raise ContractError("model is not a relu body followed by a relu^2 head")
    return body, len(acts) - body


def satisfies_denn_class(model: MlpModel, L: int, C1: float = 1.0, C2: float = 1.0) -> bool:
    """width <= C1 log2 L and depth <= C2 L log2 L (log floored at 1)."""
    lg = max(1.0, math.log2(L))
    return model.width <= C1 * lg + 1e-12 and model.depth <= C2 * L * lg + 1e-12


@dataclass
class NormEstimate:
    value: float
    points: int
    is_lower_bound: bool = field(default=True)


def _probe_points(d: int, resolution: int, n_samples: int | None, seed: int) -> np.ndarray:
    if d <= 3 and n_samples is None:
        axis = np.linspace(0.0, 1.0, resolution)
        mesh = np.meshgrid(*([axis] * d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, 1.0, size=(n_samples or resolution**min(d, 3), d))


def sup_norm_estimate(
    model: MlpModel,
    k: int,
    resolution: int = 65,
    n_samples: int | None = None,
    seed: int = 0,
) -> NormEstimate:
    """Largest |phi|, |d_i phi| (k >= 1) and |Laplacian phi| (k = 2) over probe points.

    Tensor grid with endpoints for d <= 3, otherwise Monte Carlo with
    ``n_samples`` points. The result never exceeds the true W^{k,inf} norm.
    """
    if k not in (0, 1, 2):
        raise ContractError(f"k must be 0, 1 or 2, got {k}")
    X = _probe_points(model.d, resolution, n_samples, seed)
    best = float(np.max(np.abs(evaluate(model, X))))
    if k >= 1:
        best = max(best, float(np.max(np.abs(input_gradient(model, X)))))
    if k == 2:
        best = max(best, float(np.max(np.abs(input_laplacian(model, X)))))
    return NormEstimate(best, X.shape[0])
