"""Deep-Ritz and PINN losses for the Poisson problem -Lap u = f, and their trainers.

Interior and boundary integrals are taken against the uniform probability
measures of the domain and of its boundary (arclength), so the empirical
means over uniform samples are unbiased estimators of the continuous losses.
On the unit square the interior measure is plain Lebesgue measure.

A "model" here is either an :class:`MlpModel` or an :class:`AnalyticTarget`
(closed-form callables), so exact solutions can be scored directly.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .autodiff.derivatives import (
    ActivationKind,
    Jet,
    input_hessian,
    layer_params,
    propagate,
)
from .autodiff.tape import reduce_sum, square, value_of
from .errors import ContractError, InvalidConfigError
from .networks import MlpModel, param_count
from .optim import TrainConfig, TrainResult, minimize
from .quadrature import (
    DISK_CENTER,
    DISK_RADIUS,
    QuadratureSpec,
    circle_rule,
    cube_rule,
    disk_rule,
    sample_circle,
    sample_disk,
    sample_square_boundary,
    square_boundary_rule,
)
from .sobolev import AnalyticTarget

log = logging.getLogger(__name__)

DOMAINS = ("unit_square", "unit_disk_in_square")
BOUNDARY_CONDITIONS = ("dirichlet_zero", "neumann_zero")


@dataclass(frozen=True)
class PdeProblem:
    """-Lap u = f on ``domain`` with a homogeneous boundary condition.

    ``ritz_half`` switches the empirical Ritz interior term to the
    1/(2 M1) normalisation; ``ritz_mean_on`` picks the points used for the
    mean penalty of the Ritz loss (``interior`` or ``boundary``).
    """

    name: str
    domain: str
    rhs: Callable[[np.ndarray], np.ndarray]
    bc: str
    lam: float = 100.0
    exact: AnalyticTarget | None = None
    ritz_half: bool = False
    ritz_mean_on: str = "interior"

    def __post_init__(self) -> None:
        if self.domain not in DOMAINS:
            raise InvalidConfigError(f"unknown domain {self.domain!r}; expected one of {DOMAINS}")
        if self.bc not in BOUNDARY_CONDITIONS:
            raise InvalidConfigError(f"unknown boundary condition {self.bc!r}")
        if not self.lam > 0:
            raise InvalidConfigError(f"penalty lambda must be > 0, got {self.lam}")
        if self.ritz_mean_on not in ("interior", "boundary"):
            raise InvalidConfigError("ritz_mean_on must be 'interior' or 'boundary'")

    @property
    def area(self) -> float:
        return 1.0 if self.domain == "unit_square" else math.pi * DISK_RADIUS**2


@dataclass(frozen=True)
class SamplePlan:
    M1: int
    M2: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.M1 < 1 or self.M2 < 1:
            raise InvalidConfigError(f"M1 and M2 must be >= 1, got {self.M1}, {self.M2}")

    def draw(self, domain: str) -> tuple[np.ndarray, np.ndarray]:
        return sample_interior(domain, self.M1, [self.seed, 1]), sample_boundary(domain, self.M2, [self.seed, 2])


def sample_interior(domain: str, m: int, seed) -> np.ndarray:
    """m i.i.d. area-uniform points of the domain."""
    if m < 1:
        raise InvalidConfigError("sample count must be >= 1")
    rng = np.random.default_rng(seed)
    if domain == "unit_square":
        return rng.uniform(0.0, 1.0, size=(m, 2))
    if domain == "unit_disk_in_square":
        return sample_disk(m, rng)
    raise InvalidConfigError(f"unknown domain {domain!r}")


def sample_boundary(domain: str, m: int, seed) -> np.ndarray:
    """m i.i.d. arclength-uniform points of the boundary."""
    if m < 1:
        raise InvalidConfigError("sample count must be >= 1")
    rng = np.random.default_rng(seed)
    if domain == "unit_square":
        return sample_square_boundary(m, rng)
    if domain == "unit_disk_in_square":
        return sample_circle(m, rng)
    raise InvalidConfigError(f"unknown domain {domain!r}")


def interior_rule(domain: str, quad: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    return cube_rule(quad, 2) if domain == "unit_square" else disk_rule(quad)


def boundary_rule(domain: str, quad: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    return square_boundary_rule(quad) if domain == "unit_square" else circle_rule(quad)


def _jet(model, X, order: int, params=None) -> Jet:
    if isinstance(model, AnalyticTarget):
        grad = model.grad(X) if order >= 1 else None
        lap = model.laplacian(X) if order >= 2 else None
        return Jet(np.asarray(model.value(X), dtype=np.float64), grad, lap)
    return propagate(params if params is not None else layer_params(model), X, order)


def _warn_relu_only(model) -> None:
    if isinstance(model, MlpModel) and ActivationKind.RELU_SQUARED.value not in model.activations:
        warnings.warn(
            "PINN loss on a ReLU-only network: its Laplacian is 0 a.e., so the residual reduces to f^2",
            RuntimeWarning,
            stacklevel=3,
        )


def _require_bc(problem: PdeProblem, bc: str, method: str) -> None:
    if problem.bc != bc:
        raise ContractError(f"{method} needs bc={bc}, problem {problem.name!r} has bc={problem.bc}")


def _ritz_loss(model, problem: PdeProblem, X, Y, wx=None, wy=None, params=None):
    """Weighted interior energy plus squared weighted mean; weights default to sample means."""
    jet = _jet(model, X, 1, params)
    g = 0.5 * reduce_sum(square(jet.grad), axis=1) - problem.rhs(X) * jet.value
    phi = jet.value if Y is None else _jet(model, Y, 0, params).value
    if wx is None:
        scale = 0.5 if problem.ritz_half else 1.0
        energy = g.mean() * scale
        mean = phi.mean()
    else:
        energy = (g * wx).sum()
        mean = (phi * (wx if Y is None else wy)).sum()
    return energy + square(mean)


def _pinn_loss(model, problem: PdeProblem, X, Y, wx=None, wy=None, params=None):
    jet = _jet(model, X, 2, params)
    residual = square(jet.laplacian + problem.rhs(X))
    bval = square(_jet(model, Y, 0, params).value)
    if wx is None:
        return residual.mean() + problem.lam * bval.mean()
    return (residual * wx).sum() + problem.lam * (bval * wy).sum()


def ritz_empirical(model, problem: PdeProblem, plan: SamplePlan) -> float:
    """(1/M1) sum g(x_i) + (mean of phi)^2, g = |grad phi|^2 / 2 - f phi."""
    _require_bc(problem, "neumann_zero", "deep Ritz")
    X, Y = plan.draw(problem.domain)
    return float(value_of(_ritz_loss(model, problem, X, Y if problem.ritz_mean_on == "boundary" else None)))


def ritz_continuous(model, problem: PdeProblem, quad: QuadratureSpec | None = None) -> float:
    """Integral of g plus the squared integral of phi over the domain."""
    _require_bc(problem, "neumann_zero", "deep Ritz")
    X, w = interior_rule(problem.domain, quad or QuadratureSpec.default(2))
    return float(value_of(_ritz_loss(model, problem, X, None, wx=w)))


def pinn_empirical(model, problem: PdeProblem, plan: SamplePlan) -> float:
    """mean |Lap phi + f|^2 over interior samples + lam * mean phi^2 over boundary samples."""
    _require_bc(problem, "dirichlet_zero", "PINN")
    _warn_relu_only(model)
    X, Y = plan.draw(problem.domain)
    return float(value_of(_pinn_loss(model, problem, X, Y)))


def pinn_continuous(model, problem: PdeProblem, quad: QuadratureSpec | None = None) -> float:
    _require_bc(problem, "dirichlet_zero", "PINN")
    _warn_relu_only(model)
    quad = quad or QuadratureSpec.default(2)
    X, wx = interior_rule(problem.domain, quad)
    Y, wy = boundary_rule(problem.domain, quad)
    return float(value_of(_pinn_loss(model, problem, X, Y, wx, wy)))


def _hessian(model, X) -> np.ndarray:
    if isinstance(model, AnalyticTarget):
        if model.hessian is None:
            raise ContractError("H2 error of a callable model needs its Hessian")
        return model.hessian(X)
    return input_hessian(model, X)


def solution_error(model, problem: PdeProblem, norm: str = "L2", quad: QuadratureSpec | None = None, relative: bool = False) -> float:
    """Sobolev norm of phi - u* over the domain (Lebesgue measure).

    H1 adds the squared gradient gap, H2 additionally the squared Frobenius
    norm of the Hessian gap. ``relative`` divides by the same norm of u*.
    """
    if norm not in ("L2", "H1", "H2"):
        raise ContractError(f"unknown norm {norm!r}")
    exact = problem.exact
    if exact is None or (norm != "L2" and exact.grad is None) or (norm == "H2" and exact.hessian is None):
        raise ContractError(f"problem {problem.name!r} lacks the exact solution derivatives needed for {norm}")
    X, w = interior_rule(problem.domain, quad or QuadratureSpec.default(2))
    w = w * problem.area
    order = 0 if norm == "L2" else 1
    jet = _jet(model, X, order)
    ux = exact.value(X)
    gap = np.asarray(value_of(jet.value)) - ux
    err = np.dot(w, gap**2)
    ref = np.dot(w, ux**2)
    if order:
        ug = exact.grad(X)
        err += np.dot(w, np.sum((np.asarray(value_of(jet.grad)) - ug) ** 2, axis=1))
        ref += np.dot(w, np.sum(ug**2, axis=1))
    if norm == "H2":
        uh = exact.hessian(X)
        err += np.dot(w, np.sum((_hessian(model, X) - uh) ** 2, axis=(1, 2)))
        ref += np.dot(w, np.sum(uh**2, axis=(1, 2)))
    return float(math.sqrt(err / ref) if relative else math.sqrt(err))


def _sin_problem(lam: float) -> PdeProblem:
    pi = math.pi

    def u(X):
        return np.sin(pi * X[:, 0]) * np.sin(pi * X[:, 1])

    def grad(X):
        s0, s1 = np.sin(pi * X[:, 0]), np.sin(pi * X[:, 1])
        c0, c1 = np.cos(pi * X[:, 0]), np.cos(pi * X[:, 1])
        return pi * np.stack([c0 * s1, s0 * c1], 1)

    def hess(X):
        s0, s1 = np.sin(pi * X[:, 0]), np.sin(pi * X[:, 1])
        c0, c1 = np.cos(pi * X[:, 0]), np.cos(pi * X[:, 1])
        H = np.empty((X.shape[0], 2, 2))
        H[:, 0, 0] = H[:, 1, 1] = -(pi**2) * s0 * s1
        H[:, 0, 1] = H[:, 1, 0] = pi**2 * c0 * c1
        return H

    exact = AnalyticTarget(u, grad, lambda X: -2 * pi**2 * u(X), hess)
    return PdeProblem("poisson_sin_dirichlet", "unit_square", lambda X: 2 * pi**2 * u(X), "dirichlet_zero", lam, exact)


def _cos_problem(lam: float) -> PdeProblem:
    pi = math.pi

    def u(X):
        return np.cos(pi * X[:, 0]) * np.cos(pi * X[:, 1])

    def grad(X):
        s0, s1 = np.sin(pi * X[:, 0]), np.sin(pi * X[:, 1])
        c0, c1 = np.cos(pi * X[:, 0]), np.cos(pi * X[:, 1])
        return -pi * np.stack([s0 * c1, c0 * s1], 1)

    def hess(X):
        s0, s1 = np.sin(pi * X[:, 0]), np.sin(pi * X[:, 1])
        c0, c1 = np.cos(pi * X[:, 0]), np.cos(pi * X[:, 1])
        H = np.empty((X.shape[0], 2, 2))
        H[:, 0, 0] = H[:, 1, 1] = -(pi**2) * c0 * c1
        H[:, 0, 1] = H[:, 1, 0] = pi**2 * s0 * s1
        return H

    exact = AnalyticTarget(u, grad, lambda X: -2 * pi**2 * u(X), hess)
    return PdeProblem("poisson_cos_neumann", "unit_square", lambda X: 2 * pi**2 * u(X), "neumann_zero", lam, exact)


def _disk_problem(lam: float) -> PdeProblem:
    def u(X):
        return DISK_RADIUS**2 - np.sum((X - DISK_CENTER) ** 2, axis=1)

    exact = AnalyticTarget(
        u,
        lambda X: -2.0 * (X - DISK_CENTER),
        lambda X: np.full(X.shape[0], -4.0),
        lambda X: np.broadcast_to(-2.0 * np.eye(2), (X.shape[0], 2, 2)).copy(),
    )
    return PdeProblem("poisson_disk_dirichlet", "unit_disk_in_square", lambda X: np.full(X.shape[0], 4.0), "dirichlet_zero", lam, exact)


PROBLEMS = {
    "poisson_sin_dirichlet": _sin_problem,
    "poisson_cos_neumann": _cos_problem,
    "poisson_disk_dirichlet": _disk_problem,
}


def make_problem(name: str, lam: float = 100.0) -> PdeProblem:
    try:
        return PROBLEMS[name](lam)
    except KeyError:
        raise InvalidConfigError(f"unknown problem {name!r}; expected one of {sorted(PROBLEMS)}") from None


@dataclass
class PdeReport:
    trial: int
    M1: int
    M2: int
    W: int
    loss: float
    l2_err: float
    h1_err: float
    wall_time: float
    failed: bool
    result: TrainResult


def train_pde(model: MlpModel, problem: PdeProblem, method: str, plan: SamplePlan, config: TrainConfig) -> TrainResult:
    """Minimise the empirical Ritz or PINN loss on one fixed draw of samples.

    Minibatches (above ``config.batch_size`` interior points) subsample the
    interior and boundary sets in proportion.
    """
    if method not in ("ritz", "pinn"):
        raise InvalidConfigError(f"method must be 'ritz' or 'pinn', got {method!r}")
    _require_bc(problem, "neumann_zero" if method == "ritz" else "dirichlet_zero", method)
    if method == "pinn":
        _warn_relu_only(model)
    X, Y = plan.draw(problem.domain)
    mean_on_boundary = method == "ritz" and problem.ritz_mean_on == "boundary"

    def loss(p, Xb, Yb):
        if method == "pinn":
            return _pinn_loss(model, problem, Xb, Yb, params=p)
        return _ritz_loss(model, problem, Xb, Yb if mean_on_boundary else None, params=p)

    bs = config.batch_size
    if bs is None or plan.M1 <= bs:
        return minimize(model, lambda p, it: loss(p, X, Y), config)

    rng = np.random.default_rng([config.seed, 3])
    bs2 = max(1, round(bs * plan.M2 / plan.M1))

    def builder(p, it):
        ix = rng.choice(plan.M1, size=bs, replace=False)
        iy = rng.choice(plan.M2, size=min(bs2, plan.M2), replace=False)
        return loss(p, X[ix], Y[iy])

    def full(m):
        return float(value_of(loss(layer_params(m), X, Y)))

    return minimize(model, builder, config, full_loss=full)


def run_pde(model: MlpModel, problem: PdeProblem, method: str, plan: SamplePlan, config: TrainConfig, trial: int = 0) -> PdeReport:
    t0 = time.perf_counter()
    result = train_pde(model, problem, method, plan, config)
    elapsed = time.perf_counter() - t0
    trained = result.model
    final = ritz_empirical(trained, problem, plan) if method == "ritz" else pinn_empirical(trained, problem, plan)
    l2 = h1 = math.nan
    if problem.exact is not None:
        l2 = solution_error(trained, problem, "L2")
        h1 = solution_error(trained, problem, "H1")
    return PdeReport(trial, plan.M1, plan.M2, param_count(trained), final, l2, h1, elapsed, result.failed, result)


PDE_COLUMNS = ["trial", "M1", "M2", "W", "loss", "l2_err", "h1_err", "wall_time"]
