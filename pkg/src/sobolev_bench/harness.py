"""Depth-vs-width experiments: the product-of-ReLU-nets target, the two-regime table and scaling sweeps."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError
from .networks import ArchitectureFamily, build, param_count
from .optim import TrainConfig
from .sobolev import SobolevDataset, empirical_risk, train

log = logging.getLogger(__name__)

TARGET_UNITS = 1000


@dataclass(frozen=True, eq=False)
class ReluFactor:
    """x -> sum_i a_i relu(w_i . x + b_i)."""

    w: np.ndarray  # (n, d)
    b: np.ndarray  # (n,)
    a: np.ndarray  # (n,)

    def value(self, X: np.ndarray) -> np.ndarray:
        return np.maximum(X @ self.w.T + self.b, 0.0) @ self.a

    def grad(self, X: np.ndarray) -> np.ndarray:
        active = (X @ self.w.T + self.b > 0.0).astype(np.float64)
        return (active * self.a) @ self.w

    def lipschitz(self) -> float:
        return float(np.sum(np.abs(self.a) * np.linalg.norm(self.w, axis=1)))

    def sup_bound(self) -> float:
        """Upper bound on |value| over [0,1]^d: preactivations peak at a corner."""
        d = self.w.shape[1]
        corners = np.array(np.meshgrid(*([[0.0, 1.0]] * d), indexing="ij")).reshape(d, -1).T
        peak = np.max(np.maximum(corners @ self.w.T + self.b, 0.0), axis=0)
        return float(np.sum(np.abs(self.a) * peak))


def _factor(rng: np.random.Generator, n: int, d: int) -> ReluFactor:
    hb = 1.0 / math.sqrt(d)
    ob = 1.0 / math.sqrt(n)
    w = rng.uniform(-hb, hb, size=(n, d))
    b = rng.uniform(-hb, hb, size=n)
    a = rng.uniform(-ob, ob, size=n)
    return ReluFactor(w, b, a)


@dataclass(frozen=True, eq=False)
class TargetFunction:
    """f(x) = F1(x) * F2(x) with two random one-hidden-layer ReLU factors.

    Without a second factor f = F1, which a one-hidden-layer ReLU net of at
    least the same width represents exactly.
    """

    first: ReluFactor
    second: ReluFactor | None
    seed: int

    @property
    def d(self) -> int:
        return self.first.w.shape[1]

    def value(self, X: np.ndarray) -> np.ndarray:
        if self.second is None:
            return self.first.value(X)
        return self.first.value(X) * self.second.value(X)

    def grad(self, X: np.ndarray) -> np.ndarray:
        """a.e. gradient, product rule with the relu'(0) = 0 convention."""
        if self.second is None:
            return self.first.grad(X)
        f1, f2 = self.first.value(X), self.second.value(X)
        return f2[:, None] * self.first.grad(X) + f1[:, None] * self.second.grad(X)

    def lipschitz_bound(self) -> float:
        if self.second is None:
            return self.first.lipschitz()
        return self.first.sup_bound() * self.second.lipschitz() + self.second.sup_bound() * self.first.lipschitz()

    def dataset(self, X: np.ndarray, k: int = 0) -> SobolevDataset:
        return SobolevDataset(X, self.value(X), self.grad(X) if k >= 1 else None)


def make_target(seed: int, n: int = TARGET_UNITS, d: int = 2, factors: int = 2) -> TargetFunction:
    if factors not in (1, 2):
        raise ContractError(f"factors must be 1 or 2, got {factors}")
    rng = np.random.default_rng(seed)
    first = _factor(rng, n, d)
    return TargetFunction(first, _factor(rng, n, d) if factors == 2 else None, seed)


@dataclass(frozen=True)
class Regime:
    tag: str
    train_size: int
    test_size: int = 10000


REGIMES = (Regime("large", 10000), Regime("small", 1000))

ARCHITECTURES = {
    "shallow": ArchitectureFamily("wenn", 20, width=20, depth=1),
    "deep": ArchitectureFamily("denn", 4, width=10, depth=4),
}


@dataclass(frozen=True)
class HarnessConfig:
    """Training budget and bookkeeping shared by every trial of a run."""

    iterations: int = 5000
    lr: float = 1e-3
    batch_size: int | None = None  # full batch
    target_seed: int = 0
    target_units: int = TARGET_UNITS
    target_factors: int = 2
    threads: int = 1
    record_timing: bool = False

    def __post_init__(self) -> None:
        if self.threads < 1:
            raise ContractError("threads must be >= 1")

    def target(self) -> TargetFunction:
        return make_target(self.target_seed, self.target_units, factors=self.target_factors)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(lr=self.lr, iterations=self.iterations, batch_size=self.batch_size, seed=seed, k=0)


@dataclass(frozen=True)
class TrialReport:
    arch: str
    regime: str
    seed: int
    test_mse: float
    train_mse: float
    params: int
    iterations: int
    failed: bool = False
    failed_at: int | None = None
    wall_time: float = 0.0


def _draw(target: TargetFunction, seed: int, salt: int, m: int) -> SobolevDataset:
    rng = np.random.default_rng([seed, salt])
    return target.dataset(rng.uniform(0.0, 1.0, size=(m, target.d)))


def _regime_data(target: TargetFunction, seed: int, regime: Regime) -> tuple[SobolevDataset, SobolevDataset]:
    salt = REGIMES.index(regime) if regime in REGIMES else regime.train_size
    return _draw(target, seed, 2 * salt, regime.train_size), _draw(target, seed, 2 * salt + 1, regime.test_size)


def run_trial(arch: str, family: ArchitectureFamily, regime: Regime, seed: int, config: HarnessConfig) -> TrialReport:
    target = config.target()
    train_set, test_set = _regime_data(target, seed, regime)
    model = build(family, target.d, seed)
    t0 = time.perf_counter()
    result = train(model, train_set, config.train_config(seed))
    elapsed = time.perf_counter() - t0
    return TrialReport(
        arch=arch,
        regime=regime.tag,
        seed=seed,
        test_mse=empirical_risk(result.model, test_set, 0).value,
        train_mse=empirical_risk(result.model, train_set, 0).value,
        params=param_count(model),
        iterations=len(result.trace),
        failed=result.failed,
        failed_at=result.failed_at,
        wall_time=elapsed,
    )


def _run_all(tasks: list[tuple], threads: int) -> list:
    """Run ``run_trial`` over tasks, returning results in task order."""
    if threads <= 1 or len(tasks) <= 1:
        return [run_trial(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(run_trial, *t) for t in tasks]
        return [f.result() for f in futures]


@dataclass(frozen=True)
class AggregateRow:
    arch: str
    regime: str
    mean: float
    std: float
    n_ok: int
    n_failed: int


@dataclass
class Table2Result:
    trials: list[TrialReport]
    rows: list[AggregateRow]
    config: HarnessConfig = field(default_factory=HarnessConfig)

    def row(self, arch: str, regime: str) -> AggregateRow:
        return next(r for r in self.rows if r.arch == arch and r.regime == regime)

    def orderings(self) -> dict[str, bool]:
        """Whether each regime shows the expected ranking of mean test MSE."""
        return {
            "large": self.row("deep", "large").mean < self.row("shallow", "large").mean,
            "small": self.row("shallow", "small").mean < self.row("deep", "small").mean,
        }

    def render(self) -> str:
        lines = [f"{'network':<30}" + "".join(f"{r.tag + ' data':>34}" for r in REGIMES)]
        for arch, fam in ARCHITECTURES.items():
            widths, _ = fam.layout()
            label = f"{arch} (depth {len(widths)}, width {widths[0]})"
            cells = []
            for reg in REGIMES:
                r = self.row(arch, reg.tag)
                cell = f"mean {r.mean:.3e} std {r.std:.2e}"
                if r.n_failed:
                    cell += f" ({r.n_failed} failed)"
                cells.append(f"{cell:>34}")
            lines.append(f"{label:<30}" + "".join(cells))
        return "\n".join(lines)


def aggregate(trials: Sequence[TrialReport]) -> list[AggregateRow]:
    """Mean and population std (ddof=0) of test MSE per (arch, regime), failed trials excluded."""
    rows = []
    for arch in ARCHITECTURES:
        for reg in REGIMES:
            group = [t for t in trials if t.arch == arch and t.regime == reg.tag]
            ok = np.array([t.test_mse for t in group if not t.failed and math.isfinite(t.test_mse)])
            mean = float(np.mean(ok)) if ok.size else math.nan
            std = float(np.std(ok)) if ok.size else math.nan
            rows.append(AggregateRow(arch, reg.tag, mean, std, int(ok.size), len(group) - int(ok.size)))
    return rows


def run_table2(seeds: Sequence[int], config: HarnessConfig = HarnessConfig()) -> Table2Result:
    """Train both architectures in both regimes for every seed on one fixed target."""
    seeds = [int(s) for s in seeds]
    if len(seeds) < 3:
        raise ContractError(f"the two-regime table needs at least 3 seeds, got {len(seeds)}")
    tasks = [(arch, fam, reg, s, config) for s in seeds for reg in REGIMES for arch, fam in ARCHITECTURES.items()]
    trials = _run_all(tasks, config.threads)
    for t in trials:
        if t.failed:
            log.warning("trial %s/%s seed %d diverged at iteration %s", t.arch, t.regime, t.seed, t.failed_at)
    return Table2Result(trials, aggregate(trials), config)


TRIAL_COLUMNS = ["arch", "regime", "seed", "params", "iterations", "train_mse", "test_mse", "failed", "failed_at", "wall_time"]
TABLE2_COLUMNS = ["arch", "regime", "mean_test_mse", "std_test_mse", "n_ok", "n_failed"]


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else str(x)


def _write_table(path: str | Path, comment: str, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    Path(path).write_text(buf.getvalue())


def read_table(path: str | Path) -> list[dict]:
    """Rows of a CSV written by this module (the leading comment line is skipped)."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def write_trials_csv(path: str | Path, trials: Sequence[TrialReport], record_timing: bool = False) -> None:
    comment = (
        "arch: shallow|deep; regime: large|small; seed: trial seed; params: parameter count; "
        "iterations: steps taken; train_mse/test_mse: mean squared error; failed: 1 if diverged; "
        "failed_at: divergence step; wall_time: seconds (blank unless timing is recorded)"
    )
    rows = []
    for t in trials:
        d = asdict(t)
        d["wall_time"] = t.wall_time if record_timing else None
        rows.append([d[c] for c in TRIAL_COLUMNS])
    _write_table(path, comment, TRIAL_COLUMNS, rows)


def write_table2_csv(path: str | Path, rows: Sequence[AggregateRow]) -> None:
    comment = "mean/std (ddof=0) of test MSE over non-failed trials; n_ok/n_failed: trial counts"
    _write_table(
        path, comment, TABLE2_COLUMNS, [[r.arch, r.regime, r.mean, r.std, r.n_ok, r.n_failed] for r in rows]
    )


@dataclass(frozen=True)
class ScalingPoint:
    value: float
    params: int
    mean: float
    std: float
    risks: tuple[float, ...]


@dataclass
class ScalingResult:
    axis: str
    points: list[ScalingPoint]
    slope: float
    intercept: float


def fit_loglog(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope and intercept of log y against log x."""
    slope, intercept = np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)
    return float(slope), float(intercept)


def check_grid(grid: Sequence[float]) -> list[float]:
    values = [float(g) for g in grid]
    if len(values) < 4:
        raise ContractError(f"scaling grid needs at least 4 points, got {len(values)}")
    if min(values) <= 0:
        raise ContractError("scaling grid values must be positive")
    if max(values) / min(values) < 10.0:
        raise ContractError("refusing an ill-conditioned fit: the grid must span at least one decade")
    return values


@dataclass(frozen=True)
class ScalingConfig:
    """Fixed parameters of a sweep: the architecture for an M sweep, the sample count for a W sweep."""

    family: str = "wenn"
    width: int | None = 20
    depth: int | None = 1
    train_size: int = 1000
    test_size: int = 10000


def _scaling_task(axis: str, value: float, fixed: ScalingConfig) -> tuple[str, ArchitectureFamily, Regime]:
    if axis == "M":
        fam = ArchitectureFamily(fixed.family, fixed.width or fixed.depth or 1, width=fixed.width, depth=fixed.depth)
        return fixed.family, fam, Regime(f"M={int(value)}", int(value), fixed.test_size)
    size = int(value)
    if fixed.family == "wenn":
        fam = ArchitectureFamily("wenn", size, depth=fixed.depth)
    else:
        fam = ArchitectureFamily(fixed.family, size, width=fixed.width)
    return fixed.family, fam, Regime(f"M={fixed.train_size}", fixed.train_size, fixed.test_size)


def run_scaling(
    axis: str,
    grid: Sequence[float],
    seeds: Sequence[int],
    fixed: ScalingConfig = ScalingConfig(),
    config: HarnessConfig = HarnessConfig(),
) -> ScalingResult:
    """Sweep the train-set size (axis M) or the family size (axis W) and fit a log-log slope.

    For axis W the slope is fitted against the exact parameter count.
    """
    if axis not in ("M", "W"):
        raise ContractError(f"axis must be 'M' or 'W', got {axis!r}")
    values = check_grid(grid)
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ContractError("at least one seed is required")
    tasks = []
    for v in values:
        arch, fam, reg = _scaling_task(axis, v, fixed)
        tasks += [(arch, fam, reg, s, config) for s in seeds]
    reports = _run_all(tasks, config.threads)
    points = []
    for i, v in enumerate(values):
        chunk = reports[i * len(seeds) : (i + 1) * len(seeds)]
        risks = tuple(t.test_mse for t in chunk)
        ok = np.array([r for r, t in zip(risks, chunk) if not t.failed and math.isfinite(r)])
        mean = float(np.mean(ok)) if ok.size else math.nan
        std = float(np.std(ok)) if ok.size else math.nan
        points.append(ScalingPoint(v, chunk[0].params, mean, std, risks))
    xs = [p.value if axis == "M" else p.params for p in points]
    good = [(x, p.mean) for x, p in zip(xs, points) if math.isfinite(p.mean) and p.mean > 0]
    slope, intercept = fit_loglog(*zip(*good)) if len(good) >= 2 else (math.nan, math.nan)
    return ScalingResult(axis, points, slope, intercept)


SCALING_COLUMNS = ["axis", "value", "params", "mean_test_mse", "std_test_mse", "slope"]


def write_scaling_csv(path: str | Path, result: ScalingResult) -> None:
    comment = (
        "axis: M (train size) or W (family size); value: grid point; params: parameter count; "
        "mean/std (ddof=0) test MSE over seeds; slope: fitted log-log slope (same on every row)"
    )
    rows = [[result.axis, p.value, p.params, p.mean, p.std, result.slope] for p in result.points]
    _write_table(path, comment, SCALING_COLUMNS, rows)
