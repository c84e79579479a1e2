"""Command-line entry point: ``sobolev-bench <subcommand> [flags]``.

Every subcommand accepts ``--config FILE`` (a JSON object keyed by flag
names with dashes replaced by underscores); explicit flags override file
values and unknown keys are rejected. Results go to ``--out`` together with
a ``manifest.json`` run record.

Exit codes: 0 ok, 2 bad input, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import platform
import sys
import time
from dataclasses import fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import bounds as bd
from .errors import ContractError, InvalidConfigError

log = logging.getLogger("sobolev_bench")

EXIT_OK, EXIT_INPUT, EXIT_IO = 0, 2, 3
THREADS_ENV = "SOBOLEV_BENCH_THREADS"


def _default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InvalidConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


# name -> (type, default, help); the same table drives --help, config files and defaults
Option = tuple


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    return str(v).lower() in ("1", "true", "yes", "on")


QUERY_OPTIONS = {
    "W": (float, None, "parameter count (>= 3)"),
    "M": (float, None, "sample count (>= 2)"),
    "n": (float, None, "target smoothness (> k)"),
    "d": (int, None, "input dimension"),
    "k": (int, 0, "loss order 0, 1 or 2"),
    "constants": (str, None, "JSON file with BoundConstants overrides"),
    "tau": (float, None, "transitional band half-width factor (overrides constants)"),
}

SUBCOMMANDS: dict[str, dict[str, Option]] = {
    "advise": dict(QUERY_OPTIONS),
    "bounds": {
        **QUERY_OPTIONS,
        "M2": (float, None, "boundary sample count for the PDE bounds (default: M)"),
        "N": (float, None, "width for general_fc_bound / approximation_rate / pdim"),
        "L": (float, None, "depth for general_fc_bound / approximation_rate / pdim"),
        "no_logs": (_bool, False, "drop every log factor (pure power laws)"),
    },
    "curve": {
        "k": (int, 0, "loss order"),
        "n": (float, None, "target smoothness"),
        "d": (int, None, "input dimension"),
        "W": (str, "4:4096:log", "W grid: 'a:b:log[:num]', 'a:b:lin:num' or a comma list"),
    },
    "train": {
        "data": (str, None, "training CSV (x1..xd,f[,g1..gd][,lap]); default: sample the target"),
        "target": (str, "product_relu", "analytic target when no data file: product_relu | quadratic"),
        "target_seed": (int, 0, "seed of the product_relu target"),
        "d": (int, 2, "input dimension of a generated dataset"),
        "M": (int, 1000, "generated training set size"),
        "test_size": (int, 10000, "generated test set size"),
        "k": (int, 0, "Sobolev loss order"),
        "family": (str, "wenn", "wenn | denn | dsrn"),
        "size": (int, 20, "family size parameter"),
        "width": (int, None, "width override"),
        "depth": (int, None, "depth override"),
        "activation": (str, None, "activation override: relu | relu_squared"),
        "iterations": (int, 1000, "optimizer steps"),
        "lr": (float, 1e-3, "step size"),
        "batch_size": (int, 4096, "minibatch size above which training is stochastic"),
    },
    "pde": {
        "problem": (str, "poisson_sin_dirichlet", "poisson_sin_dirichlet | poisson_cos_neumann | poisson_disk_dirichlet"),
        "method": (str, "pinn", "pinn | ritz"),
        "M1": (int, 4096, "interior sample count"),
        "M2": (int, 1024, "boundary sample count"),
        "lam": (float, 100.0, "PINN boundary penalty"),
        "width": (int, 30, "hidden width"),
        "depth": (int, 2, "hidden depth"),
        "activation": (str, "relu_squared", "hidden activation"),
        "iterations": (int, 2000, "optimizer steps"),
        "lr": (float, 3e-3, "initial step size"),
        "lr_decay": (float, 0.1, "total multiplicative step-size decay over the run"),
        "batch_size": (int, 4096, "interior minibatch size above which training is stochastic"),
        "trials": (int, 1, "independent trials (seed, seed+1, ...)"),
        "ritz_half": (_bool, False, "use the 1/(2 M1) empirical Ritz normalisation"),
        "ritz_mean_on": (str, "interior", "points for the Ritz mean penalty: interior | boundary"),
    },
    "table2": {
        "seeds": (str, "1,2,3", "comma-separated trial seeds (>= 3)"),
        "iterations": (int, 5000, "full-batch optimizer steps per trial"),
        "lr": (float, 1e-3, "step size"),
        "target_seed": (int, 0, "seed of the fixed target"),
    },
    "scaling": {
        "axis": (str, "M", "M (train size) or W (family size)"),
        "grid": (str, None, "comma-separated axis values (>= 4, spanning >= one decade)"),
        "seeds": (str, "1,2,3", "comma-separated trial seeds"),
        "family": (str, "wenn", "architecture family"),
        "width": (int, 20, "fixed width (M sweep) / denn width (W sweep)"),
        "depth": (int, 1, "fixed depth (M sweep) / wenn depth (W sweep)"),
        "train_size": (int, 1000, "fixed train size for a W sweep"),
        "test_size": (int, 10000, "test set size"),
        "iterations": (int, 2000, "full-batch optimizer steps per trial"),
        "lr": (float, 1e-3, "step size"),
        "target_seed": (int, 0, "seed of the fixed target"),
    },
}

COMMON_OPTIONS = {
    "seed": (int, 0, "global seed"),
    "out": (str, ".", "output directory"),
    "record_timing": (_bool, False, "write wall times into result CSVs (breaks byte-identical re-runs)"),
}

HELP = {
    "advise": "recommend a deeper or a wider network for (W, M, n, d, k)",
    "bounds": "evaluate every bound formula for a query",
    "curve": "emit crossover curve M = W^((2n+2d-2k)/d) as CSV",
    "train": "supervised Sobolev training of one network",
    "pde": "solve a Poisson problem with PINN or deep Ritz",
    "table2": "depth-vs-width experiment in two data regimes",
    "scaling": "empirical risk scaling sweep over M or W",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sobolev-bench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"sobolev-bench {__version__}")
    parser.add_argument("--threads", type=int, default=None, help=f"worker processes (default: ${THREADS_ENV} or all cores)")
    parser.add_argument("--log-level", default="WARNING", help="logging level (default: WARNING)")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, opts in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=HELP[name], description=HELP[name], argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="JSON config file; explicit flags win")
        for key, (typ, default, text) in {**opts, **COMMON_OPTIONS}.items():
            flag = "--" + key.replace("_", "-")
            if typ is _bool:
                p.add_argument(flag, dest=key, action="store_true", help=f"{text} (default: {default})")
            else:
                p.add_argument(flag, dest=key, type=typ, help=f"{text} (default: {default})")
    return parser


def resolve_config(command: str, ns: argparse.Namespace) -> dict:
    """Defaults, then the JSON file, then explicit flags."""
    table = {**SUBCOMMANDS[command], **COMMON_OPTIONS}
    cfg = {k: v[1] for k, v in table.items()}
    path = getattr(ns, "config", None)
    if path:
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InvalidConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise InvalidConfigError("config file must hold a JSON object")
        unknown = sorted(set(doc) - set(table))
        if unknown:
            raise InvalidConfigError(f"unknown config keys for {command!r}: {', '.join(unknown)}")
        for k, v in doc.items():
            cfg[k] = None if v is None else table[k][0](v)
    for k in table:
        if hasattr(ns, k):
            cfg[k] = getattr(ns, k)
    return cfg


def _need(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise InvalidConfigError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _int_list(text: str) -> list[int]:
    try:
        return [int(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise InvalidConfigError(f"expected a comma-separated list of integers, got {text!r}") from None


def parse_grid(text: str) -> list[float]:
    """'a:b:log[:num]' (geometric), 'a:b:lin:num' or 'v1,v2,...'."""
    parts = str(text).split(":")
    try:
        if len(parts) == 1:
            return [float(s) for s in parts[0].split(",") if s.strip()]
        a, b, kind = float(parts[0]), float(parts[1]), parts[2]
        num = int(parts[3]) if len(parts) > 3 else None
    except (ValueError, IndexError):
        raise InvalidConfigError(f"cannot parse grid {text!r}") from None
    if not 0 < a <= b:
        raise InvalidConfigError(f"grid bounds must satisfy 0 < a <= b, got {a}, {b}")
    if kind == "log":
        num = num or round(math.log2(b / a)) + 1
        ratio = (b / a) ** (1.0 / max(1, num - 1))
        values = [a * ratio**i for i in range(num)]
    elif kind == "lin" and num:
        values = list(np.linspace(a, b, num))
    else:
        raise InvalidConfigError(f"grid kind must be 'log' or 'lin:num', got {text!r}")
    return [float(round(v)) if abs(v - round(v)) <= 1e-9 * v else float(v) for v in values]


def _constants(cfg: dict) -> bd.BoundConstants:
    kw = {}
    if cfg.get("constants"):
        try:
            doc = json.loads(Path(cfg["constants"]).read_text())
        except json.JSONDecodeError as exc:
            raise InvalidConfigError(f"constants file is not valid JSON: {exc}") from None
        names = {f.name for f in fields(bd.BoundConstants)}
        unknown = sorted(set(doc) - names)
        if unknown:
            raise InvalidConfigError(f"unknown constants: {', '.join(unknown)}")
        kw.update(doc)
    if cfg.get("tau") is not None:
        kw["tau"] = cfg["tau"]
    if cfg.get("no_logs"):
        kw["include_logs"] = False
    return bd.BoundConstants(**kw)


def _query(cfg: dict) -> bd.BoundQuery:
    _need(cfg, "W", "M", "n", "d")
    return bd.BoundQuery(cfg["W"], cfg["M"], cfg["n"], cfg["d"], cfg["k"]).validate()


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    path.write_text(buf.getvalue())


class Run:
    """Bookkeeping for one invocation: outputs, warning count and the manifest."""

    def __init__(self, command: str, cfg: dict, threads: int) -> None:
        self.command, self.cfg, self.threads = command, cfg, threads
        self.out = Path(cfg["out"])
        self.outputs: list[str] = []
        self.warnings = 0
        self.start = time.perf_counter()
        self.extra: dict = {}

    def path(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs.append(name)
        return self.out / name

    def warn(self, msg: str) -> None:
        self.warnings += 1
        print(f"warning: {msg}", file=sys.stderr)

    def manifest(self) -> None:
        doc = {
            "command": self.command,
            "config": self.cfg,
            "seed": self.cfg["seed"],
            "threads": self.threads,
            "versions": {
                "sobolev_bench": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
            },
            "outputs": self.outputs,
            "warnings": self.warnings,
            "wall_time": time.perf_counter() - self.start,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            **self.extra,
        }
        self.path("manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def region_text(v: bd.RegionVerdict) -> str:
    if v.tag == "denn":
        return "DeNN region (M above the crossover curve): go deeper"
    if v.tag == "wenn":
        return "WeNN region (M below the crossover curve): go wider"
    return "transitional band around the crossover curve: either choice is within the margin"


def cmd_advise(run: Run) -> None:
    q, c = _query(run.cfg), _constants(run.cfg)
    v = bd.recommend(q, c)
    crossover = bd.crossover_M(q.W, q.n, q.d, q.k)
    doc = {"verdict": v.tag, "margin": v.margin, "denn_bound": v.denn, "wenn_bound": v.wenn, "crossover_M": crossover, "tau": c.tau}
    print(v.tag)
    print(region_text(v))
    print(f"denn bound {v.denn:.6g}, wenn bound {v.wenn:.6g} (logs off), ratio {v.margin:.6g}, crossover M {crossover:.6g}")
    print(json.dumps(doc, sort_keys=True))


def cmd_bounds(run: Run) -> None:
    cfg = run.cfg
    q, c = _query(cfg), _constants(cfg)
    out = bd.evaluate_all(q, c)
    M2 = cfg["M2"] or q.M
    if q.n > 1:
        out["pde_ritz_bound"] = bd.pde_bounds(q.W, q.M, M2, q.n, q.d, "ritz", c)
    if q.n > 2:
        out["pde_pinn_bound"] = bd.pde_bounds(q.W, q.M, M2, q.n, q.d, "pinn", c)
    if cfg["N"] is not None and cfg["L"] is not None:
        N, L = cfg["N"], cfg["L"]
        out["general_fc_bound"] = bd.general_fc_bound(N, L, q.M, q.n, q.d, q.k, c)
        out["approximation_rate"] = bd.approximation_rate(N, L, q.n, q.d, q.k, c)
        for cls in bd.PDIM_CLASSES:
            out[f"pdim_{cls}"] = bd.pdim_bound(cls, N, L, c)
        pdim = out["pdim_f0"]
        if q.M >= pdim:
            out["sample_error_bound"] = bd.sample_error_bound(q.k, q.M, c.B, q.d, pdim, out["pdim_dkf1"] if q.k == 1 else out["pdim_laplacian_f2"])
        out["covering_uniform_params"] = bd.covering_bound_uniform_params(1.0 / q.M, q.W, L, c.F)
    for k, v in out.items():
        print(f"{k:<26} {v if isinstance(v, str) else f'{v:.10g}'}")
    run.path("bounds.json").write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")


def cmd_curve(run: Run) -> None:
    cfg = run.cfg
    _need(cfg, "n", "d")
    k, n, d = cfg["k"], cfg["n"], cfg["d"]
    if d < 1:
        raise InvalidConfigError("need d >= 1")
    Ws = parse_grid(cfg["W"])
    if any(W < 1 for W in Ws):
        raise InvalidConfigError("W values must be >= 1")
    rows = [[k, _num(n), d, _num(W), M] for W, M in bd.fig1_curve(k, n, d, Ws)]
    write_csv(run.path("curve.csv"), ["k", "n", "d", "W", "M_crossover"], rows)
    print(f"{len(rows)} rows -> {run.out / 'curve.csv'}")


def _num(x: float):
    return int(x) if float(x).is_integer() else x


def cmd_train(run: Run) -> None:
    from .harness import make_target
    from .networks import ArchitectureFamily, build
    from .optim import TrainConfig
    from .sobolev import AnalyticTarget, SobolevDataset, empirical_risk, train

    cfg = run.cfg
    rng = np.random.default_rng([cfg["seed"], 7])
    test = None
    if cfg["data"]:
        data = SobolevDataset.from_csv(cfg["data"])
    else:
        if cfg["target"] == "product_relu":
            if cfg["k"] == 2:
                raise InvalidConfigError("the product_relu target has no Laplacian; use k <= 1")
            tgt = make_target(cfg["target_seed"], d=cfg["d"])
            src = AnalyticTarget(tgt.value, tgt.grad)
        elif cfg["target"] == "quadratic":
            src = AnalyticTarget(
                lambda X: np.sum(X**2, axis=1),
                lambda X: 2.0 * X,
                lambda X: np.full(X.shape[0], 2.0 * X.shape[1]),
            )
        else:
            raise InvalidConfigError(f"unknown target {cfg['target']!r}")
        data = src.dataset(rng.uniform(size=(cfg["M"], cfg["d"])), cfg["k"])
        test = src.dataset(rng.uniform(size=(cfg["test_size"], cfg["d"])), cfg["k"])
    fam = ArchitectureFamily(cfg["family"], cfg["size"], width=cfg["width"], depth=cfg["depth"], activation=cfg["activation"])
    model = build(fam, data.d, cfg["seed"])
    tc = TrainConfig(lr=cfg["lr"], iterations=cfg["iterations"], batch_size=cfg["batch_size"], seed=cfg["seed"], k=cfg["k"])
    t0 = time.perf_counter()
    result = train(model, data, tc)
    elapsed = time.perf_counter() - t0
    if result.failed:
        run.warn(f"training diverged at iteration {result.failed_at}")
    write_csv(run.path("trace.csv"), ["iter", "risk"], [[i, r] for i, r in enumerate(result.trace)])
    result.model.save(run.path("model.json"))
    train_risk = empirical_risk(result.model, data, cfg["k"]).value
    test_risk = empirical_risk(result.model, test, cfg["k"]).value if test is not None else None
    wall = elapsed if cfg["record_timing"] else None
    write_csv(
        run.path("train.csv"),
        ["k", "M", "W", "iterations", "train_risk", "test_risk", "failed", "wall_time"],
        [[cfg["k"], len(data), len(model.parameters()), len(result.trace), train_risk, test_risk, result.failed, wall]],
    )
    run.extra["train_wall_time"] = elapsed
    print(f"train risk {train_risk:.6g}" + (f", test risk {test_risk:.6g}" if test_risk is not None else ""))


def cmd_pde(run: Run) -> None:
    import dataclasses
    import warnings as _w

    from .networks import init_model
    from .optim import TrainConfig
    from .pde import PDE_COLUMNS, SamplePlan, make_problem, run_pde

    cfg = run.cfg
    problem = dataclasses.replace(
        make_problem(cfg["problem"], cfg["lam"]), ritz_half=cfg["ritz_half"], ritz_mean_on=cfg["ritz_mean_on"]
    )
    if cfg["method"] not in ("pinn", "ritz"):
        raise InvalidConfigError(f"method must be pinn or ritz, got {cfg['method']!r}")
    plan0 = SamplePlan(cfg["M1"], cfg["M2"], cfg["seed"])  # validates counts up front
    if cfg["trials"] < 1:
        raise InvalidConfigError("trials must be >= 1")
    rows, times = [], []
    for t in range(cfg["trials"]):
        seed = cfg["seed"] + t
        model = init_model(2, [cfg["width"]] * cfg["depth"], [cfg["activation"]] * cfg["depth"], seed)
        tc = TrainConfig(
            lr=cfg["lr"], iterations=cfg["iterations"], batch_size=cfg["batch_size"], seed=seed, lr_decay=cfg["lr_decay"]
        )
        with _w.catch_warnings(record=True) as caught:
            _w.simplefilter("always")
            rep = run_pde(model, problem, cfg["method"], dataclasses.replace(plan0, seed=seed), tc, trial=t)
        for msg in dict.fromkeys(str(w.message) for w in caught):
            run.warn(msg)
        if rep.failed:
            run.warn(f"trial {t} diverged at iteration {rep.result.failed_at}")
        times.append(rep.wall_time)
        rows.append([rep.trial, rep.M1, rep.M2, rep.W, rep.loss, rep.l2_err, rep.h1_err, rep.wall_time if cfg["record_timing"] else None])
        print(f"trial {t}: loss {rep.loss:.6g}, l2_err {rep.l2_err:.4g}, h1_err {rep.h1_err:.4g}")
    write_csv(run.path("pde.csv"), PDE_COLUMNS, rows)
    run.extra["trial_wall_times"] = times


def cmd_table2(run: Run) -> None:
    from .harness import HarnessConfig, run_table2, write_table2_csv, write_trials_csv

    cfg = run.cfg
    hc = HarnessConfig(iterations=cfg["iterations"], lr=cfg["lr"], target_seed=cfg["target_seed"], threads=run.threads)
    result = run_table2(_int_list(cfg["seeds"]), hc)
    for t in result.trials:
        if t.failed:
            run.warn(f"{t.arch}/{t.regime} seed {t.seed} diverged at iteration {t.failed_at}")
    write_trials_csv(run.path("trials.csv"), result.trials, cfg["record_timing"])
    write_table2_csv(run.path("table2.csv"), result.rows)
    run.extra["trial_wall_times"] = [t.wall_time for t in result.trials]
    print(result.render())
    for regime, ok in result.orderings().items():
        print(f"{regime} regime ordering {'holds' if ok else 'does not hold'}")


def cmd_scaling(run: Run) -> None:
    from .harness import HarnessConfig, ScalingConfig, run_scaling, write_scaling_csv

    cfg = run.cfg
    _need(cfg, "grid")
    fixed = ScalingConfig(cfg["family"], cfg["width"], cfg["depth"], cfg["train_size"], cfg["test_size"])
    hc = HarnessConfig(iterations=cfg["iterations"], lr=cfg["lr"], target_seed=cfg["target_seed"], threads=run.threads)
    result = run_scaling(cfg["axis"], parse_grid(cfg["grid"]), _int_list(cfg["seeds"]), fixed, hc)
    write_scaling_csv(run.path("scaling.csv"), result)
    for p in result.points:
        print(f"{result.axis}={_num(p.value)} params={p.params} mean={p.mean:.4g} std={p.std:.3g}")
    print(f"fitted log-log slope {result.slope:.4f}")


COMMANDS = {
    "advise": cmd_advise,
    "bounds": cmd_bounds,
    "curve": cmd_curve,
    "train": cmd_train,
    "pde": cmd_pde,
    "table2": cmd_table2,
    "scaling": cmd_scaling,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(ns.log_level).upper(), logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    try:
        threads = ns.threads if ns.threads is not None else _default_threads()
        if threads < 1:
            raise InvalidConfigError("--threads must be >= 1")
        cfg = resolve_config(ns.command, ns)
        run = Run(ns.command, cfg, threads)
        COMMANDS[ns.command](run)
        if run.command != "advise":
            run.manifest()
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if run.warnings:
        print(f"{run.warnings} warning(s)", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
