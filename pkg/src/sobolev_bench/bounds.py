"""Closed-form generalization, approximation and capacity bounds.

All functions are pure. Unnamed leading constants default to 1 and only the
orders of the bounds are meaningful. Natural logarithms are used throughout
except in the pseudo-dimension formulas, which use log2. Every log factor is
floored at 1 (``safe_log``) so the expressions stay positive and monotone at
tiny arguments.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass, replace

from .errors import DomainError

PDIM_CLASSES = ("f0", "dkf1", "laplacian_f2", "squared")
COVER_VARIANTS = ("value", "first_derivative", "second_derivative")
SAMPLE_ERROR_CONSTANT = 5136.0
COVER_SCALE = 80.0


def safe_log(x: float) -> float:
    """ln x, floored at 1 for x <= e."""
    return math.log(x) if x > math.e else 1.0


def safe_log2(x: float) -> float:
    """log2 x, floored at 1 for x <= 2."""
    return math.log2(x) if x > 2.0 else 1.0


@dataclass(frozen=True)
class BoundConstants:
    C: float = 1.0
    C1: float = 1.0
    C2: float = 1.0
    B: float = 1.0
    F: float = 1.0
    C_hat: float = 1.0
    C_bar: float = 1.0
    noise: float = 0.0  # sigma of the WeNN comparison bound; noiseless by default
    include_logs: bool = True
    tau: float = 1.04

    def __post_init__(self) -> None:
        for name in ("C", "C1", "C2", "B", "F", "C_hat", "C_bar"):
            if not getattr(self, name) > 0:
                raise DomainError(f"constant {name} must be positive")
        if self.B < 1 or self.F < 1:
            raise DomainError("B and F must be >= 1")
        if self.noise < 0:
            raise DomainError("noise level must be >= 0")
        if not self.tau >= 1:
            raise DomainError("tau must be >= 1")

    def without_logs(self) -> BoundConstants:
        return replace(self, include_logs=False)


@dataclass(frozen=True)
class BoundQuery:
    W: float
    M: float
    n: float
    d: int
    k: int

    def validate(self, min_W: float = 3.0) -> BoundQuery:
        if self.k not in (0, 1, 2):
            raise DomainError(f"k must be 0, 1 or 2, got {self.k}")
        if not self.n > self.k:
            raise DomainError(f"need n > k, got n={self.n}, k={self.k}")
        if self.d < 1:
            raise DomainError(f"need d >= 1, got {self.d}")
        if self.W < min_W:
            raise DomainError(f"need W >= {min_W:g}, got {self.W}")
        if self.M < 2:
            raise DomainError(f"need M >= 2, got {self.M}")
        return self


@dataclass(frozen=True)
class RegionVerdict:
    tag: str  # denn | wenn | transitional
    margin: float  # denn_bound / wenn_bound, logs off
    denn: float
    wenn: float


def _check_nk(n: float, k: int) -> None:
    if not n > k:
        raise DomainError(f"need n > k, got n={n}, k={k}")


def _logs(c: BoundConstants) -> bool:
    return c.include_logs


def denn_approx_term(W: float, n: float, d: int, k: int, c: BoundConstants) -> float:
    base = W / safe_log(W) ** 2 if _logs(c) else W
    return base ** (-4.0 * (n - k) / d)


def denn_sample_term(W: float, M: float, c: BoundConstants) -> float:
    return W * W / M * (safe_log(M) if _logs(c) else 1.0)


def denn_bound(q: BoundQuery, c: BoundConstants = BoundConstants()) -> float:
    """C [ (W / log^2 W)^(-4(n-k)/d) + W^2 log(M) / M ]."""
    q.validate()
    return c.C * (denn_approx_term(q.W, q.n, q.d, q.k, c) + denn_sample_term(q.W, q.M, c))


def wenn_bound(q: BoundQuery, c: BoundConstants = BoundConstants()) -> float:
    """C [ W^(-2(n-k)/d) + W log(M) / M ]; W >= 1 is allowed here (no log W)."""
    q.validate(min_W=1.0)
    sample = q.W / q.M * (safe_log(q.M) if _logs(c) else 1.0)
    return c.C * (q.W ** (-2.0 * (q.n - q.k) / q.d) + sample)


def rademacher_bound(q: BoundQuery, c: BoundConstants = BoundConstants()) -> float:
    """C [ (W / log^2 W)^(-4(n-k)/d) + W log(M) / sqrt(M) ]."""
    q.validate()
    sample = q.W / math.sqrt(q.M) * (safe_log(q.M) if _logs(c) else 1.0)
    return c.C * (denn_approx_term(q.W, q.n, q.d, q.k, c) + sample)


def general_fc_bound(N: float, L: float, M: float, n: float, d: int, k: int, c: BoundConstants = BoundConstants()) -> float:
    """C [ (NL)^(-4(n-k)/d) + N^2 L^2 log N log L log(M) / M ]."""
    _check_nk(n, k)
    if N < 1 or L < 1 or M < 2:
        raise DomainError("need N, L >= 1 and M >= 2")
    logs = safe_log(N) * safe_log(L) * safe_log(M) if _logs(c) else 1.0
    return c.C * ((N * L) ** (-4.0 * (n - k) / d) + N * N * L * L * logs / M)


def approximation_rate(N: float, L: float, n: float, d: int, k: int, c: BoundConstants = BoundConstants()) -> float:
    """C (NL)^(-2(n-k)/d): the W^{k,inf} rate of deep ReLU / DSRN approximants."""
    _check_nk(n, k)
    if N < 1 or L < 1:
        raise DomainError("need N, L >= 1")
    return c.C * (N * L) ** (-2.0 * (n - k) / d)


def optimal_rate(M: float, n: float, d: int, k: int) -> float:
    _check_nk(n, k)
    return M ** (-2.0 * (n - k) / (2.0 * (n - k) + d))


def optimal_width(M: float, n: float, d: int) -> float:
    """Parameter count W = M^(d/(2d+4n)) that balances the two DeNN terms."""
    return M ** (d / (2.0 * d + 4.0 * n))


def optimal_width_bound(
    M: float, n: float, d: int, k: int, c: BoundConstants = BoundConstants(), balanced: bool = False
) -> float:
    """DeNN bound evaluated along the width rule W = M^(d/(2d+4n)).

    The rule only balances the two terms when k = 0; ``balanced=True`` uses
    M^(d/(2d+4(n-k))) instead, which does for every k. The rule gives W < 3
    at small M (e.g. M = 1e4, n = 2, d = 1), outside the query domain, so the
    terms are evaluated directly; the log floor keeps them well defined there.
    """
    _check_nk(n, k)
    W = optimal_width(M, n - k if balanced else n, d)
    return c.C * (denn_approx_term(W, n, d, k, c) + denn_sample_term(W, M, c))


def slope_law(
    n: float, d: int, k: int, Ms: Iterable[float], c: BoundConstants = BoundConstants(), balanced: bool = False
) -> float:
    """Least-squares slope of log(denn bound) against log(M) along the width rule."""
    Ms = [float(M) for M in Ms]
    xs = [math.log(M) for M in Ms]
    ys = [math.log(optimal_width_bound(M, n, d, k, c, balanced)) for M in Ms]
    mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
    return sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sum((x - mx) ** 2 for x in xs)


def crossover_M(W: float, n: float, d: int, k: int) -> float:
    """Sample count W^((2n+2d-2k)/d) beyond which DeNNs have the better order."""
    _check_nk(n, k)
    return W ** ((2.0 * n + 2.0 * d - 2.0 * k) / d)


def recommend(q: BoundQuery, c: BoundConstants = BoundConstants()) -> RegionVerdict:
    """Compare the two bounds as pure power laws.

    ``denn`` when denn/wenn < 1/tau, ``wenn`` when > tau, else
    ``transitional``.
    """
    q.validate()
    off = c.without_logs()
    dn, wn = denn_bound(q, off), wenn_bound(q, off)
    ratio = dn / wn
    if ratio < 1.0 / c.tau:
        tag = "denn"
    elif ratio > c.tau:
        tag = "wenn"
    else:
        tag = "transitional"
    return RegionVerdict(tag, ratio, dn, wn)


def fig1_curve(k: int, n: float, d: int, Ws: Iterable[float]) -> list[tuple[float, float]]:
    return [(float(W), crossover_M(W, n, d, k)) for W in Ws]


def pdim_bound(cls: str, N: float, L: float, c: BoundConstants = BoundConstants()) -> float:
    """const * N^2 L^2 log2 L log2 N (log factors floored at 1).

    ``f0`` and ``squared`` use C_hat; ``dkf1`` and ``laplacian_f2`` use C_bar.
    """
    if cls not in PDIM_CLASSES:
        raise DomainError(f"unknown class {cls!r}; expected one of {PDIM_CLASSES}")
    if N < 1 or L < 1:
        raise DomainError("need N, L >= 1")
    const = c.C_hat if cls in ("f0", "squared") else c.C_bar
    return const * N * N * L * L * safe_log2(L) * safe_log2(N)


def covering_bound(eps: float, pdim: float, m: float, B: float = 1.0) -> float:
    """log of the uniform covering number: pdim * ln(2 e m B / (eps pdim)), for m >= pdim."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    if not pdim > 0:
        raise DomainError("pseudo-dimension must be positive")
    if m < pdim:
        raise DomainError(f"need m >= pdim, got m={m}, pdim={pdim}")
    return pdim * math.log(2.0 * math.e * m * B / (eps * pdim))


def covering_bound_uniform_params(delta: float, W: float, L: float, F: float = 1.0, variant: str = "value", C: float = 1.0) -> float:
    """C [ W (L+1) ln((F v 1)(W+1)) + W ln((L+1)/delta) ], shared by all three variants."""
    if variant not in COVER_VARIANTS:
        raise DomainError(f"unknown variant {variant!r}; expected one of {COVER_VARIANTS}")
    if not delta > 0:
        raise DomainError("delta must be positive")
    if W < 1 or L < 0:
        raise DomainError("need W >= 1 and L >= 0")
    return C * (W * (L + 1) * math.log(max(F, 1.0) * (W + 1)) + W * math.log((L + 1) / delta))


def sample_error_bound(
    k: int,
    M: float,
    B: float,
    d: int,
    pdim: float,
    pdim_derivative: float | None = None,
    cover_multiplier: float = 1.0,
) -> float:
    """(5136 B^4 / M) [log N(1/(80BM)) + 1] plus the derivative-class terms.

    k=1 adds d terms (5136 d^4 B^4 / M)[log N_d(1/(80dBM)) + 1], one per
    partial derivative class; k=2 adds a single such term for the Laplacian
    class. Each log N comes from :func:`covering_bound` at m = M, scaled by
    ``cover_multiplier`` inside the log.
    """
    if k not in (0, 1, 2):
        raise DomainError(f"k must be 0, 1 or 2, got {k}")
    if B < 1:
        raise DomainError("B must be >= 1")
    pd = pdim if pdim_derivative is None else pdim_derivative

    def term(scale: float, eps: float, p: float) -> float:
        logcover = math.log(cover_multiplier) + covering_bound(eps, p, M, B)
        return SAMPLE_ERROR_CONSTANT * scale * B**4 / M * (logcover + 1.0)

    total = term(1.0, 1.0 / (COVER_SCALE * B * M), pdim)
    if k >= 1:
        deriv = term(float(d) ** 4, 1.0 / (COVER_SCALE * d * B * M), pd)
        total += d * deriv if k == 1 else deriv
    return total


def pde_bounds(W: float, M1: float, M2: float, n: float, d: int, variant: str, c: BoundConstants = BoundConstants()) -> float:
    """C [ (W / log^2 W)^(-4(n-j)/d) + W^2 (log M1 / M1 + log M2 / M2) ], j=1 Ritz, j=2 PINN."""
    if variant not in ("ritz", "pinn"):
        raise DomainError(f"unknown variant {variant!r}")
    j = 1 if variant == "ritz" else 2
    _check_nk(n, j)
    if W < 3 or M1 < 2 or M2 < 2:
        raise DomainError("need W >= 3 and M1, M2 >= 2")
    if _logs(c):
        sample = W * W * (safe_log(M1) / M1 + safe_log(M2) / M2)
    else:
        sample = W * W * (1.0 / M1 + 1.0 / M2)
    return c.C * (denn_approx_term(W, n, d, j, c) + sample)


def evaluate_all(q: BoundQuery, c: BoundConstants = BoundConstants()) -> dict:
    """Every bound relevant to a query, for the CLI's ``bounds`` report."""
    q.validate()
    out = {
        "denn_bound": denn_bound(q, c),
        "wenn_bound": wenn_bound(q, c),
        "rademacher_bound": rademacher_bound(q, c),
        "crossover_M": crossover_M(q.W, q.n, q.d, q.k),
        "optimal_rate": optimal_rate(q.M, q.n, q.d, q.k),
        "optimal_width": optimal_width(q.M, q.n, q.d),
    }
    if q.n > 1:
        out["pde_ritz_bound"] = pde_bounds(q.W, q.M, q.M, q.n, q.d, "ritz", c)
    if q.n > 2:
        out["pde_pinn_bound"] = pde_bounds(q.W, q.M, q.M, q.n, q.d, "pinn", c)
    v = recommend(q, c)
    out["verdict"] = v.tag
    out["margin"] = v.margin
    return out
