import math

import numpy as np
import oracles as orc
import pytest

from sobolev_bench import bounds as bd
from sobolev_bench.errors import DomainError

C = bd.BoundConstants()
OFF = C.without_logs()


def q(W, M, n, d, k):
    return bd.BoundQuery(W, M, n, d, k)


# spot values -------------------------------------------------------------------


def test_denn_spot_value():
    assert bd.denn_bound(q(100, 1e6, 3, 2, 0), C) == pytest.approx(1.3825e-1, rel=1e-4)
    assert bd.denn_approx_term(100, 3, 2, 0, C) == pytest.approx(9.09e-5, rel=1e-3)


def test_wenn_spot_values():
    assert bd.wenn_bound(q(100, 1e6, 3, 2, 0), OFF) == pytest.approx(1.01e-4, rel=1e-12)
    M = 1e4
    assert bd.wenn_bound(q(1, M, 3, 2, 0), C) == pytest.approx(1 + math.log(M) / M, rel=1e-12)


def test_rademacher_spot_value():
    assert bd.rademacher_bound(q(100, 1e4, 3, 2, 0), C) == pytest.approx(9.2104, rel=1e-4)


def test_general_fc_spot_value_and_guard():
    assert bd.general_fc_bound(10, 10, 1e6, 3, 2, 0, C) == pytest.approx(1e-12 + 0.7325, rel=1e-4)
    # N = 1: log 1 = 0 would kill the sample term; the guard floors it at 1
    assert bd.general_fc_bound(1, 10, 1e6, 3, 2, 0, C) > 0


def test_approximation_rate_spot_value():
    assert bd.approximation_rate(2, 4, 3, 2, 1, C) == pytest.approx(1.5625e-2, rel=1e-12)
    with pytest.raises(DomainError):
        bd.approximation_rate(2, 4, 3, 2, 3, C)


def test_optimal_rate_and_width_spot_values():
    assert bd.optimal_rate(1e6, 2, 1, 0) == pytest.approx(1.5849e-5, rel=1e-4)
    assert bd.optimal_width(1e10, 2, 2) == pytest.approx(46.42, rel=1e-4)


def test_crossover_spot_value():
    assert bd.crossover_M(10, 3, 2, 0) == pytest.approx(1e5, rel=1e-12)
    W, n, d = 7.0, 4, 3
    assert bd.crossover_M(W, n, d, n - 1) == pytest.approx(W ** (2 + 2 / d), rel=1e-12)


def test_recommend_spot_values():
    assert bd.recommend(q(10, 1e7, 3, 2, 0)).tag == "denn"
    assert bd.recommend(q(10, 1e3, 3, 2, 0)).tag == "wenn"
    v = bd.recommend(q(1000, bd.crossover_M(1000, 3, 2, 0), 3, 2, 0))
    assert v.tag in ("transitional", "denn", "wenn") and v.margin > 0
    assert (v.denn < v.wenn) == (v.margin < 1)


def test_pdim_spot_value_and_floor():
    assert bd.pdim_bound("f0", 10, 10, C) == pytest.approx(1.1035e5, rel=1e-4)
    assert bd.pdim_bound("dkf1", 1, 10, C) == pytest.approx(100 * math.log2(10), rel=1e-12)
    assert bd.pdim_bound("squared", 1, 1, bd.BoundConstants(C_hat=3.0)) == 3.0
    with pytest.raises(DomainError):
        bd.pdim_bound("cnn", 2, 2, C)


def test_covering_spot_value_and_domain():
    assert bd.covering_bound(0.1, 10, 100, 1.0) == pytest.approx(62.98, rel=1e-4)
    assert bd.covering_bound(0.2, 10, 100) < bd.covering_bound(0.1, 10, 100)
    with pytest.raises(DomainError):
        bd.covering_bound(0.1, 10, 5)


def test_covering_uniform_params_spot_value():
    assert bd.covering_bound_uniform_params(0.01, 100, 5, 1.0) == pytest.approx(3408.6, rel=1e-4)
    second = bd.covering_bound_uniform_params(6.0, 100, 5, 1.0) - 100 * 6 * math.log(101)
    assert second == pytest.approx(0.0, abs=1e-9)
    for variant in bd.COVER_VARIANTS:
        assert bd.covering_bound_uniform_params(0.01, 100, 5, variant=variant) == bd.covering_bound_uniform_params(0.01, 100, 5)


def test_sample_error_spot_value():
    assert bd.sample_error_bound(0, 1e4, 1.0, 2, 100) == pytest.approx(1022.0, rel=1e-4)
    assert bd.sample_error_bound(1, 1e4, 1.0, 2, 100) >= bd.sample_error_bound(0, 1e4, 1.0, 2, 100)
    tail = [bd.sample_error_bound(0, M, 1.0, 2, 100) for M in (1e6, 1e9, 1e12, 1e15, 1e20)]
    assert all(b < a for a, b in zip(tail, tail[1:])) and tail[-1] < 1e-8
    with_log14 = bd.sample_error_bound(0, 1e4, 1.0, 2, 100, cover_multiplier=14.0)
    assert with_log14 - bd.sample_error_bound(0, 1e4, 1.0, 2, 100) == pytest.approx(5136 / 1e4 * math.log(14), rel=1e-12)


def test_pde_bound_spot_value_and_symmetry():
    ritz = bd.pde_bounds(100, 1e6, 1e6, 3, 2, "ritz", C)
    assert ritz == pytest.approx(2.02e-3 + 0.2763, rel=1e-3)
    sample = bd.pde_bounds(100, 1e6, 1e6, 3, 2, "ritz", C) - bd.denn_approx_term(100, 3, 2, 1, C)
    assert sample == pytest.approx(2 * bd.denn_sample_term(100, 1e6, C), rel=1e-12)
    assert ritz <= bd.pde_bounds(100, 1e6, 1e6, 3, 2, "pinn", C)


# qualitative properties ------------------------------------------------------------


def test_domain_errors():
    with pytest.raises(DomainError):
        bd.denn_bound(q(100, 1e6, 2, 2, 2))
    with pytest.raises(DomainError):
        bd.denn_bound(q(2, 1e6, 3, 2, 0))
    with pytest.raises(DomainError):
        bd.denn_bound(q(100, 1, 3, 2, 0))
    with pytest.raises(DomainError):
        bd.BoundConstants(B=0.5)


def test_large_M_limits():
    big = q(100, 1e300, 3, 2, 0)
    approx = bd.denn_approx_term(100, 3, 2, 0, C)
    assert bd.denn_bound(big) == pytest.approx(approx, rel=1e-9)
    assert bd.rademacher_bound(q(100, 1e300, 3, 2, 0)) == pytest.approx(approx, rel=1e-9)


def test_monotonicity_properties():
    assert bd.denn_bound(q(100, 1e6, 3, 2, 0)) <= bd.denn_bound(q(100, 1e6, 3, 2, 1))
    Ms = np.logspace(0.5, 12, 40)
    assert all(np.diff([bd.denn_bound(q(100, M, 3, 2, 0)) for M in Ms]) <= 0)
    assert all(np.diff([bd.wenn_bound(q(100, M, 3, 2, 0)) for M in Ms if M >= 3]) < 0)
    Ws = np.logspace(0.5, 4, 30)
    approx = [bd.denn_approx_term(W, 3, 2, 0, OFF) for W in Ws]
    sample = [bd.denn_sample_term(W, 1e6, OFF) for W in Ws]
    assert all(np.diff(approx) < 0) and all(np.diff(sample) > 0)
    for k in (0, 1):
        assert bd.crossover_M(50, 3, 2, k + 1) < bd.crossover_M(50, 3, 2, k)


def test_sample_term_comparison_at_M_equals_W_squared():
    W = 40.0
    rad = lambda M: bd.rademacher_bound(q(W, M, 3, 2, 0), OFF) - bd.denn_approx_term(W, 3, 2, 0, OFF)
    den = lambda M: bd.denn_sample_term(W, M, OFF)
    assert rad(W**2) == pytest.approx(den(W**2), rel=1e-12)
    assert rad(4 * W**2) > den(4 * W**2) and rad(W**2 / 4) < den(W**2 / 4)


def test_fig1_curve_properties():
    Ws = [2, 4, 8, 16, 64, 256]
    for k in (0, 1):
        lo = bd.fig1_curve(k + 1, 3, 2, Ws)
        hi = bd.fig1_curve(k, 3, 2, Ws)
        assert all(a[1] < b[1] for a, b in zip(lo, hi))
        assert all(b[1] > a[1] for a, b in zip(hi, hi[1:]))
    assert bd.fig1_curve(0, 3, 2, [10])[0] == (10.0, bd.crossover_M(10, 3, 2, 0))


def test_bounds_positive_and_finite_on_domain():
    rng = np.random.default_rng(0)
    for _ in range(200):
        k = int(rng.integers(0, 3))
        query = q(3 * 10 ** rng.uniform(0, 4), 2 * 10 ** rng.uniform(0, 10), k + rng.uniform(0.1, 5), int(rng.integers(1, 8)), k)
        for f in (bd.denn_bound, bd.wenn_bound, bd.rademacher_bound):
            v = f(query)
            assert 0 < v < math.inf


def oracle_slope(n, d, k, logs, width_n):
    Ms = np.logspace(4, 12, 9)
    vals = [orc.denn(orc.opt_width(M, width_n, d), M, n, d, k, logs=logs) for M in Ms]
    return np.polyfit(np.log(Ms), np.log(vals), 1)[0]


CASES = [(2, 1, 0), (3, 2, 1), (4, 2, 2)]


@pytest.mark.parametrize("n,d,k", CASES)
@pytest.mark.parametrize("balanced", [False, True])
@pytest.mark.parametrize("consts", [OFF, C], ids=["logs_off", "logs_on"])
def test_slope_law_matches_oracle_regression(n, d, k, balanced, consts):
    Ms = np.logspace(4, 12, 9)
    expected = oracle_slope(n, d, k, consts.include_logs, n - k if balanced else n)
    assert bd.slope_law(n, d, k, Ms, consts, balanced) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("n,d,k", CASES)
def test_slope_law_pure_power_exponents(n, d, k):
    Ms = np.logspace(4, 12, 9)
    # Logs off both terms are exact power laws, so the fitted slope is the
    # slower of the two exponents.
    stated = max(-4 * (n - k) / (2 * d + 4 * n), -4 * n / (2 * d + 4 * n))
    assert bd.slope_law(n, d, k, Ms, OFF) == pytest.approx(stated, abs=0.01 * abs(stated))
    balanced = -2 * (n - k) / (2 * (n - k) + d)
    assert bd.slope_law(n, d, k, Ms, OFF, balanced=True) == pytest.approx(balanced, rel=1e-9)


def test_slope_law_log_factors_flatten_the_fit():
    # W / log(W)^2 barely moves over M in [1e4, 1e12] at these widths, so the
    # approximation term is nearly flat once logs are kept.
    Ms = np.logspace(4, 12, 9)
    for n, d, k in CASES:
        assert bd.slope_law(n, d, k, Ms, C) > bd.slope_law(n, d, k, Ms, OFF) + 0.3


# oracle equivalence ------------------------------------------------------------------


def random_queries(seed, count=100):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        k = int(rng.integers(0, 3))
        out.append(
            (
                float(3 * 10 ** rng.uniform(0, 5)),
                float(2 * 10 ** rng.uniform(0, 11)),
                float(k + rng.uniform(0.05, 6)),
                int(rng.integers(1, 11)),
                k,
            )
        )
    return out


@pytest.mark.parametrize("logs", [True, False])
def test_generalization_bounds_match_oracle(logs):
    c = bd.BoundConstants(C=2.5, include_logs=logs)
    for W, M, n, d, k in random_queries(1):
        qq = q(W, M, n, d, k)
        assert bd.denn_bound(qq, c) == pytest.approx(orc.denn(W, M, n, d, k, 2.5, logs), rel=1e-12)
        assert bd.wenn_bound(qq, c) == pytest.approx(orc.wenn(W, M, n, d, k, 2.5, logs), rel=1e-12)
        assert bd.rademacher_bound(qq, c) == pytest.approx(orc.rademacher(W, M, n, d, k, 2.5, logs), rel=1e-12)


def test_rates_and_crossover_match_oracle():
    for W, M, n, d, k in random_queries(2):
        N, L = W ** 0.5, W ** 0.3
        assert bd.general_fc_bound(N, L, M, n, d, k) == pytest.approx(orc.general_fc(N, L, M, n, d, k), rel=1e-12)
        assert bd.approximation_rate(N, L, n, d, k) == pytest.approx(orc.approx_rate(N, L, n, d, k), rel=1e-12)
        assert bd.optimal_rate(M, n, d, k) == pytest.approx(orc.opt_rate(M, n, d, k), rel=1e-12)
        assert bd.optimal_width(M, n, d) == pytest.approx(orc.opt_width(M, n, d), rel=1e-12)
        assert bd.crossover_M(W, n, d, k) == pytest.approx(orc.crossover(W, n, d, k), rel=1e-12)
        assert bd.fig1_curve(k, n, d, [W])[0][1] == pytest.approx(orc.crossover(W, n, d, k), rel=1e-12)
        v = bd.recommend(q(W, M, n, d, k))
        tag, ratio = orc.verdict(W, M, n, d, k, C.tau)
        assert v.tag == tag and v.margin == pytest.approx(ratio, rel=1e-12)


def test_capacity_bounds_match_oracle():
    rng = np.random.default_rng(3)
    for _ in range(100):
        N, L = float(10 ** rng.uniform(0, 3)), float(10 ** rng.uniform(0, 2))
        p = bd.pdim_bound("f0", N, L)
        assert p == pytest.approx(orc.pdim(N, L), rel=1e-12)
        m = p * 10 ** rng.uniform(0, 3)
        eps = float(10 ** rng.uniform(-6, 0))
        assert bd.covering_bound(eps, p, m) == pytest.approx(orc.cover(eps, p, m), rel=1e-12)
        delta, W = float(10 ** rng.uniform(-4, 0)), float(10 ** rng.uniform(0, 5))
        assert bd.covering_bound_uniform_params(delta, W, L, 3.0) == pytest.approx(orc.cover_params(delta, W, L, 3.0), rel=1e-12)
        k, d, B = int(rng.integers(0, 3)), int(rng.integers(1, 6)), float(1 + rng.uniform(0, 3))
        Ms = float(p * 10 ** rng.uniform(0, 4))
        assert bd.sample_error_bound(k, Ms, B, d, p) == pytest.approx(orc.sample_error(k, Ms, B, d, p), rel=1e-12)
        M1, M2 = float(10 ** rng.uniform(0.5, 9)), float(10 ** rng.uniform(0.5, 9))
        n = 2 + rng.uniform(0.1, 4)
        for variant in ("ritz", "pinn"):
            assert bd.pde_bounds(W + 3, M1, M2, n, d, variant) == pytest.approx(orc.pde(W + 3, M1, M2, n, d, variant), rel=1e-12)


def test_crossover_grid_has_no_violations():
    bad = []
    for k in (0, 1, 2):
        for n in range(k + 1, 6):
            for d in range(1, 6):
                for W in (4, 16, 64, 256, 1024):
                    X = bd.crossover_M(W, n, d, k)
                    if bd.recommend(q(W, 2 * X, n, d, k)).tag != "denn":
                        bad.append(("hi", W, n, d, k))
                    if bd.recommend(q(W, X / 2, n, d, k)).tag != "wenn":
                        bad.append(("lo", W, n, d, k))
    assert bad == []


def test_tau_1_5_would_break_the_crossover_grid():
    wide = bd.BoundConstants(tau=1.5)
    misses = 0
    for k in (0, 1, 2):
        for n in range(k + 1, 6):
            for d in range(1, 6):
                for W in (4, 16, 64, 256, 1024):
                    X = bd.crossover_M(W, n, d, k)
                    misses += bd.recommend(q(W, 2 * X, n, d, k), wide).tag != "denn"
    assert misses > 0
