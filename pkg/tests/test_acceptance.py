"""Numbered acceptance criteria at their stated tolerances and time budgets.

Run ``pytest tests/test_acceptance.py`` to get one PASS/FAIL line per
criterion in the terminal summary.
"""
import time

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from volspill.bekk import (BekkParams, bekk_filter, classify_direction, fit_bekk,
                           intercept_for_covariance, simulate_bekk)
from volspill.dcc import fit_dcc, simulate_dcc
from volspill.garch import GarchParams, fit_garch11, garch_filter, simulate_garch
from volspill.panel import PricePanel, VolatilityPanel, jarque_bera, log_returns, range_volatility
from volspill.rolling import RollingConfig, rolling_spillover, standalone_window
from volspill.simulate import simulate_var
from volspill.spillover import VarFit, build_spillover_table, gfevd, spillover_table_from_percent

from oracles import FIVE_SECTOR, SEVEN_SECTOR, brute_force_gfevd

PROPERTY_CASES = settings(max_examples=200, deadline=None, derandomize=True)


def _var_fit(coefs, sigma):
    coefs = np.asarray(coefs, float)
    n = coefs.shape[-1]
    return VarFit(len(coefs), np.zeros(n), coefs, np.asarray(sigma, float), np.zeros((1, n)), 100)


@pytest.mark.acceptance(1, "Five-sector table margins from the published interior")
def test_c1_five_sector_margins():
    t0 = time.perf_counter()
    t = spillover_table_from_percent(FIVE_SECTOR)
    np.testing.assert_allclose(t.directional_from, [30.51, 11.96, 29.50, 29.81, 31.35], atol=0.02)
    np.testing.assert_allclose(t.directional_to, [25.10, 13.13, 30.69, 25.02, 39.18], atol=0.02)
    assert abs(t.total_index - 26.63) <= 0.02
    assert time.perf_counter() - t0 < 1.0


@pytest.mark.acceptance(2, "Seven-sector total index and ferrous from-others")
def test_c2_seven_sector_margins():
    t0 = time.perf_counter()
    t = spillover_table_from_percent(SEVEN_SECTOR)
    assert abs(t.total_index - 52.49) <= 0.02
    assert abs(t.directional_from[0] - 5.78) <= 0.02
    assert time.perf_counter() - t0 < 1.0


@pytest.mark.acceptance(3, "Jarque-Bera from published moments")
def test_c3_jarque_bera():
    t0 = time.perf_counter()
    jb, _ = jarque_bera(2877, -0.0028, 6.1062)
    assert abs(jb - 1156.61) <= 0.005 * 1156.61
    assert time.perf_counter() - t0 < 1.0


@pytest.mark.acceptance(4, "GFEVD closed form and brute-force MA expansion")
def test_c4_gfevd_oracles():
    t0 = time.perf_counter()
    f = gfevd(_var_fit(np.zeros((1, 2, 2)), [[1.0, 0.5], [0.5, 1.0]]), 1)
    np.testing.assert_allclose(f.normalized, [[0.8, 0.2], [0.2, 0.8]], atol=1e-10)
    assert abs(build_spillover_table(f).total_index - 20.0) <= 1e-10
    phi = np.array([[[0.5, 0.2], [0.0, 0.4]]])
    sigma = np.array([[1.0, 0.3], [0.3, 0.7]])
    got = gfevd(_var_fit(phi, sigma), 10).normalized
    np.testing.assert_allclose(got, brute_force_gfevd(phi, sigma, 10), atol=1e-10)
    assert time.perf_counter() - t0 < 1.0


@pytest.mark.slow
@pytest.mark.acceptance(5, "GARCH(1,1) recovery over 50 paths")
def test_c5_garch_recovery():
    t0 = time.perf_counter()
    true = GarchParams(1e-6, 0.05, 0.90)
    err_a, err_b = [], []
    for rep in range(50):
        fit = fit_garch11(simulate_garch(true, 5000, 10_000 + rep))
        err_a.append(abs(fit.params.alpha - 0.05))
        err_b.append(abs(fit.params.beta - 0.90))
    print(f"median |alpha err| {np.median(err_a):.4f}, median |beta err| {np.median(err_b):.4f}")
    assert np.median(err_a) <= 0.02
    assert np.median(err_b) <= 0.03
    assert time.perf_counter() - t0 < 120


@pytest.mark.slow
@pytest.mark.acceptance(6, "DCC recovery over 50 bivariate paths")
def test_c6_dcc_recovery():
    t0 = time.perf_counter()
    g = [GarchParams(1e-6, 0.05, 0.90), GarchParams(2e-6, 0.08, 0.88)]
    q = np.array([[1.0, 0.4], [0.4, 1.0]])
    gaps = []
    for rep in range(50):
        fit = fit_dcc(simulate_dcc(g, 0.02, 0.97, q, 3000, 20_000 + rep))
        R = fit.corr_path
        np.testing.assert_array_equal(R[:, [0, 1], [0, 1]], 1.0)
        assert np.linalg.eigvalsh(R).min() >= -1e-10
        gaps.append(abs(fit.params.theta + fit.params.eta - 0.99))
    print(f"median |theta + eta - 0.99| {np.median(gaps):.4f}")
    assert np.median(gaps) <= 0.05
    assert time.perf_counter() - t0 < 300


@pytest.mark.slow
@pytest.mark.acceptance(7, "BEKK direction power, PD paths, N=1 equivalence")
def test_c7_bekk_direction():
    t0 = time.perf_counter()
    a = np.array([[0.3, 0.0], [0.15, 0.3]])  # market 1's shock feeds market 0
    b = 0.9 * np.eye(2)
    c = intercept_for_covariance(a, b, np.eye(2))
    correct = 0
    for rep in range(20):
        fit = fit_bekk(simulate_bekk(BekkParams(c, a, b), 4000, 30_000 + rep))
        assert np.linalg.eigvalsh(fit.cov_path).min() > 0
        correct += classify_direction(fit, 0, 1, 0.05).classification == "j_to_i"
    print(f"planted direction recovered in {correct}/20 paths")
    assert correct >= 14

    r = simulate_garch(GarchParams(1e-6, 0.05, 0.9), 3000, 7)
    H = bekk_filter(BekkParams([[1e-3]], [[0.05 ** 0.5]], [[0.9 ** 0.5]]), r[:, None])
    _, sig2 = garch_filter(GarchParams(1e-6, 0.05, 0.9), r)
    np.testing.assert_allclose(H[:, 0, 0], sig2, rtol=0, atol=1e-12)
    assert time.perf_counter() - t0 < 900


@pytest.mark.acceptance(8, "Rolling engine: 849 windows, slice equivalence, runtime")
def test_c8_rolling_engine():
    coefs = 0.35 * np.eye(5) + 0.08 * np.roll(np.eye(5), 1, axis=1)
    y = np.abs(simulate_var(np.full(5, 10.0), [coefs], np.eye(5) + 0.3, 952, 8))
    panel = VolatilityPanel.from_array(y, [f"m{i}" for i in range(5)], "2017-03-01")
    cfg = RollingConfig(window_length=104, horizon=10, lag=4)
    t0 = time.perf_counter()
    s = rolling_spillover(panel, cfg)
    elapsed = time.perf_counter() - t0
    assert len(s) == 849 and s.ok.all()
    for k in np.linspace(0, 848, 10).astype(int):
        alone = standalone_window(panel, k, cfg)
        assert abs(s.total[k] - alone.total_index) <= 1e-12
        assert np.max(np.abs(s.to[k] - alone.directional_to)) <= 1e-12
        assert np.max(np.abs(s.from_[k] - alone.directional_from)) <= 1e-12
        assert np.max(np.abs(s.pairwise[k] - alone.net_pairwise)) <= 1e-12
    print(f"849 windows in {elapsed:.2f} s")
    assert elapsed < 60


def _random_var(seed, n, p=2):
    g = np.random.default_rng(seed)
    coefs = g.normal(0, 0.6 / (n * p), size=(p, n, n))
    L = np.tril(g.normal(0, 0.5, (n, n)))
    L[np.diag_indices(n)] = np.abs(L[np.diag_indices(n)]) + 0.3
    return coefs, L @ L.T, int(g.integers(1, 15))


@pytest.mark.acceptance(9, "Property suite")
@PROPERTY_CASES
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_c9_fevd_rows_sum_to_one(seed, n):
    coefs, sigma, H = _random_var(seed, n)
    np.testing.assert_allclose(gfevd(_var_fit(coefs, sigma), H).normalized.sum(axis=1), 1.0,
                               atol=1e-10)


@pytest.mark.acceptance(9, "Property suite")
@PROPERTY_CASES
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_c9_net_sums_to_zero_and_pairwise_antisymmetric(seed, n):
    coefs, sigma, H = _random_var(seed, n)
    t = build_spillover_table(gfevd(_var_fit(coefs, sigma), H))
    assert abs(t.net.sum()) <= 1e-9
    assert np.array_equal(t.net_pairwise, -t.net_pairwise.T)


@pytest.mark.acceptance(9, "Property suite")
@PROPERTY_CASES
@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.randoms(use_true_random=False))
def test_c9_total_index_permutation_invariant(seed, n, rnd):
    coefs, sigma, H = _random_var(seed, n)
    perm = np.array(rnd.sample(range(n), n))
    base = build_spillover_table(gfevd(_var_fit(coefs, sigma), H)).total_index
    moved = build_spillover_table(gfevd(
        _var_fit(coefs[:, perm][:, :, perm], sigma[np.ix_(perm, perm)]), H)).total_index
    assert abs(base - moved) <= 1e-9


@pytest.mark.acceptance(9, "Property suite")
@PROPERTY_CASES
@given(st.floats(1e-8, 10.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0),
       st.integers(0, 2**32 - 1))
def test_c9_garch_filter_positive(omega, alpha, beta, seed):
    r = np.random.default_rng(seed).standard_t(4, 300)
    _, sig2 = garch_filter(GarchParams(omega, alpha, beta), r)
    assert np.all(sig2 > 0)


@pytest.mark.acceptance(9, "Property suite")
@PROPERTY_CASES
@given(st.lists(st.floats(0.01, 1e4), min_size=2, max_size=40), st.floats(1e-3, 1e3))
def test_c9_log_returns_scale_invariant(prices, k):
    def panel(p):
        p = np.asarray(p, float)[:, None]
        return PricePanel(pd.bdate_range("2020-01-01", periods=len(p)), ["x"], p)

    np.testing.assert_allclose(log_returns(panel(np.asarray(prices) * k)).returns,
                               log_returns(panel(prices)).returns, atol=1e-12)


@pytest.mark.acceptance(9, "Property suite")
@PROPERTY_CASES
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_c9_parallel_rolling_bitwise(seed, workers):
    y = np.abs(simulate_var(np.full(3, 10.0), [0.3 * np.eye(3)], np.eye(3) + 0.2, 80, seed))
    panel = VolatilityPanel.from_array(y)
    seq = rolling_spillover(panel, RollingConfig(window_length=40, lag=1))
    par = rolling_spillover(panel, RollingConfig(window_length=40, lag=1, workers=workers))
    assert seq.to_csv(digits=0) == par.to_csv(digits=0)


@pytest.mark.acceptance(10, "Range-volatility spot value")
def test_c10_range_volatility():
    t0 = time.perf_counter()
    p = PricePanel(pd.bdate_range("2020-01-01", periods=1), ["x"], [[105.0]], [[110.0]], [[100.0]])
    assert abs(range_volatility(p).vol[0, 0] - 109.41) <= 0.01
    assert time.perf_counter() - t0 < 1.0
