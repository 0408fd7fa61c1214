import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from volspill.panel import (PARKINSON_CONSTANT, PanelError, PricePanel, ReturnPanel,
                            descriptive_stats, jarque_bera, load_price_panel, log_returns,
                            range_volatility)

from conftest import write_csv


def test_load_three_rows_two_series(tmp_path):
    path = write_csv(tmp_path / "p.csv", {"a": [1.0, 2.0, 3.0], "b": [4.0, 5.0, 6.0]})
    panel = load_price_panel(path, min_rows=1)
    assert panel.close.shape == (3, 2)
    assert panel.names == ("a", "b")
    assert not panel.has_range


def test_inner_join_drops_unshared_date(tmp_path):
    d = pd.bdate_range("2020-01-01", periods=4)
    p1 = write_csv(tmp_path / "x.csv", {"a": [1.0, 2, 3, 4]}, d)
    p2 = write_csv(tmp_path / "y.csv", {"b": [5.0, 6, 7]}, d[[0, 1, 3]])
    panel = load_price_panel([p1, p2], min_rows=1)
    assert panel.n_obs == 3
    assert set(panel.dates) == set(d[[0, 1, 3]].values.astype("datetime64[D]"))


def test_missing_cell_drops_row(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("date,a,b\n2020-01-01,1,2\n2020-01-02,,3\n2020-01-03,4,5\n")
    assert load_price_panel(path, min_rows=1).n_obs == 2


def test_unparseable_cell_names_location(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("date,a,b\n2020-01-01,1,2\n2020-01-02,oops,3\n")
    with pytest.raises(PanelError, match=r"row 3, column 'a'"):
        load_price_panel(path, min_rows=1)


def test_insufficient_rows(tmp_path):
    path = write_csv(tmp_path / "p.csv", {"a": np.arange(1.0, 11.0)})
    with pytest.raises(PanelError, match="insufficient data"):
        load_price_panel(path)


def test_wide_schema_and_companions(tmp_path):
    wide = write_csv(tmp_path / "w.csv", {"x_close": [10.0, 11], "x_high": [11.0, 12],
                                          "x_low": [9.0, 10]})
    panel = load_price_panel(wide, min_rows=1)
    assert panel.has_range and panel.names == ("x",)
    np.testing.assert_array_equal(panel.high[:, 0], [11.0, 12])

    write_csv(tmp_path / "c.csv", {"x": [10.0, 11]})
    write_csv(tmp_path / "c.high.csv", {"x": [11.0, 12]})
    write_csv(tmp_path / "c.low.csv", {"x": [9.0, 10]})
    comp = load_price_panel(tmp_path / "c.csv", min_rows=1)
    np.testing.assert_array_equal(comp.low, panel.low)


def test_high_below_low_rejected():
    with pytest.raises(PanelError, match="high < low"):
        PricePanel(pd.bdate_range("2020-01-01", periods=2), ["a"], [[1.0], [1.0]],
                   high=[[1.0], [0.9]], low=[[1.0], [1.0]])


def _panel(close, high=None, low=None):
    close = np.asarray(close, dtype=float).reshape(len(close), -1)
    dates = pd.bdate_range("2020-01-01", periods=len(close))
    names = [f"s{i}" for i in range(close.shape[1])]
    if high is not None:
        high = np.asarray(high, float).reshape(close.shape)
        low = np.asarray(low, float).reshape(close.shape)
    return PricePanel(dates, names, close, high, low)


def test_log_returns_examples():
    np.testing.assert_array_equal(log_returns(_panel([100, 100, 100])).returns[:, 0], [0, 0])
    assert log_returns(_panel([100, 200])).returns[0, 0] == pytest.approx(0.693147, abs=1e-6)
    with pytest.raises(PanelError):
        log_returns(_panel([100]))


def test_log_returns_match_elementwise(rng):
    close = np.exp(rng.normal(4, 0.5, size=(50, 3)))
    r = log_returns(_panel(close)).returns
    oracle = np.array([[math.log(close[t + 1, i]) - math.log(close[t, i]) for i in range(3)]
                       for t in range(49)])
    np.testing.assert_allclose(r, oracle, rtol=0, atol=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.01, 1e4), min_size=2, max_size=30), st.floats(1e-3, 1e3))
def test_log_returns_scale_invariant(prices, k):
    base = log_returns(_panel(prices)).returns
    scaled = log_returns(_panel(np.asarray(prices) * k)).returns
    np.testing.assert_allclose(scaled, base, atol=1e-12)


def test_range_volatility_values():
    vol = range_volatility(_panel([105.0], [110.0], [100.0])).vol[0, 0]
    # 0.361 * ln(1.1)^2 = 0.00327933..., annualized 100 * sqrt(365 * that)
    assert 0.361 * math.log(1.1) ** 2 == pytest.approx(0.00327933, abs=1e-8)
    assert vol == pytest.approx(109.41, abs=0.01)
    exact = range_volatility(_panel([105.0], [110.0], [100.0]), PARKINSON_CONSTANT).vol[0, 0]
    assert exact == pytest.approx(109.36, abs=0.01)
    assert range_volatility(_panel([5.0], [5.0], [5.0])).vol[0, 0] == 0.0
    assert range_volatility(_panel([105.0], [110.0], [100.0]),
                            annualization_days=252).vol[0, 0] < vol


def test_range_volatility_needs_range():
    with pytest.raises(PanelError):
        range_volatility(_panel([1.0, 2.0]))


@settings(max_examples=100, deadline=None)
@given(st.floats(1.0, 1e3), st.floats(1.0, 2.0), st.floats(1.0, 2.0))
def test_range_volatility_monotone(low, r1, r2):
    lo, hi = sorted((r1, r2))
    v_lo = range_volatility(_panel([low], [low * lo], [low])).vol[0, 0]
    v_hi = range_volatility(_panel([low], [low * hi], [low])).vol[0, 0]
    assert v_lo <= v_hi + 1e-12
    assert (v_lo == 0) == (lo == 1.0)


def test_jarque_bera_values():
    jb, p = jarque_bera(2877, -0.0028, 6.1062)
    assert jb == pytest.approx(1156.61, rel=0.005)
    assert p < 1e-10
    assert jarque_bera(100, 0.0, 3.0)[0] == 0.0


@settings(max_examples=50, deadline=None)
@given(st.floats(-100, 100), st.floats(0.01, 100), st.integers(0, 2**32 - 1))
def test_jb_affine_invariant(shift, scale, seed):
    x = np.random.default_rng(seed).standard_t(5, size=200)
    a = descriptive_stats(ReturnPanel.from_array(x[:, None]), adf_lags=0).series[0]
    b = descriptive_stats(ReturnPanel.from_array((shift + scale * x)[:, None]),
                          adf_lags=0).series[0]
    assert b.jb == pytest.approx(a.jb, rel=1e-6, abs=1e-9)


def test_descriptive_stats_fields(rng):
    x = rng.standard_normal((500, 2)) * 0.01
    rep = descriptive_stats(ReturnPanel.from_array(x, ["a", "b"]))
    s = rep["a"]
    assert s.max >= s.mean >= s.min and s.std >= 0 and s.jb >= 0 and s.n == 500
    assert 2.0 < s.kurtosis < 4.0
    with pytest.raises(PanelError):
        descriptive_stats(ReturnPanel.from_array(x[:20]))


def test_adf_simulation():
    white, walk = 0, 0
    for rep in range(20):
        g = np.random.default_rng(1000 + rep)
        e = g.standard_normal(2000)
        rw = np.cumsum(g.standard_normal(2000))
        white += descriptive_stats(ReturnPanel.from_array(e[:, None])).series[0].adf_pvalue < 0.01
        walk += descriptive_stats(ReturnPanel.from_array(rw[:, None])).series[0].adf_pvalue > 0.10
    assert white == 20
    # each random walk fails to reject with probability 0.9 under the null
    assert walk >= 15
