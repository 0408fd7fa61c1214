import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from volspill.bekk import (BekkConfig, BekkParams, _nll_grad, bekk_filter, bekk_nll,
                           classify_direction, direction_from_tstats, fit_bekk,
                           intercept_for_covariance, parameter_labels, simulate_bekk)
from volspill.garch import GarchParams, fit_garch11, garch_filter, simulate_garch
from volspill.optim import numerical_gradient

ONE_WAY_A = np.array([[0.3, 0.0], [0.15, 0.3]])


def _planted(seed, T=2000):
    b = 0.9 * np.eye(2)
    c = intercept_for_covariance(ONE_WAY_A, b, np.eye(2))
    return simulate_bekk(BekkParams(c, ONE_WAY_A, b), T, seed)


def test_degenerate_constant_covariance(rng):
    c = np.array([[0.5, 0.0], [0.2, 0.4]])
    H = bekk_filter(BekkParams(c, np.zeros((2, 2)), np.zeros((2, 2))), rng.standard_normal((30, 2)))
    np.testing.assert_allclose(H[1:], np.broadcast_to(c @ c.T, H[1:].shape), atol=1e-15)


def test_one_step_hand_check():
    A, B = 0.3 * np.eye(2), 0.9 * np.eye(2)
    C = np.array([[0.2, 0.0], [0.05, 0.3]])
    e_prev = np.array([0.4, -1.1])
    H_prev = np.array([[1.2, 0.3], [0.3, 0.8]])
    H = bekk_filter(BekkParams(C, A, B), np.vstack([e_prev, [0.0, 0.0]]), H_prev)
    expected = C @ C.T + A.T @ np.outer(e_prev, e_prev) @ A + B.T @ H_prev @ B
    np.testing.assert_allclose(H[1], expected, rtol=0, atol=1e-12)


def test_convention_off_diagonal_meaning():
    # a[1,0] routes market 1's shock into market 0's variance
    a = np.zeros((2, 2))
    a[1, 0] = 0.5
    c = 0.1 * np.eye(2)
    H = bekk_filter(BekkParams(c, a, np.zeros((2, 2))), np.array([[0.0, 2.0], [0.0, 0.0]]))
    assert H[1, 0, 0] == pytest.approx(0.01 + 1.0)
    assert H[1, 1, 1] == pytest.approx(0.01)


def test_univariate_filter_equals_garch(rng):
    r = rng.standard_normal(3000) * 0.02
    c, a, b = 0.003, 0.25, 0.94
    H = bekk_filter(BekkParams([[c]], [[a]], [[b]]), r[:, None])
    _, sig2 = garch_filter(GarchParams(c ** 2, a ** 2, b ** 2), r)
    np.testing.assert_allclose(H[:, 0, 0], sig2, rtol=1e-12, atol=1e-12)


def test_univariate_fit_matches_garch_fit():
    r = simulate_garch(GarchParams(1e-6, 0.05, 0.9), 4000, 3)
    b = fit_bekk(r[:, None])
    g = fit_garch11(r)
    # the GARCH mean is estimated jointly, the BEKK one is the sample mean
    assert b.params.a[0, 0] ** 2 == pytest.approx(g.params.alpha, abs=2e-3)
    assert b.params.b[0, 0] ** 2 == pytest.approx(g.params.beta, abs=2e-3)
    assert b.params.c[0, 0] ** 2 == pytest.approx(g.params.omega, rel=0.02)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_adjoint_gradient_matches_finite_differences(seed):
    g = np.random.default_rng(seed)
    n = 3
    A = 0.3 * np.eye(n) + 0.05 * g.standard_normal((n, n))
    B = 0.9 * np.eye(n) + 0.03 * g.standard_normal((n, n))
    C = np.linalg.cholesky(0.1 * np.eye(n) + 0.02)
    eps = g.standard_normal((200, n))
    H0 = np.cov(eps.T, bias=True)

    def f(v):
        return bekk_nll(BekkParams.from_vector(v, n), eps, H0)

    x = BekkParams(C, A, B).to_vector()
    total, gCC, gA, gB = _nll_grad(C @ C.T, A, B, eps, H0)
    assert total == pytest.approx(f(x), rel=1e-12)
    analytic = np.concatenate([(2 * gCC @ C)[np.tril_indices(n)], gA.ravel(), gB.ravel()])
    np.testing.assert_allclose(analytic, numerical_gradient(f, x), rtol=1e-5, atol=1e-4)


def test_path_symmetric_positive_definite():
    fit = fit_bekk(_planted(1), BekkConfig(restarts=2))
    H = fit.cov_path
    np.testing.assert_allclose(H, np.swapaxes(H, 1, 2), atol=1e-12)
    assert np.linalg.eigvalsh(H).min() > 0


def test_fit_sign_normalization_and_labels():
    fit = fit_bekk(_planted(2), BekkConfig(restarts=2))
    p = fit.params
    assert np.all(np.diag(p.c) > 0) and p.a[0, 0] >= 0 and p.b[0, 0] >= 0
    assert fit.labels == tuple(parameter_labels(2))
    flipped = BekkParams(p.c, -p.a, -p.b)
    assert bekk_nll(flipped, fit.residuals) == bekk_nll(p, fit.residuals)
    assert flipped.normalized().a[0, 0] >= 0
    rows = fit.coefficient_table()
    assert [r[0] for r in rows][:3] == ["C(1,1)", "C(2,1)", "C(2,2)"]


def test_nesting_full_beats_diagonal():
    r = _planted(3)
    full = fit_bekk(r, BekkConfig(restarts=2))
    diag = fit_bekk(r, BekkConfig(diagonal=True, restarts=2))
    assert full.loglik >= diag.loglik - 1e-6


def test_variance_targeting_close_to_free_fit():
    r = _planted(4)
    free = fit_bekk(r, BekkConfig(restarts=2))
    vt = fit_bekk(r, BekkConfig(variance_targeting=True, restarts=2))
    assert vt.loglik <= free.loglik + 1e-6
    np.testing.assert_allclose(vt.params.a, free.params.a, atol=0.05)


def test_refuses_large_systems(rng):
    with pytest.raises(ValueError, match="force"):
        fit_bekk(rng.standard_normal((500, 7)))


def test_explosive_fit_is_flagged_not_refused():
    # variance grows by e^4 over the sample, so the best fit needs persistence > 1
    g = np.random.default_rng(3)
    r = 0.01 * np.exp(np.linspace(0, 4, 1500)) * g.standard_normal(1500)
    fit = fit_bekk(r[:, None])
    assert fit.params.persistence() >= 1
    assert any("explosive" in w for w in fit.warnings)
    assert np.all(np.isfinite(fit.cov_path))


def test_short_sample_warns():
    # 11 parameters for N=2 -> 275 observations recommended
    with pytest.warns(RuntimeWarning, match="recommended"):
        fit = fit_bekk(_planted(6, 250), BekkConfig(restarts=1))
    assert any("recommended" in w for w in fit.warnings)


def test_null_direction():
    t = np.array([[10.0, 1.0], [-1.2, 10.0]])
    v = direction_from_tstats(t, t * 0.5, 0, 1)
    assert v.classification == "none"
    assert v.channels == {"i_to_j": None, "j_to_i": None}


# t-statistics from the published five-market table; market 1 is the
# transmitter in A(1,j), B(1,j) under the a[j, i] = j -> i convention
_PUB_A = {(0, 1): -0.2152, (0, 2): -0.1023, (0, 3): -3.9158, (0, 4): -2.1316,
          (1, 0): -1.2601, (2, 0): 2.1036, (3, 0): -0.2711, (4, 0): -0.7408}
_PUB_B = {(0, 1): -0.8303, (0, 2): 0.2763, (0, 3): 4.1241, (0, 4): 2.6884,
          (1, 0): 2.7138, (2, 0): -4.1438, (3, 0): 1.0194, (4, 0): 2.5145}


def _pub(table):
    m = np.full((5, 5), np.nan)
    for (i, j), t in table.items():
        m[i, j] = t
    return m


@pytest.mark.parametrize("j, cls, channels", [
    (1, "j_to_i", {"i_to_j": None, "j_to_i": "garch"}),
    (2, "j_to_i", {"i_to_j": None, "j_to_i": "both"}),
    (3, "i_to_j", {"i_to_j": "both", "j_to_i": None}),
    (4, "bidirectional", {"i_to_j": "both", "j_to_i": "garch"}),
])
def test_published_readings(j, cls, channels):
    v = direction_from_tstats(_pub(_PUB_A), _pub(_PUB_B), 0, j, level=0.05)
    assert v.classification == cls
    assert v.channels == channels


def test_classification_is_function_of_flags():
    for bits in range(16):
        flags = [(bits >> k) & 1 for k in range(4)]
        ta = np.zeros((2, 2))
        tb = np.zeros((2, 2))
        ta[1, 0], tb[1, 0], ta[0, 1], tb[0, 1] = (5.0 * f for f in flags)
        v = direction_from_tstats(ta, tb, 0, 1)
        j_to_i, i_to_j = flags[0] or flags[1], flags[2] or flags[3]
        expected = {(0, 0): "none", (1, 0): "i_to_j", (0, 1): "j_to_i",
                    (1, 1): "bidirectional"}[(bool(i_to_j), bool(j_to_i))]
        assert v.classification == expected


def test_planted_direction_single_path():
    fit = fit_bekk(_planted(5, 4000))
    assert classify_direction(fit, 0, 1).classification == "j_to_i"
    assert abs(fit.params.a[1, 0] - 0.15) < 0.06


@pytest.mark.slow
def test_diagonal_recovery_within_two_se():
    a, b = 0.3 * np.eye(2), 0.9 * np.eye(2)
    c = intercept_for_covariance(a, b, np.eye(2))
    ok = 0
    for rep in range(20):
        fit = fit_bekk(simulate_bekk(BekkParams(c, a, b), 4000, 300 + rep),
                       BekkConfig(restarts=2))
        rows = dict((r[0], r[1:]) for r in fit.coefficient_table())
        ok += all(abs(rows[k][0] - v) <= 2 * rows[k][1]
                  for k, v in {"A(1,1)": 0.3, "A(2,2)": 0.3, "B(1,1)": 0.9,
                               "B(2,2)": 0.9}.items())
    assert ok >= 14
