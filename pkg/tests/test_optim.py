import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from volspill.optim import (NumericalError, SingularInformationError, Transform, minimize,
                            numerical_gradient, numerical_hessian, sandwich_standard_errors,
                            standard_errors)


def test_quadratic():
    res = minimize(lambda x: (x[0] - 3.0) ** 2, [0.0])
    assert res.converged
    assert abs(res.point[0] - 3.0) < 1e-8


def test_positive_boundary():
    res = minimize(lambda x: x[0] ** 2, [1.0], Transform(1).positive(0))
    assert res.converged
    assert 0 < res.point[0] < 1e-4


def test_rosenbrock():
    f = lambda x: (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2  # noqa: E731
    res = minimize(f, [-1.2, 1.0])
    np.testing.assert_allclose(res.point, [1.0, 1.0], atol=1e-6)


def test_analytic_gradient_path_agrees():
    f = lambda x: (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2  # noqa: E731
    g = lambda x: np.array([-2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2),  # noqa: E731
                            200 * (x[1] - x[0] ** 2)])
    res = minimize(f, [-1.2, 1.0], gradient=g)
    np.testing.assert_allclose(res.point, [1.0, 1.0], atol=1e-6)


def test_best_of_starts_not_worse_than_any_start():
    f = lambda x: np.sin(3 * x[0]) + 0.1 * x[0] ** 2  # noqa: E731
    starts = [[-3.0], [0.5], [2.0]]
    res = minimize(f, [4.0], starts=starts)
    assert all(res.objective_value <= f(np.array(s)) + 1e-15 for s in [[4.0]] + starts)


def test_non_finite_init_is_error():
    with pytest.raises(NumericalError), np.errstate(invalid="ignore"):
        minimize(lambda x: np.log(x[0]), [-1.0])


def test_iteration_cap_not_error():
    f = lambda x: (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2  # noqa: E731
    res = minimize(f, [-1.2, 1.0], maxiter=2)
    assert not res.converged


def test_hessian_of_quadratic_form():
    A = np.array([[2.0, 0.3, -0.1], [0.3, 1.0, 0.2], [-0.1, 0.2, 3.0]])
    H = numerical_hessian(lambda x: x @ A @ x, np.array([0.3, -0.2, 0.5]))
    np.testing.assert_allclose(H, 2 * A, atol=1e-5)
    assert np.array_equal(H, H.T)


def test_gradient_sum_of_squares():
    g = numerical_gradient(lambda x: np.sum(x ** 2), np.array([1.0, 2.0]))
    np.testing.assert_allclose(g, [2.0, 4.0], atol=1e-7)


def test_gradient_error_names_probe():
    f = lambda x: 1.0 / (x[0] - 1.0) if x[0] > 1.0 else np.nan  # noqa: E731
    with pytest.raises(NumericalError, match="probe"):
        numerical_gradient(f, np.array([1.0 + 1e-8]))


def test_richardson_consistency_on_garch_nll():
    from volspill.garch import GarchParams, garch_nll_terms, simulate_garch

    r = simulate_garch(GarchParams(0.05, 0.08, 0.9), 2000, 3)

    def f(x):
        return float(np.sum(garch_nll_terms(GarchParams(x[1], x[2], x[3], phi0=x[0]), r)))

    x = np.array([0.01, 0.06, 0.07, 0.88])
    h = 1e-4 * (1 + np.abs(x))
    g1 = numerical_gradient(f, x, h)
    g2 = numerical_gradient(f, x, h / 2)
    # central differences: error ~ c h^2, so the gap shrinks ~4x at half step
    g4 = numerical_gradient(f, x, h / 4)
    assert np.all(np.abs(g2 - g4) <= 0.5 * np.abs(g1 - g2) + 1e-6 * np.abs(g1))


def test_gaussian_mean_standard_error(rng):
    sigma, n = 2.0, 400
    y = rng.normal(1.0, sigma, n)
    nll = lambda m: 0.5 * np.sum((y - m[0]) ** 2) / sigma ** 2  # noqa: E731
    inf = standard_errors(nll, np.array([y.mean()]))
    assert inf.standard_errors[0] == pytest.approx(sigma / np.sqrt(n), rel=0.01)
    assert inf.t_statistics[0] == pytest.approx(y.mean() / inf.standard_errors[0])


def test_sandwich_equals_plain_under_correct_model(rng):
    y = rng.normal(0.5, 1.0, 5000)
    terms = lambda m: 0.5 * (y - m[0]) ** 2  # noqa: E731
    m = np.array([y.mean()])
    plain = standard_errors(lambda v: np.sum(terms(v)), m)
    robust = sandwich_standard_errors(terms, m)
    assert robust.standard_errors[0] == pytest.approx(plain.standard_errors[0], rel=0.05)


def test_flat_objective_is_singular():
    with pytest.raises(SingularInformationError, match="information matrix singular near optimum"):
        standard_errors(lambda x: (x[0] - 1) ** 2 + 0.0 * x[1], np.array([1.0, 0.0]))


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 1e6), st.floats(-4.9, 4.9), st.floats(0.01, 0.98), st.floats(0.01, 0.99))
def test_transform_round_trip(pos, mid, total, share):
    tr = Transform(4).positive(0).interval(1, -5.0, 5.0).bounded_sum((2, 3), 1.0)
    x = np.array([pos, mid, total * share, total * (1 - share)])
    np.testing.assert_allclose(tr.constrain(tr.unconstrain(x)), x, rtol=1e-12, atol=1e-12)


def test_transform_rejects_infeasible():
    tr = Transform(2).bounded_sum((0, 1), 1.0)
    with pytest.raises(ValueError):
        tr.unconstrain([0.6, 0.5])
    with pytest.raises(ValueError):
        Transform(2).positive(0).positive(0)
