"""Constrained NLL minimization by reparameterization, plus numerical derivatives.

The quasi-Newton engine is scipy's BFGS, driven in an unconstrained space
through a :class:`Transform`. Derivatives are central finite differences.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize
from scipy.special import expit, logit

__all__ = [
    "OptimResult",
    "InferenceResult",
    "Transform",
    "NumericalError",
    "SingularInformationError",
    "minimize",
    "numerical_gradient",
    "numerical_hessian",
    "hessian_from_gradient",
    "standard_errors",
    "sandwich_standard_errors",
]

_EPS3 = np.finfo(float).eps ** (1.0 / 3.0)
_EPS4 = np.finfo(float).eps ** (1.0 / 4.0)


class NumericalError(ArithmeticError):
    """An objective evaluation returned a non-finite value."""


class SingularInformationError(np.linalg.LinAlgError):
    """The observed information matrix is not positive definite."""


@dataclass(frozen=True)
class OptimResult:
    point: np.ndarray
    objective_value: float
    converged: bool
    iterations: int
    gradient_norm: float
    message: str = ""


@dataclass(frozen=True)
class InferenceResult:
    standard_errors: np.ndarray
    t_statistics: np.ndarray
    covariance: np.ndarray

    @property
    def p_values(self) -> np.ndarray:
        from scipy.stats import norm

        return 2.0 * norm.sf(np.abs(self.t_statistics))


class Transform:
    """Smooth bijection between R^k and a box/simplex-constrained region.

    Built from blocks:

    * ``identity`` -- unconstrained.
    * ``positive`` -- ``x = exp(u)``.
    * ``interval(lo, hi)`` -- ``x = lo + (hi - lo) * logistic(u)``.
    * ``bounded_sum(bound)`` over a pair ``(a, b)`` -- ``a, b >= 0`` and
      ``a + b < bound``, parameterized as total ``s = bound * logistic(u0)``
      and share ``a / s = logistic(u1)``.

    Examples
    --------
    >>> tr = Transform(3).positive(0).bounded_sum((1, 2), 1.0)
    >>> x = np.array([0.5, 0.1, 0.8])
    >>> np.allclose(tr.constrain(tr.unconstrain(x)), x)
    True
    """

    def __init__(self, size: int):
        self.size = int(size)
        self._blocks: list[tuple] = []
        self._used: set[int] = set()

    def _claim(self, idx: Sequence[int]):
        idx = [int(i) for i in idx]
        if any(i in self._used or not 0 <= i < self.size for i in idx):
            raise ValueError(f"indices {idx} overlap an existing block or are out of range")
        self._used.update(idx)
        return idx

    def positive(self, *idx: int) -> "Transform":
        self._blocks.append(("positive", self._claim(idx)))
        return self

    def interval(self, idx, lo: float, hi: float) -> "Transform":
        idx = [idx] if np.isscalar(idx) else list(idx)
        if not hi > lo:
            raise ValueError("interval needs hi > lo")
        self._blocks.append(("interval", self._claim(idx), float(lo), float(hi)))
        return self

    def bounded_sum(self, pair: tuple[int, int], bound: float) -> "Transform":
        if bound <= 0:
            raise ValueError("bound must be positive")
        self._blocks.append(("bounded_sum", self._claim(pair), float(bound)))
        return self

    def constrain(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        x = u.copy()
        for kind, idx, *args in self._blocks:
            if kind == "positive":
                x[idx] = np.exp(u[idx])
            elif kind == "interval":
                lo, hi = args
                x[idx] = lo + (hi - lo) * expit(u[idx])
            else:
                (bound,) = args
                s = bound * expit(u[idx[0]])
                share = expit(u[idx[1]])
                x[idx[0]] = s * share
                x[idx[1]] = s * (1.0 - share)
        return x

    def unconstrain(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = x.copy()
        for kind, idx, *args in self._blocks:
            if kind == "positive":
                if np.any(x[idx] <= 0):
                    raise ValueError(f"positive parameters {idx} must be > 0")
                u[idx] = np.log(x[idx])
            elif kind == "interval":
                lo, hi = args
                z = (x[idx] - lo) / (hi - lo)
                if np.any((z <= 0) | (z >= 1)):
                    raise ValueError(f"parameters {idx} outside ({lo}, {hi})")
                u[idx] = logit(z)
            else:
                (bound,) = args
                a, b = x[idx[0]], x[idx[1]]
                s = a + b
                if a < 0 or b < 0 or not 0 < s < bound:
                    raise ValueError(f"pair {idx} must be >= 0 with 0 < sum < {bound}")
                u[idx[0]] = logit(s / bound)
                u[idx[1]] = logit(a / s)
        return u


_POLISH_ROUNDS = 4


def _step(x: np.ndarray, rel: float) -> np.ndarray:
    return rel * (1.0 + np.abs(x))


def _eval(f, x, label):
    v = float(f(x))
    if not np.isfinite(v):
        raise NumericalError(f"objective non-finite at {label} probe {np.array2string(x)}")
    return v


def numerical_gradient(f: Callable, x, step=None) -> np.ndarray:
    """Central-difference gradient with step ``eps**(1/3) * (1 + |x|)``."""
    x = np.asarray(x, dtype=float)
    h = _step(x, _EPS3) if step is None else np.broadcast_to(np.asarray(step, float), x.shape)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        g[i] = (_eval(f, x + e, f"+{i}") - _eval(f, x - e, f"-{i}")) / (2.0 * h[i])
    return g


def numerical_hessian(f: Callable, x, step=None) -> np.ndarray:
    """Central-difference Hessian, symmetrized as ``(H + H') / 2``."""
    x = np.asarray(x, dtype=float)
    h = _step(x, _EPS4) if step is None else np.broadcast_to(np.asarray(step, float), x.shape)
    k = x.size
    f0 = _eval(f, x, "centre")
    H = np.empty((k, k))
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h[i]
        fp = _eval(f, x + ei, f"+{i}")
        fm = _eval(f, x - ei, f"-{i}")
        H[i, i] = (fp - 2.0 * f0 + fm) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(k)
            ej[j] = h[j]
            fpp = _eval(f, x + ei + ej, f"+{i}+{j}")
            fpm = _eval(f, x + ei - ej, f"+{i}-{j}")
            fmp = _eval(f, x - ei + ej, f"-{i}+{j}")
            fmm = _eval(f, x - ei - ej, f"-{i}-{j}")
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j])
    return 0.5 * (H + H.T)


def _chain(transform: Transform, u: np.ndarray, gradient: Callable) -> np.ndarray:
    x = transform.constrain(u)
    with np.errstate(all="ignore"):
        g = np.asarray(gradient(x), dtype=float)
    if not np.all(np.isfinite(g)):
        return np.zeros_like(u)
    # d x / d u by central differences of the (cheap) transform
    h = _step(u, _EPS3)
    J = np.empty((u.size, u.size))
    for i in range(u.size):
        e = np.zeros_like(u)
        e[i] = h[i]
        J[:, i] = (transform.constrain(u + e) - transform.constrain(u - e)) / (2.0 * h[i])
    return J.T @ g


def minimize(objective: Callable, init, transform: Transform | None = None, *,
             gtol: float = 1e-6, xtol: float = 1e-9, maxiter: int = 2000,
             starts: Sequence | None = None, gradient: Callable | None = None) -> OptimResult:
    """Minimize ``objective`` over the region described by ``transform``.

    ``init`` (and every entry of ``starts``) is given in the constrained
    space. The lowest-objective run over all starting points is returned; a
    run counts as converged when the unconstrained gradient norm is at most
    ``gtol``. BFGS itself is driven to ``gtol / 100`` so that slowly
    vanishing gradients near a boundary keep descending.
    Hitting ``maxiter`` is not an error. ``gradient``, if given, returns the
    exact gradient in the constrained space and replaces central differences.
    """
    init = np.asarray(init, dtype=float)
    transform = transform or Transform(init.size)
    if not np.isfinite(objective(init)):
        raise NumericalError("objective is not finite at the initial point")

    def f_u(u):
        try:
            v = objective(transform.constrain(u))
        except (FloatingPointError, np.linalg.LinAlgError, ValueError):
            return np.inf
        return v if np.isfinite(v) else np.inf

    def grad_u(u):
        if gradient is not None:
            return _chain(transform, u, gradient)
        h = _step(u, _EPS3)
        g = np.empty_like(u)
        for i in range(u.size):
            e = np.zeros_like(u)
            e[i] = h[i]
            fp, fm = f_u(u + e), f_u(u - e)
            if np.isfinite(fp) and np.isfinite(fm):
                g[i] = (fp - fm) / (2 * h[i])
            elif np.isfinite(fp):
                g[i] = (fp - f_u(u)) / h[i]
            elif np.isfinite(fm):
                g[i] = (f_u(u) - fm) / h[i]
            else:
                g[i] = 0.0
        return g

    best = None
    for x0 in [init] + [np.asarray(s, dtype=float) for s in (starts or [])]:
        try:
            u0 = transform.unconstrain(x0)
        except ValueError:
            continue
        if not np.isfinite(f_u(u0)):
            continue
        u, nit = u0, 0
        # a stalled line search on an ill-conditioned ridge usually recovers
        # once the inverse-Hessian approximation is reset
        for _ in range(_POLISH_ROUNDS):
            with warnings.catch_warnings(), np.errstate(all="ignore"):
                warnings.simplefilter("ignore", RuntimeWarning)
                res = optimize.minimize(f_u, u, jac=grad_u, method="BFGS",
                                        options={"gtol": 1e-2 * gtol, "maxiter": maxiter - nit,
                                                 "xrtol": xtol})
            nit += int(res.nit)
            improved = f_u(res.x) < f_u(u)
            if f_u(res.x) <= f_u(u):
                u = res.x
            gnorm = float(np.linalg.norm(grad_u(u)))
            if gnorm <= gtol or not improved or nit >= maxiter:
                break
        fu = f_u(u)
        cand = OptimResult(transform.constrain(u), float(fu), gnorm <= gtol,
                           nit, gnorm, str(res.message))
        if best is None or cand.objective_value < best.objective_value:
            best = cand
    if best is None:
        raise NumericalError("objective is not finite at any starting point")
    return best


def hessian_from_gradient(gradient: Callable, x, step=None) -> np.ndarray:
    """Central differences of an exact gradient, symmetrized."""
    x = np.asarray(x, dtype=float)
    h = _step(x, _EPS3) if step is None else np.broadcast_to(np.asarray(step, float), x.shape)
    H = np.empty((x.size, x.size))
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        H[:, i] = (np.asarray(gradient(x + e)) - np.asarray(gradient(x - e))) / (2.0 * h[i])
    if not np.all(np.isfinite(H)):
        raise NumericalError("gradient non-finite near the optimum")
    return 0.5 * (H + H.T)


def standard_errors(objective: Callable, point, step=None,
                    gradient: Callable | None = None) -> InferenceResult:
    """Inverse observed-information standard errors at a local minimum.

    ``objective`` is the total negative log-likelihood as a function of the
    constrained parameters. With ``gradient`` the Hessian is built from
    differences of the gradient instead of the objective.
    """
    point = np.asarray(point, dtype=float)
    if gradient is not None:
        H = hessian_from_gradient(gradient, point, step)
    else:
        H = numerical_hessian(objective, point, step)
    eig = np.linalg.eigvalsh(H)
    if not np.all(np.isfinite(eig)) or eig.min() <= 0 or eig.min() < 1e-12 * abs(eig.max()):
        cond = np.inf if eig.min() <= 0 else eig.max() / eig.min()
        raise SingularInformationError(
            "information matrix singular near optimum "
            f"(min eigenvalue {eig.min():.3g}, max {eig.max():.3g}, condition {cond:.3g})"
        )
    cov = np.linalg.inv(H)
    cov = 0.5 * (cov + cov.T)
    se = np.sqrt(np.diag(cov))
    return InferenceResult(se, point / se, cov)


def sandwich_standard_errors(terms: Callable, point, step=None) -> InferenceResult:
    """Robust (QML sandwich) standard errors.

    ``terms`` maps the constrained parameters to the vector of per-observation
    negative log-likelihood contributions; its sum is the objective.
    """
    point = np.asarray(point, dtype=float)
    total = lambda x: float(np.sum(terms(x)))  # noqa: E731
    H = numerical_hessian(total, point, step)
    try:
        Hinv = np.linalg.inv(H)
    except np.linalg.LinAlgError as exc:
        raise SingularInformationError("information matrix singular near optimum") from exc
    h = _step(point, _EPS3) if step is None else np.broadcast_to(np.asarray(step, float),
                                                                   point.shape)
    scores = np.empty((len(terms(point)), point.size))
    for i in range(point.size):
        e = np.zeros_like(point)
        e[i] = h[i]
        scores[:, i] = (terms(point + e) - terms(point - e)) / (2.0 * h[i])
    cov = Hinv @ (scores.T @ scores) @ Hinv
    cov = 0.5 * (cov + cov.T)
    se = np.sqrt(np.diag(cov))
    return InferenceResult(se, point / se, cov)
