"""Univariate GARCH(1,1) with an AR(p) mean, fitted by quasi-maximum likelihood."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

from . import optim
from .optim import InferenceResult, OptimResult

__all__ = [
    "GarchParams",
    "GarchFit",
    "GarchConfig",
    "EstimationError",
    "garch_filter",
    "garch_nll_terms",
    "simulate_garch",
    "fit_garch11",
]

_LOG2PI = math.log(2.0 * math.pi)


class EstimationError(RuntimeError):
    """Raised when no restart of an estimator converges."""

    def __init__(self, message: str, best: OptimResult | None = None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class GarchParams:
    omega: float
    alpha: float
    beta: float
    phi0: float = 0.0
    phi: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(float(v) for v in np.atleast_1d(self.phi)))

    @property
    def p(self) -> int:
        return len(self.phi)

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta

    def validate(self, stationarity_bound: float | None = 1.0) -> "GarchParams":
        if not self.omega > 0:
            raise ValueError(f"omega must be > 0, got {self.omega}")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if stationarity_bound is not None and self.persistence >= stationarity_bound:
            raise ValueError(
                f"alpha + beta = {self.persistence:.6g} is not below {stationarity_bound}"
            )
        return self

    def as_vector(self) -> np.ndarray:
        return np.array([self.phi0, *self.phi, self.omega, self.alpha, self.beta])

    @classmethod
    def from_vector(cls, x, p: int = 0) -> "GarchParams":
        x = np.asarray(x, dtype=float)
        return cls(omega=x[p + 1], alpha=x[p + 2], beta=x[p + 3], phi0=x[0], phi=tuple(x[1:p + 1]))

    def names(self) -> list[str]:
        return ["phi0", *[f"phi{i + 1}" for i in range(self.p)], "omega", "alpha", "beta"]


@dataclass(frozen=True)
class GarchConfig:
    """Estimation options for :func:`fit_garch11`.

    ``allow_igarch`` relaxes the persistence bound to 1.2.
    """

    stationarity_bound: float = 0.9999
    allow_igarch: bool = False
    min_obs: int = 250
    restarts: int = 4
    seed: int = 0
    gtol: float = 1e-6
    maxiter: int = 2000
    robust_se: bool = False

    @property
    def bound(self) -> float:
        return 1.2 if self.allow_igarch else self.stationarity_bound


@dataclass(frozen=True)
class GarchFit:
    params: GarchParams
    cond_variance: np.ndarray
    residuals: np.ndarray
    std_residuals: np.ndarray
    loglik: float
    inference: InferenceResult | None
    optim: OptimResult | None = None
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def n_obs(self) -> int:
        return len(self.residuals)

    def summary(self) -> dict[str, tuple[float, float, float]]:
        """``{name: (estimate, standard_error, t)}`` with NaNs where unavailable."""
        est = self.params.as_vector()
        if self.inference is None:
            se = np.full_like(est, np.nan)
        else:
            se = self.inference.standard_errors
        return {n: (e, s, e / s) for n, e, s in zip(self.params.names(), est, se)}


def _mean_residuals(returns: np.ndarray, phi0: float, phi: tuple[float, ...]) -> np.ndarray:
    p = len(phi)
    eps = returns[p:] - phi0
    for i, c in enumerate(phi, start=1):
        eps = eps - c * returns[p - i:len(returns) - i]
    return eps


def _variance_path(eps: np.ndarray, omega: float, alpha: float, beta: float,
                   initial: float) -> np.ndarray:
    sig2 = np.empty_like(eps)
    sig2[0] = initial
    if len(eps) > 1:
        drive = omega + alpha * eps[:-1] ** 2
        sig2[1:] = lfilter([1.0], [1.0, -beta], drive, zi=[beta * initial])[0]
    return sig2


def garch_filter(params: GarchParams, returns, initial_variance: float | None = None):
    r"""Mean-equation residuals and conditional variances.

    .. math::
        \varepsilon_t = R_t - \phi_0 - \sum_i \phi_i R_{t-i}, \qquad
        \sigma^2_t = \omega + \alpha\varepsilon^2_{t-1} + \beta\sigma^2_{t-1}

    The first ``p`` returns only serve as lags. The recursion starts from the
    sample variance of the residuals unless ``initial_variance`` is given.

    Returns
    -------
    residuals, cond_variance : ndarray
        Both of length ``len(returns) - p``.
    """
    r = np.asarray(returns, dtype=float)
    if r.ndim != 1:
        raise ValueError("returns must be one-dimensional")
    if not np.all(np.isfinite(r)):
        raise ValueError("returns contain non-finite values")
    if len(r) <= params.p:
        raise ValueError("need more observations than AR lags")
    eps = _mean_residuals(r, params.phi0, params.phi)
    init = float(np.var(eps)) if initial_variance is None else float(initial_variance)
    return eps, _variance_path(eps, params.omega, params.alpha, params.beta, init)


def garch_nll_terms(params: GarchParams, returns) -> np.ndarray:
    """Per-observation Gaussian negative log-likelihood contributions."""
    eps, sig2 = garch_filter(params, returns)
    return 0.5 * (_LOG2PI + np.log(sig2) + eps ** 2 / sig2)


def simulate_garch(params: GarchParams, n_obs: int, rng=None, burn: int = 500,
                   return_variance: bool = False):
    """Simulate returns from the AR(p)-GARCH(1,1) recursion with Gaussian shocks.

    The variance starts at its unconditional level (or ``omega`` when
    ``alpha + beta >= 1``) and the first ``burn`` draws are discarded.
    """
    rng = np.random.default_rng(rng)
    params.validate(stationarity_bound=None)
    total = n_obs + burn
    z = rng.standard_normal(total)
    p = params.p
    r = np.zeros(total + p)
    sig2 = np.empty(total)
    eps_prev = 0.0
    pers = params.persistence
    s2 = params.omega / (1.0 - pers) if pers < 1 else params.omega
    for t in range(total):
        if t > 0:
            s2 = params.omega + params.alpha * eps_prev ** 2 + params.beta * s2
        sig2[t] = s2
        eps_prev = math.sqrt(s2) * z[t]
        mean = params.phi0 + sum(c * r[p + t - i] for i, c in enumerate(params.phi, start=1))
        r[p + t] = mean + eps_prev
    returns = r[p + burn:]
    if return_variance:
        return returns, sig2[burn:]
    return returns


def _starting_points(y: np.ndarray, p: int, bound: float, restarts: int, seed: int):
    var = float(np.var(y))
    base = [float(np.mean(y)), *([0.0] * p), 0.05 * var, 0.05, 0.90]
    if base[-1] + base[-2] >= bound:
        base[-1] = 0.9 * bound - base[-2]
    rng = np.random.default_rng(seed)
    starts = []
    for _ in range(restarts):
        a = rng.uniform(0.02, 0.20)
        b = rng.uniform(0.50, 0.97)
        if a + b >= 0.99 * bound:
            b = 0.99 * bound - a
        x = [float(np.mean(y)), *rng.normal(0.0, 0.05, p), max(var * (1.0 - a - b), 1e-3 * var),
             a, b]
        starts.append(x)
    return np.array(base), starts


def fit_garch11(returns, p: int = 0, config: GarchConfig | None = None) -> GarchFit:
    """Gaussian quasi-maximum-likelihood AR(p)-GARCH(1,1).

    The optimizer works on returns divided by their sample standard
    deviation; estimates, standard errors and the log-likelihood are mapped
    back to the original scale.

    Parameters
    ----------
    returns : array_like
        One-dimensional return series.
    p : int
        AR order of the mean equation (0 gives a constant mean).
    config : GarchConfig, optional

    Raises
    ------
    EstimationError
        If no starting point reaches the gradient tolerance.
    """
    config = config or GarchConfig()
    r = np.asarray(returns, dtype=float)
    if r.ndim != 1:
        raise ValueError("returns must be one-dimensional")
    if len(r) < config.min_obs:
        raise ValueError(f"{len(r)} observations, need at least {config.min_obs}")
    if not np.all(np.isfinite(r)):
        raise ValueError("returns contain non-finite values")
    scale = float(np.std(r))
    if not scale > 0:
        raise ValueError("returns have zero variance")
    y = r / scale
    n_eff = len(y) - p
    k = p + 4
    bound = config.bound

    def total_nll(x):
        return float(np.sum(garch_nll_terms(GarchParams.from_vector(x, p), y)))

    def mean_nll(x):
        return total_nll(x) / n_eff

    transform = optim.Transform(k).positive(p + 1).bounded_sum((p + 2, p + 3), bound)
    init, starts = _starting_points(y, p, bound, config.restarts, config.seed)
    res = optim.minimize(mean_nll, init, transform, gtol=config.gtol, maxiter=config.maxiter,
                         starts=starts)
    if not res.converged:
        raise EstimationError(
            f"GARCH(1,1) did not converge from {config.restarts + 1} starts "
            f"(best NLL {res.objective_value * n_eff:.6g}, gradient norm {res.gradient_norm:.3g}, "
            f"{res.message})",
            res,
        )
    x = res.point
    notes = []
    if x[p + 2] + x[p + 3] > bound - 1e-3:
        notes.append(f"alpha + beta = {x[p + 2] + x[p + 3]:.6g} is at the stationarity bound {bound}")

    to_original = np.ones(k)
    to_original[0] = scale
    to_original[1:p + 1] = 1.0
    to_original[p + 1] = scale ** 2
    inference = None
    try:
        if config.robust_se:
            terms = lambda v: garch_nll_terms(GarchParams.from_vector(v, p), y)  # noqa: E731
            inf_s = optim.sandwich_standard_errors(terms, x)
        else:
            inf_s = optim.standard_errors(total_nll, x)
        D = np.diag(to_original)
        cov = D @ inf_s.covariance @ D
        se = inf_s.standard_errors * to_original
        inference = InferenceResult(se, (x * to_original) / se, cov)
    except (optim.SingularInformationError, optim.NumericalError) as exc:
        notes.append(f"standard errors unavailable: {exc}")

    params = GarchParams.from_vector(x * to_original, p)
    eps, sig2 = garch_filter(params, r)
    loglik = -float(np.sum(0.5 * (_LOG2PI + np.log(sig2) + eps ** 2 / sig2)))
    return GarchFit(params, sig2, eps, eps / np.sqrt(sig2), loglik, inference,
                    replace(res, point=params.as_vector(), objective_value=-loglik),
                    tuple(notes))
