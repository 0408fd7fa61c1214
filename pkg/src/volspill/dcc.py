"""Two-step DCC-GARCH(1,1): univariate fits, then correlation-targeted DCC."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from . import optim
from .garch import EstimationError, GarchConfig, GarchFit, GarchParams, fit_garch11
from .optim import InferenceResult, OptimResult
from .panel import ReturnPanel

__all__ = [
    "DccParams",
    "DccFit",
    "DccConfig",
    "dcc_filter",
    "dcc_correlation_nll_terms",
    "simulate_dcc",
    "fit_dcc",
    "fit_dcc_pairwise",
    "mean_dynamic_correlation",
]


@dataclass(frozen=True)
class DccParams:
    theta: float
    eta: float
    q_bar: np.ndarray

    def __post_init__(self):
        q = np.array(self.q_bar, dtype=float)
        q.setflags(write=False)
        object.__setattr__(self, "q_bar", q)

    def validate(self) -> "DccParams":
        if self.theta < 0 or self.eta < 0 or self.theta + self.eta >= 1:
            raise ValueError(f"need theta, eta >= 0 and theta + eta < 1, "
                             f"got {self.theta}, {self.eta}")
        q = self.q_bar
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("q_bar must be square")
        if not np.allclose(q, q.T, atol=1e-12) or not np.allclose(np.diag(q), 1.0, atol=1e-12):
            raise ValueError("q_bar must be symmetric with unit diagonal")
        if np.linalg.eigvalsh(q).min() < -1e-10:
            raise ValueError("q_bar must be positive semidefinite")
        return self


@dataclass(frozen=True)
class DccConfig:
    garch: GarchConfig = field(default_factory=GarchConfig)
    mean_lag: int = 0
    workers: int = 1
    gtol: float = 1e-6
    maxiter: int = 2000
    persistence_bound: float = 0.9999


@dataclass(frozen=True)
class DccFit:
    names: tuple[str, ...]
    garch_fits: tuple[GarchFit, ...]
    params: DccParams
    corr_path: np.ndarray
    cov_path: np.ndarray
    loglik: float
    correlation_loglik: float
    inference: InferenceResult | None
    optim: OptimResult | None = None
    warnings: tuple[str, ...] = ()

    @property
    def std_residuals(self) -> np.ndarray:
        return np.column_stack([g.std_residuals for g in self.garch_fits])


def dcc_filter(params: DccParams, std_residuals) -> np.ndarray:
    r"""Dynamic correlation path ``R_t`` from standardized residuals.

    .. math::
        Q_t = (1-\theta-\eta)\bar Q + \theta z_{t-1} z_{t-1}' + \eta Q_{t-1},
        \qquad R_t = Q_t^{*-1} Q_t Q_t^{*-1}

    with ``Q_1 = q_bar``. Returns an array of shape ``(T, N, N)``.
    """
    z = np.asarray(std_residuals, dtype=float)
    if z.ndim != 2:
        raise ValueError("std_residuals must be (T, N)")
    if not np.all(np.isfinite(z)):
        raise ValueError("std_residuals contain non-finite values")
    T, N = z.shape
    qbar = params.q_bar
    if qbar.shape != (N, N):
        raise ValueError(f"q_bar shape {qbar.shape} does not match {N} series")
    th, et = params.theta, params.eta
    Q = np.empty((T, N, N))
    Q[0] = qbar
    if T > 1:
        outer = z[:-1, :, None] * z[:-1, None, :]
        drive = (1.0 - th - et) * qbar + th * outer
        Q[1:] = lfilter([1.0], [1.0, -et], drive, axis=0, zi=(et * qbar)[None])[0]
    d = np.sqrt(np.einsum("tii->ti", Q))
    if not np.all(d > 0):
        raise ArithmeticError("non-positive diagonal in Q_t")
    R = Q / (d[:, :, None] * d[:, None, :])
    idx = np.arange(N)
    R[:, idx, idx] = 1.0
    return R


def dcc_correlation_nll_terms(params: DccParams, std_residuals) -> np.ndarray:
    """Per-period ``0.5 * (ln|R_t| + z'R_t^{-1}z - z'z)``."""
    z = np.asarray(std_residuals, dtype=float)
    R = dcc_filter(params, z)
    sign, logdet = np.linalg.slogdet(R)
    if np.any(sign <= 0):
        return np.full(len(z), np.inf)
    quad = np.einsum("ti,ti->t", z, np.linalg.solve(R, z[:, :, None])[:, :, 0])
    return 0.5 * (logdet + quad - np.einsum("ti,ti->t", z, z))


def simulate_dcc(garch_params: Sequence[GarchParams], theta: float, eta: float, q_bar,
                 n_obs: int, rng=None, burn: int = 500, return_paths: bool = False):
    """Simulate a DCC-GARCH(1,1) system with Gaussian innovations.

    ``Q`` starts at ``q_bar`` and each variance at its unconditional level.
    With ``return_paths`` the standardized residuals, correlation path and
    variance path (all post burn-in) are returned alongside the returns.
    """
    rng = np.random.default_rng(rng)
    q_bar = np.asarray(q_bar, dtype=float)
    N = len(garch_params)
    DccParams(theta, eta, q_bar).validate()
    if any(g.p for g in garch_params):
        raise ValueError("simulate_dcc supports constant-mean GARCH only")
    total = n_obs + burn
    e = rng.standard_normal((total, N))
    om = np.array([g.omega for g in garch_params])
    al = np.array([g.alpha for g in garch_params])
    be = np.array([g.beta for g in garch_params])
    mu = np.array([g.phi0 for g in garch_params])
    s2 = np.where(al + be < 1, om / np.maximum(1 - al - be, 1e-12), om)
    Q = q_bar.copy()
    z = np.empty((total, N))
    R = np.empty((total, N, N))
    sig2 = np.empty((total, N))
    eps = np.empty((total, N))
    for t in range(total):
        if t > 0:
            Q = (1 - theta - eta) * q_bar + theta * np.outer(z[t - 1], z[t - 1]) + eta * Q
            s2 = om + al * eps[t - 1] ** 2 + be * s2
        d = np.sqrt(np.diag(Q))
        R[t] = Q / np.outer(d, d)
        np.fill_diagonal(R[t], 1.0)
        z[t] = np.linalg.cholesky(R[t]) @ e[t]
        sig2[t] = s2
        eps[t] = np.sqrt(s2) * z[t]
    returns = mu + eps[burn:]
    if return_paths:
        return returns, z[burn:], R[burn:], sig2[burn:]
    return returns


def _as_panel(returns) -> ReturnPanel:
    return returns if isinstance(returns, ReturnPanel) else ReturnPanel.from_array(returns)


def _univariate(panel: ReturnPanel, config: DccConfig) -> list[GarchFit]:
    def one(k):
        try:
            return fit_garch11(panel.returns[:, k], config.mean_lag, config.garch)
        except (EstimationError, ValueError) as exc:
            raise EstimationError(f"series {panel.names[k]!r}: {exc}") from exc

    cols = range(panel.n_series)
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            return list(pool.map(one, cols))
    return [one(k) for k in cols]


def _correlation_step(z: np.ndarray, config: DccConfig):
    T = len(z)
    q_bar = np.corrcoef(z, rowvar=False)

    def total(x):
        return float(np.sum(dcc_correlation_nll_terms(DccParams(x[0], x[1], q_bar), z)))

    transform = optim.Transform(2).bounded_sum((0, 1), config.persistence_bound)
    res = optim.minimize(lambda x: total(x) / T, [0.02, 0.95], transform, gtol=config.gtol,
                         maxiter=config.maxiter, starts=[[0.05, 0.90], [0.01, 0.98]])
    if not res.converged:
        raise EstimationError(
            f"DCC correlation step did not converge (gradient norm {res.gradient_norm:.3g}, "
            f"{res.message})", res)
    notes = []
    if res.point.sum() > config.persistence_bound - 1e-3:
        notes.append(f"theta + eta = {res.point.sum():.6g} is at the bound")
    inference = None
    try:
        inference = optim.standard_errors(total, res.point)
    except (optim.SingularInformationError, optim.NumericalError) as exc:
        notes.append(f"standard errors unavailable: {exc}")
    return DccParams(res.point[0], res.point[1], q_bar), res, inference, notes


def _assemble(names, fits, params, res, inference, notes) -> DccFit:
    z = np.column_stack([g.std_residuals for g in fits])
    R = dcc_filter(params, z)
    sd = np.sqrt(np.column_stack([g.cond_variance for g in fits]))
    H = R * sd[:, :, None] * sd[:, None, :]
    corr_ll = -float(np.sum(dcc_correlation_nll_terms(params, z)))
    loglik = sum(g.loglik for g in fits) + corr_ll
    return DccFit(tuple(names), tuple(fits), params, R, H, loglik, corr_ll, inference, res,
                  tuple(notes))


def fit_dcc(returns, config: DccConfig | None = None,
            garch_fits: Sequence[GarchFit] | None = None) -> DccFit:
    """Two-step DCC-GARCH(1,1) on an ``N >= 2`` return panel.

    Step one fits GARCH(1,1) to every series; step two maximizes the
    correlation log-likelihood over ``(theta, eta)`` with ``q_bar`` fixed at
    the sample correlation of the standardized residuals. ``loglik`` is the
    joint Gaussian log-likelihood (sum of the univariate parts plus the
    correlation part). Step-two standard errors ignore step-one estimation
    error.
    """
    config = config or DccConfig()
    panel = _as_panel(returns)
    if panel.n_series < 2:
        raise ValueError("DCC needs at least two series")
    fits = list(garch_fits) if garch_fits is not None else _univariate(panel, config)
    z = np.column_stack([g.std_residuals for g in fits])
    params, res, inference, notes = _correlation_step(z, config)
    notes = [f"{n}: {w}" for n, g in zip(panel.names, fits) for w in g.warnings] + notes
    return _assemble(panel.names, fits, params, res, inference, notes)


def fit_dcc_pairwise(returns, config: DccConfig | None = None,
                     pairs: Sequence[tuple[int, int]] | None = None) -> dict[tuple[int, int],
                                                                             DccFit]:
    """Separate bivariate DCC fits for each pair, sharing the univariate step."""
    config = config or DccConfig()
    panel = _as_panel(returns)
    fits = _univariate(panel, config)
    out = {}
    for i, j in pairs or combinations(range(panel.n_series), 2):
        sub = [fits[i], fits[j]]
        out[(i, j)] = fit_dcc(panel.select([i, j]), config, garch_fits=sub)
    return out


def mean_dynamic_correlation(fit: DccFit, i: int, j: int) -> tuple[float, float]:
    """Time-average of ``rho_ij,t`` and its z-statistic ``mean / (sd / sqrt(T))``."""
    N = fit.corr_path.shape[1]
    if i == j or not (0 <= i < N and 0 <= j < N):
        raise IndexError(f"invalid pair ({i}, {j}) for {N} series")
    rho = fit.corr_path[:, i, j]
    mean = float(rho.mean())
    sd = float(rho.std(ddof=1)) if len(rho) > 1 else 0.0
    z = mean / (sd / math.sqrt(len(rho))) if sd > 0 else math.copysign(math.inf, mean) \
        if mean != 0 else 0.0
    return mean, z
