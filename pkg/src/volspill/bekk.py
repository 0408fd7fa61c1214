r"""Full BEKK-GARCH(1,1) quasi-maximum likelihood and spillover direction tests.

Convention used throughout::

    H_t = C C' + A' e_{t-1} e_{t-1}' A + B' H_{t-1} B

so ``a[j, i]`` (row ``j``, column ``i``) carries the effect of market ``j``'s
shock on market ``i``'s variance, and likewise for ``b``. Writing the model as
``A e e' A'`` instead transposes every coefficient table.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numba
import numpy as np

from . import optim
from .garch import EstimationError
from .optim import InferenceResult, OptimResult
from .panel import ReturnPanel

__all__ = [
    "BekkParams",
    "BekkFit",
    "BekkConfig",
    "DirectionVerdict",
    "bekk_filter",
    "bekk_nll",
    "simulate_bekk",
    "fit_bekk",
    "classify_direction",
    "direction_from_tstats",
    "intercept_for_covariance",
]

_LOG2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class BekkParams:
    c: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        for name in ("c", "a", "b"):
            m = np.array(getattr(self, name), dtype=float, ndmin=2)
            m.setflags(write=False)
            object.__setattr__(self, name, m)
        n = self.c.shape[0]
        if any(m.shape != (n, n) for m in (self.c, self.a, self.b)):
            raise ValueError("c, a and b must all be N x N")
        if np.any(np.triu(self.c, 1) != 0):
            raise ValueError("c must be lower triangular")

    @property
    def n_series(self) -> int:
        return self.c.shape[0]

    def intercept(self) -> np.ndarray:
        return self.c @ self.c.T

    def persistence(self) -> float:
        """Spectral radius of ``A (x) A + B (x) B``."""
        M = np.kron(self.a, self.a) + np.kron(self.b, self.b)
        return float(np.max(np.abs(np.linalg.eigvals(M))))

    def normalized(self) -> "BekkParams":
        """Representative with ``diag(c) > 0``, ``a[0,0] >= 0``, ``b[0,0] >= 0``."""
        c = self.c * np.where(np.diag(self.c) < 0, -1.0, 1.0)[None, :]
        a = -self.a if self.a[0, 0] < 0 else self.a
        b = -self.b if self.b[0, 0] < 0 else self.b
        return BekkParams(c, a, b)

    def to_vector(self, diagonal: bool = False, targeting: bool = False) -> np.ndarray:
        n = self.n_series
        parts = [] if targeting else [self.c[np.tril_indices(n)]]
        if diagonal:
            parts += [np.diag(self.a), np.diag(self.b)]
        else:
            parts += [self.a.ravel(), self.b.ravel()]
        return np.concatenate(parts)

    @classmethod
    def from_vector(cls, x, n: int, diagonal: bool = False,
                    c: np.ndarray | None = None) -> "BekkParams":
        x = np.asarray(x, dtype=float)
        k = 0
        if c is None:
            c = np.zeros((n, n))
            m = n * (n + 1) // 2
            c[np.tril_indices(n)] = x[:m]
            k = m
        if diagonal:
            a, b = np.diag(x[k:k + n]), np.diag(x[k + n:k + 2 * n])
        else:
            a = x[k:k + n * n].reshape(n, n)
            b = x[k + n * n:k + 2 * n * n].reshape(n, n)
        return cls(c, a, b)


def parameter_labels(n: int, diagonal: bool = False, targeting: bool = False) -> list[str]:
    """1-based labels ``C(i,j)``, ``A(i,j)``, ``B(i,j)`` in vector order."""
    labels = [] if targeting else [f"C({i + 1},{j + 1})" for i, j in zip(*np.tril_indices(n))]
    for m in ("A", "B"):
        if diagonal:
            labels += [f"{m}({i + 1},{i + 1})" for i in range(n)]
        else:
            labels += [f"{m}({i + 1},{j + 1})" for i in range(n) for j in range(n)]
    return labels


@numba.njit(cache=True, inline="always")
def _step(CC, A, B, e, Hp, G, Hn):
    """One recursion step into ``Hn``: CC + A'ee'A + B'HpB (``G`` is scratch)."""
    n = e.shape[0]
    for k in range(n):
        for j in range(n):
            s = 0.0
            for m in range(n):
                s += Hp[k, m] * B[m, j]
            G[k, j] = s
    for i in range(n):
        ui = 0.0
        for k in range(n):
            ui += A[k, i] * e[k]
        for j in range(i + 1):
            uj = 0.0
            for k in range(n):
                uj += A[k, j] * e[k]
            s = 0.0
            for k in range(n):
                s += B[k, i] * G[k, j]
            v = CC[i, j] + ui * uj + s
            Hn[i, j] = v
            Hn[j, i] = v


@numba.njit(cache=True)
def _recursion(CC, A, B, eps, H0):
    T, n = eps.shape
    H = np.empty((T, n, n))
    H[0] = H0
    G = np.empty((n, n))
    for t in range(1, T):
        _step(CC, A, B, eps[t - 1], H[t - 1], G, H[t])
    return H


@numba.njit(cache=True)
def _nll_terms(CC, A, B, eps, H0):
    T, n = eps.shape
    out = np.empty(T)
    H = H0.copy()
    Hn = np.empty((n, n))
    G = np.empty((n, n))
    L = np.zeros((n, n))
    y = np.empty(n)
    for t in range(T):
        if t > 0:
            _step(CC, A, B, eps[t - 1], H, G, Hn)
            H, Hn = Hn, H
        # Cholesky; failure -> infinite contribution
        logdet = 0.0
        for i in range(n):
            for j in range(i + 1):
                s = H[i, j]
                for k in range(j):
                    s -= L[i, k] * L[j, k]
                if i == j:
                    if not (s > 0.0 and s < np.inf):
                        out[:] = np.inf
                        return out
                    L[i, i] = math.sqrt(s)
                    logdet += 2.0 * math.log(L[i, i])
                else:
                    L[i, j] = s / L[j, j]
        quad = 0.0
        for i in range(n):
            s = eps[t, i]
            for k in range(i):
                s -= L[i, k] * y[k]
            y[i] = s / L[i, i]
            quad += y[i] * y[i]
        out[t] = 0.5 * (n * _LOG2PI + logdet + quad)
    return out


@numba.njit(cache=True)
def _nll_grad(CC, A, B, eps, H0):
    """Total NLL and its gradient with respect to ``CC'``, ``A`` and ``B``.

    Reverse-mode pass over the recursion: the adjoint of ``H_t`` collects the
    direct term ``(H^-1 - H^-1 e e' H^-1) / 2`` plus ``B adj(H_{t+1}) B'``.
    """
    T, n = eps.shape
    H = np.empty((T, n, n))
    Hi = np.empty((T, n, n))
    W = np.empty((T, n))
    G = np.empty((n, n))
    L = np.zeros((n, n))
    Li = np.zeros((n, n))
    total = 0.0
    H[0] = H0
    for t in range(T):
        if t > 0:
            _step(CC, A, B, eps[t - 1], H[t - 1], G, H[t])
        logdet = 0.0
        for i in range(n):
            for j in range(i + 1):
                s = H[t, i, j]
                for k in range(j):
                    s -= L[i, k] * L[j, k]
                if i == j:
                    if not (s > 0.0 and s < np.inf):
                        return np.inf, CC * 0.0, A * 0.0, B * 0.0
                    L[i, i] = math.sqrt(s)
                    logdet += 2.0 * math.log(L[i, i])
                else:
                    L[i, j] = s / L[j, j]
        # L^-1 by forward substitution, then H^-1 = L^-T L^-1
        for j in range(n):
            for i in range(n):
                if i < j:
                    Li[i, j] = 0.0
                    continue
                s = 1.0 if i == j else 0.0
                for k in range(j, i):
                    s -= L[i, k] * Li[k, j]
                Li[i, j] = s / L[i, i]
        for i in range(n):
            for j in range(i + 1):
                s = 0.0
                for k in range(i, n):
                    s += Li[k, i] * Li[k, j]
                Hi[t, i, j] = s
                Hi[t, j, i] = s
        quad = 0.0
        for i in range(n):
            s = 0.0
            for k in range(n):
                s += Hi[t, i, k] * eps[t, k]
            W[t, i] = s
            quad += s * eps[t, i]
        total += 0.5 * (n * _LOG2PI + logdet + quad)

    gCC = np.zeros((n, n))
    gA = np.zeros((n, n))
    gB = np.zeros((n, n))
    R = np.zeros((n, n))
    Rn = np.empty((n, n))
    u = np.empty(n)
    y = np.empty(n)
    for t in range(T - 1, 0, -1):
        # adj(H_t) = direct + B R B'
        for k in range(n):
            for j in range(n):
                s = 0.0
                for m in range(n):
                    s += R[k, m] * B[j, m]
                G[k, j] = s
        for i in range(n):
            for j in range(n):
                s = 0.0
                for k in range(n):
                    s += B[i, k] * G[k, j]
                Rn[i, j] = s + 0.5 * (Hi[t, i, j] - W[t, i] * W[t, j])
        for i in range(n):
            for j in range(n):
                gCC[i, j] += Rn[i, j]
        # A: 2 x (A' x)' adj ; B: 2 H_{t-1} B adj
        for i in range(n):
            s = 0.0
            for k in range(n):
                s += A[k, i] * eps[t - 1, k]
            u[i] = s
        for j in range(n):
            s = 0.0
            for k in range(n):
                s += u[k] * Rn[k, j]
            y[j] = s
        for i in range(n):
            for j in range(n):
                gA[i, j] += 2.0 * eps[t - 1, i] * y[j]
        for i in range(n):
            for j in range(n):
                s = 0.0
                for m in range(n):
                    s += B[i, m] * Rn[m, j]
                G[i, j] = s
        for i in range(n):
            for j in range(n):
                s = 0.0
                for m in range(n):
                    s += H[t - 1, i, m] * G[m, j]
                gB[i, j] += 2.0 * s
        R, Rn = Rn, R
    return total, gCC, gA, gB


def _initial_covariance(resid: np.ndarray) -> np.ndarray:
    return np.atleast_2d(np.cov(resid, rowvar=False, bias=True))


def bekk_filter(params: BekkParams, residuals, initial_covariance=None) -> np.ndarray:
    """Conditional covariance path ``(T, N, N)``; ``H_1`` is the sample covariance."""
    eps = np.ascontiguousarray(np.asarray(residuals, dtype=float).reshape(len(residuals), -1))
    if eps.shape[1] != params.n_series:
        raise ValueError("residual columns do not match parameter dimension")
    H0 = _initial_covariance(eps) if initial_covariance is None else \
        np.asarray(initial_covariance, dtype=float)
    return _recursion(params.intercept(), np.ascontiguousarray(params.a),
                      np.ascontiguousarray(params.b), eps, np.ascontiguousarray(H0))


def bekk_nll_terms(params: BekkParams, residuals, initial_covariance=None) -> np.ndarray:
    eps = np.ascontiguousarray(np.asarray(residuals, dtype=float).reshape(len(residuals), -1))
    H0 = _initial_covariance(eps) if initial_covariance is None else \
        np.asarray(initial_covariance, dtype=float)
    return _nll_terms(params.intercept(), np.ascontiguousarray(params.a),
                      np.ascontiguousarray(params.b), eps, np.ascontiguousarray(H0))


def bekk_nll(params: BekkParams, residuals, initial_covariance=None) -> float:
    """Gaussian ``0.5 * sum(N ln 2pi + ln|H_t| + e_t' H_t^{-1} e_t)``."""
    return float(np.sum(bekk_nll_terms(params, residuals, initial_covariance)))


def intercept_for_covariance(a, b, covariance) -> np.ndarray:
    """``C`` (lower Cholesky) giving unconditional covariance ``covariance``.

    Solves ``vec(S) = vec(CC') + (A' (x) A') vec(S) + (B' (x) B') vec(S)``
    for ``CC'`` and factors it.
    """
    a, b, S = (np.asarray(m, dtype=float) for m in (a, b, covariance))
    CC = S - a.T @ S @ a - b.T @ S @ b
    return np.linalg.cholesky(0.5 * (CC + CC.T))


def simulate_bekk(params: BekkParams, n_obs: int, rng=None, burn: int = 500, mean=None,
                  return_covariance: bool = False):
    """Simulate Gaussian BEKK(1,1) returns.

    ``H`` starts at the unconditional covariance when the recursion is
    covariance-stationary, else at ``CC'``.
    """
    rng = np.random.default_rng(rng)
    n = params.n_series
    total = n_obs + burn
    CC = params.intercept()
    M = np.kron(params.a.T, params.a.T) + np.kron(params.b.T, params.b.T)
    if params.persistence() < 1:
        H = np.linalg.solve(np.eye(n * n) - M, CC.ravel()).reshape(n, n)
        H = 0.5 * (H + H.T)
    else:
        H = CC.copy()
    e = rng.standard_normal((total, n))
    eps = np.empty((total, n))
    Hs = np.empty((total, n, n))
    for t in range(total):
        if t > 0:
            u = params.a.T @ eps[t - 1]
            H = CC + np.outer(u, u) + params.b.T @ H @ params.b
        Hs[t] = H
        eps[t] = np.linalg.cholesky(H) @ e[t]
    mean = np.zeros(n) if mean is None else np.asarray(mean, dtype=float)
    out = mean + eps[burn:]
    if return_covariance:
        return out, Hs[burn:]
    return out


@dataclass(frozen=True)
class BekkConfig:
    diagonal: bool = False
    variance_targeting: bool = False
    restarts: int = 5
    seed: int = 0
    gtol: float = 1e-5
    maxiter: int = 2000
    force: bool = False
    robust_se: bool = False


@dataclass(frozen=True)
class BekkFit:
    names: tuple[str, ...]
    params: BekkParams
    mean: np.ndarray
    residuals: np.ndarray
    cov_path: np.ndarray
    loglik: float
    inference: InferenceResult | None
    labels: tuple[str, ...]
    diagonal: bool = False
    variance_targeting: bool = False
    optim: OptimResult | None = None
    warnings: tuple[str, ...] = field(default_factory=tuple)

    def estimates(self) -> np.ndarray:
        return self.params.to_vector(self.diagonal, self.variance_targeting)

    def coefficient_table(self) -> list[tuple[str, float, float, float, float]]:
        """Rows ``(label, estimate, se, t, p)``; NaN where inference is missing."""
        est = self.estimates()
        if self.inference is None:
            nan = np.full_like(est, np.nan)
            se, t, p = nan, nan, nan
        else:
            se = self.inference.standard_errors
            t = self.inference.t_statistics
            p = self.inference.p_values
        return list(zip(self.labels, est, se, t, p))

    def t_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """t-statistics laid out as ``(N, N)`` matrices for ``a`` and ``b``."""
        n = self.params.n_series
        ta = np.full((n, n), np.nan)
        tb = np.full((n, n), np.nan)
        if self.inference is None:
            return ta, tb
        lookup = dict(zip(self.labels, self.inference.t_statistics))
        for i in range(n):
            for j in range(n):
                ta[i, j] = lookup.get(f"A({i + 1},{j + 1})", np.nan)
                tb[i, j] = lookup.get(f"B({i + 1},{j + 1})", np.nan)
        return ta, tb


def _scale_maps(d: np.ndarray, diagonal: bool, targeting: bool) -> np.ndarray:
    """Per-entry multipliers taking scaled-data parameters to original units."""
    n = len(d)
    parts = [] if targeting else [d[np.tril_indices(n)[0]]]
    ratio = d[None, :] / d[:, None]
    for _ in range(2):
        parts.append(np.ones(n) if diagonal else ratio.ravel())
    return np.concatenate(parts)


def _starts(S: np.ndarray, config: BekkConfig):
    n = S.shape[0]
    rng = np.random.default_rng(config.seed)
    out = []
    for r in range(config.restarts):
        if r == 0:
            a_d = np.full(n, math.sqrt(0.05))
            b_d = np.full(n, math.sqrt(0.90))
            off = 0.0
        else:
            a_d = rng.uniform(0.15, 0.40, n)
            b_d = np.sqrt(np.clip(rng.uniform(0.80, 0.95, n) - a_d ** 2, 0.3, None))
            off = 0.02
        A = np.diag(a_d) + (0 if config.diagonal else off * rng.standard_normal((n, n)) *
                            (1 - np.eye(n)))
        B = np.diag(b_d) + (0 if config.diagonal else off * rng.standard_normal((n, n)) *
                            (1 - np.eye(n)))
        scale = max(1.0 - np.max(a_d ** 2 + b_d ** 2), 0.02)
        C = np.linalg.cholesky(scale * S)
        out.append(BekkParams(C, A, B).to_vector(config.diagonal, config.variance_targeting))
    return out


def fit_bekk(returns, config: BekkConfig | None = None) -> BekkFit:
    """Gaussian QML for BEKK-GARCH(1,1).

    Each series is demeaned by its sample mean and the optimizer works on
    residuals divided by their standard deviations; estimates and standard
    errors are reported in original units. The returned representative has
    ``diag(c) > 0`` and non-negative ``a[0,0]`` and ``b[0,0]``.

    Raises
    ------
    ValueError
        For ``N > 6`` without ``config.force``. ``N = 1`` is accepted and
        reduces to a constant-mean GARCH(1,1).
    EstimationError
        If no restart converges.
    """
    config = config or BekkConfig()
    panel = returns if isinstance(returns, ReturnPanel) else ReturnPanel.from_array(returns)
    x = panel.returns
    T, n = x.shape
    if n > 6 and not config.force:
        raise ValueError(f"BEKK with N={n} has {n * (n + 1) // 2 + 2 * n * n} parameters; "
                         "set force=True to proceed")
    notes = []
    labels = parameter_labels(n, config.diagonal, config.variance_targeting)
    k = len(labels)
    if T < 50 * k / n:
        notes.append(f"T={T} is below the recommended {50 * k / n:.0f} observations")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)

    mean = x.mean(axis=0)
    resid = x - mean
    d = resid.std(axis=0)
    if np.any(d <= 0):
        raise ValueError("a series has zero variance")
    eps = np.ascontiguousarray(resid / d)
    S = _initial_covariance(eps)

    def unpack(v):
        if config.variance_targeting:
            p = BekkParams.from_vector(v, n, config.diagonal, c=np.zeros((n, n)))
            CC = S - p.a.T @ S @ p.a - p.b.T @ S @ p.b
            try:
                C = np.linalg.cholesky(0.5 * (CC + CC.T))
            except np.linalg.LinAlgError:
                return None
            return BekkParams(C, p.a, p.b)
        return BekkParams.from_vector(v, n, config.diagonal)

    def terms(v):
        p = unpack(v)
        if p is None:
            return np.full(T, np.inf)
        return _nll_terms(p.intercept(), np.ascontiguousarray(p.a),
                          np.ascontiguousarray(p.b), eps, S)

    def total(v):
        return float(np.sum(terms(v)))

    def grad(v):
        p = unpack(v)
        if p is None:
            return np.full(len(v), np.nan)
        a, b = np.ascontiguousarray(p.a), np.ascontiguousarray(p.b)
        _, gCC, gA, gB = _nll_grad(p.intercept(), a, b, eps, S)
        if config.variance_targeting:
            gA = gA - 2.0 * S @ a @ gCC
            gB = gB - 2.0 * S @ b @ gCC
            parts = []
        else:
            parts = [(2.0 * gCC @ p.c)[np.tril_indices(n)]]
        if config.diagonal:
            parts += [np.diag(gA), np.diag(gB)]
        else:
            parts += [gA.ravel(), gB.ravel()]
        return np.concatenate(parts)

    starts = _starts(S, config)
    res = optim.minimize(lambda v: total(v) / T, starts[0], gtol=config.gtol,
                         maxiter=config.maxiter, starts=starts[1:],
                         gradient=lambda v: grad(v) / T)
    if not res.converged:
        raise EstimationError(
            f"BEKK did not converge from {config.restarts} starts (best mean NLL "
            f"{res.objective_value:.6g}, gradient norm {res.gradient_norm:.3g}, {res.message})",
            res)
    scaled = unpack(res.point).normalized()
    v = scaled.to_vector(config.diagonal, config.variance_targeting)

    mult = _scale_maps(d, config.diagonal, config.variance_targeting)
    inference = None
    try:
        if config.robust_se:
            inf_s = optim.sandwich_standard_errors(terms, v)
        else:
            inf_s = optim.standard_errors(total, v, gradient=grad)
        se = inf_s.standard_errors * mult
        inference = InferenceResult(se, (v * mult) / se,
                                    inf_s.covariance * np.outer(mult, mult))
    except (optim.SingularInformationError, optim.NumericalError) as exc:
        notes.append(f"standard errors unavailable: {exc}")

    D = np.diag(d)
    Dinv = np.diag(1.0 / d)
    params = BekkParams(D @ scaled.c, Dinv @ scaled.a @ D, Dinv @ scaled.b @ D)
    rho = params.persistence()
    if rho >= 1:
        notes.append(f"implied persistence {rho:.6g} >= 1 (explosive recursion)")
    H = bekk_filter(params, resid)
    loglik = -bekk_nll(params, resid)
    return BekkFit(panel.names, params, mean, resid, H, loglik, inference, tuple(labels),
                   config.diagonal, config.variance_targeting, res, tuple(notes))


Classification = Literal["none", "i_to_j", "j_to_i", "bidirectional"]


@dataclass(frozen=True)
class DirectionVerdict:
    pair: tuple[int, int]
    classification: Classification
    significant: dict[str, bool]
    channels: dict[str, str | None]


def _channel(arch: bool, garch: bool) -> str | None:
    if arch and garch:
        return "both"
    if arch:
        return "arch"
    if garch:
        return "garch"
    return None


def direction_from_tstats(t_a, t_b, i: int, j: int, level: float = 0.05) -> DirectionVerdict:
    """Classify volatility transmission between markets ``i`` and ``j``.

    ``j -> i`` is present when ``a[j, i]`` or ``b[j, i]`` is significant at
    ``level`` (two-sided normal test); ``i -> j`` uses ``a[i, j]``, ``b[i, j]``.
    """
    from scipy.stats import norm

    if i == j:
        raise ValueError("i and j must differ")
    crit = norm.isf(level / 2.0)
    t_a = np.asarray(t_a, dtype=float)
    t_b = np.asarray(t_b, dtype=float)

    def sig(t):
        return bool(np.isfinite(t) and abs(t) > crit)

    flags = {
        f"a[{j},{i}]": sig(t_a[j, i]),
        f"b[{j},{i}]": sig(t_b[j, i]),
        f"a[{i},{j}]": sig(t_a[i, j]),
        f"b[{i},{j}]": sig(t_b[i, j]),
    }
    j_to_i = _channel(flags[f"a[{j},{i}]"], flags[f"b[{j},{i}]"])
    i_to_j = _channel(flags[f"a[{i},{j}]"], flags[f"b[{i},{j}]"])
    if i_to_j and j_to_i:
        cls = "bidirectional"
    elif i_to_j:
        cls = "i_to_j"
    elif j_to_i:
        cls = "j_to_i"
    else:
        cls = "none"
    return DirectionVerdict((i, j), cls, flags, {"i_to_j": i_to_j, "j_to_i": j_to_i})


def classify_direction(fit: BekkFit, i: int, j: int, level: float = 0.05) -> DirectionVerdict:
    """Spillover direction between series ``i`` and ``j`` of a fitted BEKK."""
    t_a, t_b = fit.t_matrices()
    return direction_from_tstats(t_a, t_b, i, j, level)
