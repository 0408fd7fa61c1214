"""VAR estimation and the generalized-FEVD spillover tables built on it.

Spillover tables are indexed ``[receiver, source]``: entry ``(i, j)`` is the
share of market ``i``'s forecast-error variance due to shocks in market ``j``.
"""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .panel import VolatilityPanel

__all__ = [
    "VarFit",
    "FevdMatrix",
    "SpilloverTable",
    "fit_var",
    "select_lag",
    "ma_coefficients",
    "gfevd",
    "build_spillover_table",
    "spillover_table_from_percent",
    "spillover_pipeline",
    "DEFAULT_LAG",
    "DEFAULT_HORIZON",
]

DEFAULT_LAG = 4
DEFAULT_HORIZON = 10


class CollinearityError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class VarFit:
    lag_order: int
    intercept: np.ndarray
    coefs: np.ndarray  # (p, N, N); coefs[k-1] multiplies y_{t-k}
    sigma: np.ndarray
    residuals: np.ndarray
    n_obs: int
    names: tuple[str, ...] = ()

    @property
    def n_series(self) -> int:
        return self.sigma.shape[0]


def _lagged_design(y: np.ndarray, p: int, start: int | None = None):
    """Regressor matrix ``[1, y_{t-1}, ..., y_{t-p}]`` and targets for t >= start."""
    T, n = y.shape
    start = p if start is None else start
    X = np.ones((T - start, 1 + n * p))
    for k in range(1, p + 1):
        X[:, 1 + (k - 1) * n:1 + k * n] = y[start - k:T - k]
    return X, y[start:]


def fit_var(panel, p: int = DEFAULT_LAG, *, dof_adjust: bool = False,
            _start: int | None = None) -> VarFit:
    """Equation-by-equation OLS VAR(p) with intercept.

    ``sigma`` divides residual cross-products by the number of usable
    observations ``T - p``; ``dof_adjust`` switches to ``T - p - N p - 1``.

    Raises
    ------
    ValueError
        If ``p < 1`` or there are not more observations than regressors.
    CollinearityError
        If the regressor matrix is rank deficient.
    """
    y = panel.vol if isinstance(panel, VolatilityPanel) else np.asarray(panel, dtype=float)
    names = panel.names if isinstance(panel, VolatilityPanel) else ()
    if y.ndim != 2:
        raise ValueError("VAR input must be (T, N)")
    if p < 1:
        raise ValueError("lag order must be at least 1")
    T, n = y.shape
    k = 1 + n * p
    if T - p <= k:
        raise ValueError(f"lag order {p} too large for {T} observations of {n} series")
    if T - p < 10 * n * p:
        warnings.warn(f"only {T - p} observations for a {n}-variable VAR({p})", RuntimeWarning,
                      stacklevel=2)
    X, Y = _lagged_design(y, p, _start)
    rank = np.linalg.matrix_rank(X)
    if rank < k:
        _, _, vt = np.linalg.svd(X, full_matrices=False)
        null = vt[-1]
        cols = ["const"] + [f"{names[j] if names else j}.L{lag}" for lag in range(1, p + 1)
                            for j in range(n)]
        involved = [cols[c] for c in np.flatnonzero(np.abs(null) > 1e-8)]
        raise CollinearityError(f"regressor matrix is rank deficient; collinear columns: "
                                f"{involved}")
    beta, *_ = np.linalg.lstsq(X, Y, rcond=None)
    resid = Y - X @ beta
    denom = len(Y) - k if dof_adjust else len(Y)
    sigma = resid.T @ resid / denom
    coefs = beta[1:].reshape(p, n, n).transpose(0, 2, 1)
    return VarFit(p, beta[0], coefs, 0.5 * (sigma + sigma.T), resid, len(Y), tuple(names))


def select_lag(panel, p_max: int) -> int:
    """AIC-minimizing lag in ``1..p_max`` on the common sample starting at ``p_max``."""
    if p_max < 1:
        raise ValueError("p_max must be at least 1")
    if p_max == 1:
        return 1
    y = panel.vol if isinstance(panel, VolatilityPanel) else np.asarray(panel, dtype=float)
    n = y.shape[1]
    best, best_aic = 1, np.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for p in range(1, p_max + 1):
            fit = fit_var(y, p, _start=p_max)
            sign, logdet = np.linalg.slogdet(fit.sigma)
            if sign <= 0:
                continue
            aic = logdet + 2.0 * (n * n * p + n) / fit.n_obs
            if aic < best_aic:
                best, best_aic = p, aic
    return best


def ma_coefficients(fit: VarFit, H: int) -> np.ndarray:
    """Moving-average matrices ``A_0 .. A_{H-1}`` with ``A_h = sum_k Phi_k A_{h-k}``."""
    if H < 1:
        raise ValueError("horizon must be at least 1")
    n, p = fit.n_series, fit.lag_order
    A = np.zeros((H, n, n))
    A[0] = np.eye(n)
    for h in range(1, H):
        for k in range(1, min(h, p) + 1):
            A[h] += fit.coefs[k - 1] @ A[h - k]
    return A


@dataclass(frozen=True)
class FevdMatrix:
    horizon: int
    raw: np.ndarray
    normalized: np.ndarray


def gfevd(fit: VarFit, H: int = DEFAULT_HORIZON,
          scaling: Literal["source", "receiver"] = "source") -> FevdMatrix:
    r"""Generalized forecast-error variance decomposition.

    .. math::
        \theta_{ij}(H) = \frac{\sigma_{jj}^{-1}\sum_{h<H}(e_i' A_h \Sigma e_j)^2}
                              {\sum_{h<H} e_i' A_h \Sigma A_h' e_i}

    rows then normalized to sum to one. ``scaling="receiver"`` divides by
    :math:`\sigma_{ii}` instead of :math:`\sigma_{jj}`.
    """
    S = fit.sigma
    diag = np.diag(S)
    if np.any(diag <= 0):
        raise ValueError("residual variances must be positive")
    A = ma_coefficients(fit, H)
    AS = A @ S  # (H, N, N): rows e_i' A_h Sigma
    num = np.sum(AS ** 2, axis=0)
    den = np.einsum("hij,hij->i", AS, A)  # e_i' A_h Sigma A_h' e_i summed over h
    if scaling == "source":
        raw = num / diag[None, :] / den[:, None]
    elif scaling == "receiver":
        raw = num / diag[:, None] / den[:, None]
    else:
        raise ValueError(f"unknown scaling {scaling!r}")
    return FevdMatrix(H, raw, raw / raw.sum(axis=1, keepdims=True))


@dataclass(frozen=True)
class SpilloverTable:
    names: tuple[str, ...]
    matrix_percent: np.ndarray
    directional_from: np.ndarray
    directional_to: np.ndarray
    net: np.ndarray
    total_index: float
    net_pairwise: np.ndarray

    @property
    def including_own(self) -> np.ndarray:
        """Column sums including the diagonal."""
        return self.matrix_percent.sum(axis=0)

    def to_csv(self, path=None, digits: int = 6) -> str:
        """Serialize in the familiar spillover-table layout.

        Interior percent matrix with a ``Directional From Others`` column,
        followed by ``Directional To Others`` and ``Directional Including
        Own`` rows; the total index sits in the last cell of the ``To`` row.
        """
        fmt = (lambda v: f"{v:.{digits}g}") if digits else repr
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["", *self.names, "Directional From Others"])
        for name, row, frm in zip(self.names, self.matrix_percent, self.directional_from):
            w.writerow([name, *map(fmt, row), fmt(frm)])
        w.writerow(["Directional To Others", *map(fmt, self.directional_to),
                    f"Total Spillover Index={fmt(self.total_index)}"])
        w.writerow(["Directional Including Own", *map(fmt, self.including_own), ""])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def spillover_table_from_percent(matrix_percent, names: Sequence[str] | None = None,
                                 pairwise_sign: Literal["transmitted", "printed"] = "transmitted"
                                 ) -> SpilloverTable:
    """Spillover margins from a percent matrix (rows = receivers).

    ``from`` is the off-diagonal row sum, ``to`` the off-diagonal column sum,
    ``net = to - from`` and the total index is ``sum(from) / N``.
    ``net_pairwise[i, j]`` is what ``i`` transmits to ``j`` minus what it
    receives from ``j``; ``pairwise_sign="printed"`` flips the sign.
    """
    M = np.array(matrix_percent, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError("spillover matrix must be square")
    names = tuple(names) if names is not None else tuple(f"s{i + 1}" for i in range(n))
    off = M - np.diag(np.diag(M))
    frm = off.sum(axis=1)
    to = off.sum(axis=0)
    pair = M.T - M
    if pairwise_sign == "printed":
        pair = -pair
    elif pairwise_sign != "transmitted":
        raise ValueError(f"unknown pairwise_sign {pairwise_sign!r}")
    return SpilloverTable(names, M, frm, to, to - frm, float(frm.sum() / n), pair)


def build_spillover_table(fevd: FevdMatrix, names: Sequence[str] | None = None,
                          pairwise_sign: Literal["transmitted", "printed"] = "transmitted"
                          ) -> SpilloverTable:
    """Spillover table from the row-normalized decomposition, in percent."""
    return spillover_table_from_percent(100.0 * fevd.normalized, names, pairwise_sign)


def spillover_pipeline(panel, p: int = DEFAULT_LAG, H: int = DEFAULT_HORIZON, *,
                       scaling: Literal["source", "receiver"] = "source",
                       pairwise_sign: Literal["transmitted", "printed"] = "transmitted",
                       dof_adjust: bool = False) -> SpilloverTable:
    """Fit a VAR(p) and build the spillover table at horizon ``H``."""
    fit = fit_var(panel, p, dof_adjust=dof_adjust)
    names = panel.names if isinstance(panel, VolatilityPanel) else None
    return build_spillover_table(gfevd(fit, H, scaling), names, pairwise_sign)
