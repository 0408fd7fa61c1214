"""Seeded synthetic panels written in the CSV layout :func:`load_price_panel` reads."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import pandas as pd

from .bekk import BekkParams, intercept_for_covariance, simulate_bekk
from .dcc import simulate_dcc
from .garch import GarchParams, simulate_garch

__all__ = ["simulate_var", "simulate_returns", "prices_from_returns", "write_wide_csv",
           "simulate_panel"]


def simulate_var(intercept, coefs, sigma, n_obs: int, rng=None, burn: int = 200) -> np.ndarray:
    """Gaussian VAR(p) path; ``coefs`` has shape ``(p, N, N)``."""
    rng = np.random.default_rng(rng)
    coefs = np.asarray(coefs, dtype=float)
    if coefs.ndim == 2:
        coefs = coefs[None]
    p, n, _ = coefs.shape
    c = np.asarray(intercept, dtype=float)
    L = np.linalg.cholesky(np.asarray(sigma, dtype=float))
    total = n_obs + burn
    y = np.zeros((total + p, n))
    companion = np.zeros((n * p, n * p))
    companion[:n] = np.hstack(list(coefs))
    companion[n:, :-n] = np.eye(n * (p - 1))
    if np.max(np.abs(np.linalg.eigvals(companion))) < 1:
        y[:p] = np.linalg.solve(np.eye(n) - coefs.sum(axis=0), c)
    e = rng.standard_normal((total, n)) @ L.T
    for t in range(total):
        y[p + t] = c + sum(coefs[k] @ y[p + t - 1 - k] for k in range(p)) + e[t]
    return y[p + burn:]


def _garch_list(params: Mapping[str, Any]) -> list[GarchParams]:
    n = int(params.get("n_series", 2))
    def pick(key, default):
        v = params.get(key, default)
        return list(v) if isinstance(v, (list, tuple)) else [v] * n
    om, al, be, mu = (pick("omega", 1e-6), pick("alpha", 0.05), pick("beta", 0.90),
                      pick("mu", 0.0))
    return [GarchParams(o, a, b, m) for o, a, b, m in zip(om, al, be, mu)]


def simulate_returns(model: str, params: Mapping[str, Any], n_obs: int, seed: int = 0
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Returns ``(returns, daily_sd)`` arrays of shape ``(n_obs, N)``.

    ``daily_sd`` is the conditional standard deviation used to draw each
    return (for the VAR model it is the simulated volatility level converted
    to a daily fraction).
    """
    rng = np.random.default_rng(seed)
    if model == "garch":
        cols, sds = [], []
        for g in _garch_list(params):
            g.validate(stationarity_bound=None)
            r, s2 = simulate_garch(g, n_obs, rng, return_variance=True)
            cols.append(r)
            sds.append(np.sqrt(s2))
        return np.column_stack(cols), np.column_stack(sds)
    if model == "dcc":
        gl = _garch_list(params)
        n = len(gl)
        q_bar = params.get("q_bar")
        if q_bar is None:
            rho = float(params.get("rho", 0.5))
            q_bar = np.full((n, n), rho) + (1 - rho) * np.eye(n)
        r, _, _, s2 = simulate_dcc(gl, float(params.get("theta", 0.02)),
                                   float(params.get("eta", 0.97)), q_bar, n_obs, rng,
                                   return_paths=True)
        return r, np.sqrt(s2)
    if model == "bekk":
        a = np.asarray(params["a"], dtype=float)
        b = np.asarray(params["b"], dtype=float)
        if "c" in params:
            c = np.asarray(params["c"], dtype=float)
        else:
            cov = np.asarray(params.get("covariance", np.eye(len(a)) * 1e-4), dtype=float)
            c = intercept_for_covariance(a, b, cov)
        r, H = simulate_bekk(BekkParams(c, a, b), n_obs, rng, return_covariance=True)
        return r, np.sqrt(np.einsum("tii->ti", H))
    if model == "var":
        coefs = np.asarray(params["coefs"], dtype=float)
        n = coefs.shape[-1]
        vol = simulate_var(params.get("intercept", np.full(n, 5.0)), coefs,
                           params.get("sigma", np.eye(n)), n_obs, rng)
        vol = np.abs(vol)
        sd = vol / 100.0 / math.sqrt(365.0)
        return sd * rng.standard_normal(sd.shape), sd
    raise ValueError(f"unknown model {model!r}; choose garch, dcc, bekk or var")


def prices_from_returns(returns: np.ndarray, base: float = 100.0) -> np.ndarray:
    """Close prices starting at ``base``; one row longer than ``returns``."""
    logp = np.vstack([np.zeros(returns.shape[1]), np.cumsum(returns, axis=0)])
    return base * np.exp(logp)


def write_wide_csv(path, dates, names, close, high, low) -> Path:
    frame = {"date": pd.DatetimeIndex(dates).strftime("%Y-%m-%d")}
    for k, name in enumerate(names):
        frame[f"{name}_close"] = [repr(float(v)) for v in close[:, k]]
        frame[f"{name}_high"] = [repr(float(v)) for v in high[:, k]]
        frame[f"{name}_low"] = [repr(float(v)) for v in low[:, k]]
    path = Path(path)
    pd.DataFrame(frame).to_csv(path, index=False, lineterminator="\n")
    return path


def simulate_panel(model: str, params: Mapping[str, Any], n_obs: int, seed: int = 0,
                   path=None, names=None, start: str = "2017-03-01",
                   constant: float = 0.361, annualization_days: int = 365):
    """Simulate returns and synthesize a wide price CSV.

    Close prices cumulate the simulated returns from 100. For ``var`` the
    high/low range is set so that :func:`range_volatility` with the same
    ``constant`` and ``annualization_days`` returns the simulated volatility
    path exactly (up to rounding); for the GARCH family the half-range is
    ``|N(0, sd_t)|``.

    Returns ``(returns, close, high, low)``; writes ``path`` when given.
    """
    returns, sd = simulate_returns(model, params, n_obs, seed)
    n = returns.shape[1]
    names = list(names) if names is not None else [f"s{i + 1}" for i in range(n)]
    close = prices_from_returns(returns)
    rng = np.random.default_rng([seed, 1])
    if model == "var":
        vol = sd * 100.0 * math.sqrt(365.0)
        half = vol / (200.0 * math.sqrt(annualization_days * constant))
        half = np.vstack([half[:1], half])
    else:
        sd_full = np.vstack([sd[:1], sd])
        half = np.abs(rng.standard_normal(close.shape)) * sd_full
    high = close * np.exp(half)
    low = close * np.exp(-half)
    dates = pd.bdate_range(start, periods=close.shape[0])
    if path is not None:
        write_wide_csv(path, dates, names, close, high, low)
    return returns, close, high, low
