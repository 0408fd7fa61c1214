"""Rolling-window spillover indices."""
from __future__ import annotations

import csv
import io
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .panel import VolatilityPanel
from .spillover import DEFAULT_HORIZON, DEFAULT_LAG, SpilloverTable, select_lag, \
    spillover_pipeline

__all__ = ["RollingConfig", "RollingSeries", "rolling_spillover", "summarize_range",
           "RangeSummary"]


@dataclass(frozen=True)
class RollingConfig:
    window_length: int = 104
    horizon: int = DEFAULT_HORIZON
    lag: int = DEFAULT_LAG
    step: int = 1
    select_lag_per_window: bool = False
    max_lag: int = 4
    scaling: str = "source"
    pairwise_sign: str = "transmitted"
    workers: int = 1

    def validate(self, n_series: int) -> "RollingConfig":
        if self.step < 1:
            raise ValueError("step must be at least 1")
        lag = self.max_lag if self.select_lag_per_window else self.lag
        if self.window_length <= n_series * lag + 10:
            raise ValueError(f"window_length {self.window_length} must exceed "
                             f"N*p + 10 = {n_series * lag + 10}")
        return self


@dataclass(frozen=True)
class RollingSeries:
    """Spillover measures by window end date; failed windows hold NaN."""

    dates: np.ndarray
    names: tuple[str, ...]
    total: np.ndarray
    to: np.ndarray  # (W, N)
    from_: np.ndarray  # (W, N)
    net: np.ndarray  # (W, N)
    pairwise: np.ndarray  # (W, N, N)
    failures: tuple[tuple[int, str], ...] = ()

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def ok(self) -> np.ndarray:
        return np.isfinite(self.total)

    def to_csv(self, path=None, digits: int = 6) -> str:
        """Long form ``date,measure,market_i,market_j,value``; gaps are skipped."""
        fmt = (lambda v: f"{v:.{digits}g}") if digits else repr
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["date", "measure", "market_i", "market_j", "value"])
        n = len(self.names)
        for k, d in enumerate(self.dates):
            if not np.isfinite(self.total[k]):
                continue
            day = str(d)
            w.writerow([day, "total", "", "", fmt(self.total[k])])
            for measure, arr in (("to", self.to), ("from", self.from_), ("net", self.net)):
                for i in range(n):
                    w.writerow([day, measure, self.names[i], "", fmt(arr[k, i])])
            for i in range(n):
                for j in range(n):
                    if i != j:
                        w.writerow([day, "net_pairwise", self.names[i], self.names[j],
                                    fmt(self.pairwise[k, i, j])])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _window_table(panel: VolatilityPanel, start: int, config: RollingConfig):
    sub = panel.window(start, start + config.window_length)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            lag = select_lag(sub, config.max_lag) if config.select_lag_per_window else config.lag
            table = spillover_pipeline(sub, lag, config.horizon, scaling=config.scaling,
                                       pairwise_sign=config.pairwise_sign)
        except (np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
            return None, str(exc)
    if not np.all(np.isfinite(table.matrix_percent)):
        return None, "non-finite decomposition"
    return table, ""


def window_starts(n_obs: int, config: RollingConfig) -> np.ndarray:
    return np.arange(0, n_obs - config.window_length + 1, config.step)


def rolling_spillover(panel: VolatilityPanel, config: RollingConfig | None = None
                      ) -> RollingSeries:
    """Re-estimate the VAR and spillover table on each window.

    Windows are dated by their last observation. ``config.workers > 1``
    evaluates windows on a thread pool; results are collected in window
    order so the output does not depend on the degree of parallelism.

    Raises
    ------
    ValueError
        If the panel is shorter than one window or every window fails.
    """
    config = (config or RollingConfig()).validate(panel.n_series)
    if panel.n_obs < config.window_length:
        raise ValueError(f"{panel.n_obs} observations, window needs {config.window_length}")
    starts = window_starts(panel.n_obs, config)
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(lambda s: _window_table(panel, s, config), starts))
    else:
        results = [_window_table(panel, s, config) for s in starts]

    W, n = len(starts), panel.n_series
    total = np.full(W, np.nan)
    to = np.full((W, n), np.nan)
    frm = np.full((W, n), np.nan)
    net = np.full((W, n), np.nan)
    pair = np.full((W, n, n), np.nan)
    failures = []
    for k, (table, err) in enumerate(results):
        if table is None:
            failures.append((int(starts[k]), err))
            continue
        total[k] = table.total_index
        to[k] = table.directional_to
        frm[k] = table.directional_from
        net[k] = table.net
        pair[k] = table.net_pairwise
    if len(failures) == W:
        raise ValueError(f"all {W} windows failed; first error: {failures[0][1]}")
    dates = panel.dates[starts + config.window_length - 1]
    return RollingSeries(dates, panel.names, total, to, frm, net, pair, tuple(failures))


def standalone_window(panel: VolatilityPanel, k: int, config: RollingConfig | None = None
                      ) -> SpilloverTable | None:
    """Spillover table for window ``k`` computed on its own slice."""
    config = config or RollingConfig()
    start = int(window_starts(panel.n_obs, config)[k])
    return _window_table(panel, start, config)[0]


@dataclass(frozen=True)
class RangeSummary:
    minimum: float
    min_date: np.datetime64
    maximum: float
    max_date: np.datetime64
    mean: float


def summarize_range(series: RollingSeries, measure: str = "total", market: int | None = None,
                    other: int | None = None) -> RangeSummary:
    """Extremes (with window end dates) and mean of one rolling measure, ignoring gaps."""
    if measure == "total":
        values = series.total
    elif measure in ("to", "from", "net"):
        values = {"to": series.to, "from": series.from_, "net": series.net}[measure][:, market]
    elif measure == "net_pairwise":
        values = series.pairwise[:, market, other]
    else:
        raise ValueError(f"unknown measure {measure!r}")
    ok = np.isfinite(values)
    if len(values) == 0 or not ok.any():
        raise ValueError("empty series")
    idx = np.flatnonzero(ok)
    lo = idx[np.argmin(values[ok])]
    hi = idx[np.argmax(values[ok])]
    return RangeSummary(float(values[lo]), series.dates[lo], float(values[hi]),
                        series.dates[hi], float(values[ok].mean()))


def summarize_all(series: RollingSeries) -> dict[str, RangeSummary]:
    out = {"total": summarize_range(series)}
    for i, name in enumerate(series.names):
        for m in ("to", "from", "net"):
            out[f"{m}:{name}"] = summarize_range(series, m, i)
    return out
