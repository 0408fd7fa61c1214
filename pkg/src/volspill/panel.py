"""Price panels and the return, volatility and summary statistics derived from them.

Panels are small frozen dataclasses wrapping numpy arrays; every function in
this module is pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from scipy import stats

__all__ = [
    "PricePanel",
    "ReturnPanel",
    "VolatilityPanel",
    "SeriesStats",
    "StatsReport",
    "PanelError",
    "PARKINSON_CONSTANT",
    "load_price_panel",
    "log_returns",
    "range_volatility",
    "jarque_bera",
    "adf_test",
    "descriptive_stats",
]

#: Exact Parkinson scaling 1 / (4 ln 2); the default 0.361 is its rounded form.
PARKINSON_CONSTANT = 1.0 / (4.0 * math.log(2.0))


class PanelError(ValueError):
    """Raised when an input panel is malformed or too short."""


def _as_dates(dates) -> np.ndarray:
    return np.asarray(pd.DatetimeIndex(dates).values.astype("datetime64[D]"))


@dataclass(frozen=True)
class PricePanel:
    """Date-aligned daily prices for ``N`` named series.

    ``close`` is ``(T, N)``; ``high`` and ``low`` are optional arrays of the
    same shape.
    """

    dates: np.ndarray
    names: tuple[str, ...]
    close: np.ndarray
    high: np.ndarray | None = None
    low: np.ndarray | None = None

    def __post_init__(self):
        dates = _as_dates(self.dates)
        close = np.array(self.close, dtype=float, ndmin=2)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "close", close)
        if close.shape != (len(dates), len(self.names)):
            raise PanelError(
                f"close has shape {close.shape}, expected {(len(dates), len(self.names))}"
            )
        if len(dates) > 1 and not np.all(np.diff(dates) > np.timedelta64(0, "D")):
            raise PanelError("dates must be strictly increasing")
        if not np.all(np.isfinite(close)) or np.any(close <= 0):
            raise PanelError("close prices must be finite and positive")
        if (self.high is None) != (self.low is None):
            raise PanelError("high and low must be supplied together")
        if self.high is not None:
            high = np.array(self.high, dtype=float, ndmin=2)
            low = np.array(self.low, dtype=float, ndmin=2)
            if high.shape != close.shape or low.shape != close.shape:
                raise PanelError("high/low shapes must match close")
            if not (np.all(np.isfinite(high)) and np.all(np.isfinite(low))):
                raise PanelError("high/low prices must be finite")
            if np.any(low <= 0):
                t, i = np.argwhere(low <= 0)[0]
                raise PanelError(f"non-positive low at row {t}, series {self.names[i]!r}")
            if np.any(high < low):
                t, i = np.argwhere(high < low)[0]
                raise PanelError(
                    f"high < low at row {t} ({dates[t]}), series {self.names[i]!r}"
                )
            object.__setattr__(self, "high", high)
            object.__setattr__(self, "low", low)
        for arr in (self.close, self.high, self.low):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def n_obs(self) -> int:
        return self.close.shape[0]

    @property
    def n_series(self) -> int:
        return self.close.shape[1]

    @property
    def has_range(self) -> bool:
        return self.high is not None

    def to_frame(self, field: str = "close") -> pd.DataFrame:
        return pd.DataFrame(getattr(self, field), index=pd.DatetimeIndex(self.dates),
                            columns=list(self.names))


@dataclass(frozen=True)
class ReturnPanel:
    """Log returns, ``(T-1, N)``, dated by the later of the two prices."""

    dates: np.ndarray
    names: tuple[str, ...]
    returns: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", _as_dates(self.dates))
        object.__setattr__(self, "names", tuple(self.names))
        r = np.array(self.returns, dtype=float, ndmin=2)
        if r.shape != (len(self.dates), len(self.names)):
            raise PanelError(f"returns shape {r.shape} does not match dates/names")
        r.setflags(write=False)
        object.__setattr__(self, "returns", r)

    @classmethod
    def from_array(cls, returns, names: Sequence[str] | None = None,
                   start: str = "2000-01-03") -> "ReturnPanel":
        """Wrap a bare array with business-day dates (for simulations)."""
        returns = np.array(returns, dtype=float, ndmin=2)
        if returns.shape[0] == 1 and returns.ndim == 2 and names is None:
            returns = returns.T
        n = returns.shape[1]
        names = tuple(names) if names is not None else tuple(f"s{i + 1}" for i in range(n))
        dates = pd.bdate_range(start, periods=returns.shape[0])
        return cls(dates, names, returns)

    @property
    def n_obs(self) -> int:
        return self.returns.shape[0]

    @property
    def n_series(self) -> int:
        return self.returns.shape[1]

    def column(self, name_or_index) -> np.ndarray:
        idx = name_or_index if isinstance(name_or_index, int) else self.names.index(name_or_index)
        return self.returns[:, idx]

    def scaled(self, factor) -> "ReturnPanel":
        return ReturnPanel(self.dates, self.names, self.returns * np.asarray(factor))

    def select(self, columns: Sequence[int]) -> "ReturnPanel":
        columns = list(columns)
        return ReturnPanel(self.dates, [self.names[c] for c in columns],
                           self.returns[:, columns])


@dataclass(frozen=True)
class VolatilityPanel:
    """Annualized daily range volatilities in percent, ``(T, N)``."""

    dates: np.ndarray
    names: tuple[str, ...]
    vol: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", _as_dates(self.dates))
        object.__setattr__(self, "names", tuple(self.names))
        v = np.array(self.vol, dtype=float, ndmin=2)
        if v.shape != (len(self.dates), len(self.names)):
            raise PanelError(f"vol shape {v.shape} does not match dates/names")
        v.setflags(write=False)
        object.__setattr__(self, "vol", v)

    @classmethod
    def from_array(cls, vol, names: Sequence[str] | None = None,
                   start: str = "2000-01-03") -> "VolatilityPanel":
        vol = np.array(vol, dtype=float, ndmin=2)
        n = vol.shape[1]
        names = tuple(names) if names is not None else tuple(f"s{i + 1}" for i in range(n))
        return cls(pd.bdate_range(start, periods=vol.shape[0]), names, vol)

    @property
    def n_obs(self) -> int:
        return self.vol.shape[0]

    @property
    def n_series(self) -> int:
        return self.vol.shape[1]

    def window(self, start: int, stop: int) -> "VolatilityPanel":
        return VolatilityPanel(self.dates[start:stop], self.names, self.vol[start:stop])

    def permuted(self, order: Sequence[int]) -> "VolatilityPanel":
        order = list(order)
        return VolatilityPanel(self.dates, [self.names[i] for i in order], self.vol[:, order])


# --------------------------------------------------------------------------
# CSV ingest
# --------------------------------------------------------------------------

_FIELDS = ("close", "high", "low")


def _read_frame(path: Path) -> pd.DataFrame:
    if not path.exists():
        raise FileNotFoundError(path)
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    if raw.shape[1] < 2:
        raise PanelError(f"{path}: need a date column and at least one series")
    date_col = raw.columns[0]
    try:
        dates = pd.to_datetime(raw[date_col].str.strip(), format="ISO8601")
    except (ValueError, TypeError) as exc:
        bad = next(
            (k for k, v in enumerate(raw[date_col])
             if pd.isna(pd.to_datetime(v, errors="coerce", format="ISO8601"))),
            None,
        )
        where = f" at row {bad + 2}" if bad is not None else ""
        raise PanelError(f"{path}: unparseable date{where}, column {date_col!r}") from exc
    out = {}
    for col in raw.columns[1:]:
        text = raw[col].str.strip()
        missing = text.isin(["", "NA", "NaN", "nan", "null"])
        values = pd.to_numeric(text.where(~missing), errors="coerce")
        bad = values.isna() & ~missing
        if bad.any():
            k = int(np.flatnonzero(bad.to_numpy())[0])
            raise PanelError(
                f"{path}: unparseable value {raw[col].iloc[k]!r} at row {k + 2}, column {col!r}"
            )
        out[col.strip()] = values.to_numpy(dtype=float)
    frame = pd.DataFrame(out, index=pd.DatetimeIndex(dates, name="date"))
    if frame.index.has_duplicates:
        raise PanelError(f"{path}: duplicate dates")
    return frame


def _resolve_schema(frame: pd.DataFrame, schema) -> dict[str, dict[str, str]]:
    cols = list(frame.columns)
    if isinstance(schema, Mapping):
        mapping = {}
        for name, spec in schema.items():
            spec = {"close": spec} if isinstance(spec, str) else dict(spec)
            missing = [c for c in spec.values() if c not in cols]
            if missing:
                raise PanelError(f"schema references unknown columns {missing}")
            mapping[name] = spec
        return mapping
    if schema == "wide" or (schema == "auto" and all(c.rsplit("_", 1)[-1] in _FIELDS and "_" in c
                                                     for c in cols)):
        mapping: dict[str, dict[str, str]] = {}
        for c in cols:
            stem, _, kind = c.rpartition("_")
            if kind not in _FIELDS or not stem:
                raise PanelError(f"wide schema expects <name>_close/high/low, got {c!r}")
            mapping.setdefault(stem, {})[kind] = c
        return mapping
    if schema in ("auto", "close"):
        return {c: {"close": c} for c in cols}
    raise PanelError(f"unknown schema {schema!r}")


def load_price_panel(path, schema="auto", *, min_rows: int = 30) -> PricePanel:
    """Load one or more CSV files into an aligned :class:`PricePanel`.

    Parameters
    ----------
    path : path or sequence of paths
        CSV files with a header ``date,<name1>,...``. Several files are
        inner-joined on date.
    schema : {"auto", "close", "wide"} or mapping
        ``"close"`` treats every column as a close series and picks up
        companion ``<stem>.high.csv`` / ``<stem>.low.csv`` files when both
        exist. ``"wide"`` expects ``<name>_close,<name>_high,<name>_low``.
        ``"auto"`` chooses ``"wide"`` if every column carries such a suffix.
        A mapping ``{name: {"close": col, "high": col, "low": col}}`` selects
        columns explicitly.
    min_rows : int
        Minimum number of surviving rows after alignment.

    Rows with any missing cell are dropped; nothing is interpolated.
    """
    paths = [Path(path)] if isinstance(path, (str, Path)) else [Path(p) for p in path]
    series: dict[str, dict[str, pd.Series]] = {}
    for p in paths:
        frame = _read_frame(p)
        mapping = _resolve_schema(frame, schema)
        high_path = p.with_name(p.stem + ".high.csv")
        low_path = p.with_name(p.stem + ".low.csv")
        companions = None
        if all(set(m) == {"close"} for m in mapping.values()) and high_path.exists() \
                and low_path.exists():
            companions = {"high": _read_frame(high_path), "low": _read_frame(low_path)}
        for name, spec in mapping.items():
            if name in series:
                raise PanelError(f"duplicate series name {name!r}")
            if "close" not in spec:
                raise PanelError(f"series {name!r} has no close column")
            entry = {kind: frame[col] for kind, col in spec.items()}
            if companions is not None:
                for kind, comp in companions.items():
                    if spec["close"] not in comp.columns:
                        raise PanelError(f"{kind} companion file lacks column {spec['close']!r}")
                    entry[kind] = comp[spec["close"]]
            series[name] = entry

    names = list(series)
    with_range = all({"high", "low"} <= set(s) for s in series.values())
    fields = _FIELDS if with_range else ("close",)
    columns = {(name, kind): series[name][kind] for name in names for kind in fields}
    joined = pd.concat(columns, axis=1, join="inner").sort_index().dropna(how="any")
    if len(joined) < min_rows:
        raise PanelError(f"insufficient data: {len(joined)} aligned rows, need {min_rows}")
    stacked = {kind: np.column_stack([joined[(n, kind)].to_numpy() for n in names])
               for kind in fields}
    return PricePanel(
        dates=joined.index,
        names=names,
        close=stacked["close"],
        high=stacked.get("high"),
        low=stacked.get("low"),
    )


# --------------------------------------------------------------------------
# Transformations
# --------------------------------------------------------------------------

def log_returns(panel: PricePanel) -> ReturnPanel:
    """Differences of log close prices."""
    if panel.n_obs < 2:
        raise PanelError("need at least two price rows for returns")
    logp = np.log(panel.close)
    return ReturnPanel(panel.dates[1:], panel.names, logp[1:] - logp[:-1])


def range_volatility(panel: PricePanel, constant: float = 0.361,
                     annualization_days: int = 365) -> VolatilityPanel:
    r"""Annualized percent volatility from the daily high-low range.

    .. math::
        \tilde\sigma^2_{it} = c\,[\ln H_{it} - \ln L_{it}]^2, \qquad
        \hat\sigma_{it} = 100\sqrt{d\,\tilde\sigma^2_{it}}

    ``constant`` defaults to 0.361; pass :data:`PARKINSON_CONSTANT` for the
    exact value. ``annualization_days`` is 365 by default, 252 for the
    trading-day convention.
    """
    if not panel.has_range:
        raise PanelError("range volatility needs high and low prices")
    if constant <= 0 or annualization_days <= 0:
        raise ValueError("constant and annualization_days must be positive")
    variance = constant * (np.log(panel.high) - np.log(panel.low)) ** 2
    return VolatilityPanel(panel.dates, panel.names,
                           100.0 * np.sqrt(annualization_days * variance))


# --------------------------------------------------------------------------
# Descriptive statistics
# --------------------------------------------------------------------------

def jarque_bera(n: int, skewness: float, kurtosis: float) -> tuple[float, float]:
    """JB statistic and chi-square(2) p-value from moments (non-excess kurtosis)."""
    jb = n / 6.0 * (skewness ** 2 + (kurtosis - 3.0) ** 2 / 4.0)
    return jb, float(stats.chi2.sf(jb, 2))


def adf_test(x, lags: int | None = None, autolag: str = "BIC",
             maxlag: int | None = None) -> tuple[float, float, int]:
    """ADF test with intercept and no trend.

    Returns ``(t_statistic, p_value, used_lag)``. With ``lags=None`` the lag
    order is chosen by ``autolag`` over ``0..maxlag`` (default
    ``floor(12 (n/100)^0.25)``); p-values are MacKinnon's approximations.
    """
    from statsmodels.tsa.stattools import adfuller

    x = np.asarray(x, dtype=float)
    if maxlag is None:
        maxlag = int(np.floor(12.0 * (len(x) / 100.0) ** 0.25))
    if lags is not None:
        res = adfuller(x, maxlag=lags, regression="c", autolag=None)
        return float(res[0]), float(res[1]), int(res[2])
    res = adfuller(x, maxlag=maxlag, regression="c", autolag=autolag)
    return float(res[0]), float(res[1]), int(res[2])


@dataclass(frozen=True)
class SeriesStats:
    name: str
    mean: float
    max: float
    min: float
    std: float
    skewness: float
    kurtosis: float
    n: int
    jb: float
    jb_pvalue: float
    adf_t: float
    adf_pvalue: float
    adf_lags: int


@dataclass(frozen=True)
class StatsReport:
    series: tuple[SeriesStats, ...] = field(default_factory=tuple)

    def __getitem__(self, name: str) -> SeriesStats:
        for s in self.series:
            if s.name == name:
                return s
        raise KeyError(name)

    def to_frame(self) -> pd.DataFrame:
        rows = {s.name: {k: getattr(s, k) for k in SeriesStats.__dataclass_fields__ if k != "name"}
                for s in self.series}
        return pd.DataFrame(rows)


def descriptive_stats(returns: ReturnPanel, adf_lags: int | None = None,
                      autolag: str = "BIC", ddof: int = 1) -> StatsReport:
    """Per-series moments with normality and unit-root diagnostics.

    Skewness and kurtosis use population (biased) moments; kurtosis is
    non-excess. ``ddof`` only affects the reported standard deviation.
    """
    out = []
    for k, name in enumerate(returns.names):
        x = returns.returns[:, k]
        n = len(x)
        if n < 30:
            raise PanelError(f"series {name!r}: {n} observations, need at least 30")
        s = float(stats.skew(x, bias=True))
        kurt = float(stats.kurtosis(x, fisher=False, bias=True))
        jb, jb_p = jarque_bera(n, s, kurt)
        adf_t, adf_p, used = adf_test(x, lags=adf_lags, autolag=autolag)
        out.append(SeriesStats(name, float(x.mean()), float(x.max()), float(x.min()),
                               float(x.std(ddof=ddof)), s, kurt, n, jb, jb_p, adf_t, adf_p, used))
    return StatsReport(tuple(out))
