"""Run configured analyses and write their tables and charts plus a manifest."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .bekk import BekkConfig, classify_direction, fit_bekk
from .dcc import DccConfig, fit_dcc, fit_dcc_pairwise, mean_dynamic_correlation
from .garch import GarchConfig, fit_garch11
from .panel import PARKINSON_CONSTANT, PanelError, descriptive_stats, load_price_panel, \
    log_returns, range_volatility
from .plots import line_chart, small_multiples
from .rolling import RollingConfig, rolling_spillover, summarize_all
from .spillover import DEFAULT_HORIZON, DEFAULT_LAG, select_lag, spillover_pipeline

__all__ = ["RunConfig", "AnalysisError", "ANALYSES", "run", "stars", "format_coefficient"]

ANALYSES = ("stats", "garch", "dcc", "bekk", "spillover", "rolling")


class AnalysisError(RuntimeError):
    """A module error annotated with the analysis and input that triggered it."""

    def __init__(self, analysis: str, source: str, cause: BaseException):
        super().__init__(f"[{analysis}] {source}: {type(cause).__name__}: {cause}")
        self.analysis = analysis
        self.source = source
        self.cause = cause


@dataclass
class RunConfig:
    inputs: list[str] = field(default_factory=list)
    schema: str = "auto"
    analysis: str = "all"
    output_dir: str = "out"
    min_rows: int = 30
    # stats
    adf_lags: int | None = None
    # garch / dcc
    mean_lag: int = 0
    allow_igarch: bool = False
    robust_se: bool = False
    dcc_mode: str = "joint"
    workers: int = 1
    # bekk
    bekk_diagonal: bool = False
    bekk_targeting: bool = False
    bekk_force: bool = False
    bekk_restarts: int = 5
    significance: float = 0.05
    # volatility / spillover
    range_constant: float = 0.361
    parkinson_exact: bool = False
    annualization_days: int = 365
    var_lag: int | None = None
    max_lag: int = 0
    horizon: int = DEFAULT_HORIZON
    gfevd_scaling: str = "source"
    pairwise_sign: str = "transmitted"
    # rolling
    window: int = 104
    step: int = 1
    per_window_lag: bool = False
    # output
    digits: int = 6
    full_precision: bool = False
    seed: int = 0

    @classmethod
    def from_mapping(cls, values: dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValueError(f"unknown configuration keys: {unknown}")
        cfg = cls(**values)
        if isinstance(cfg.inputs, str):
            cfg.inputs = [cfg.inputs]
        return cfg

    def selected(self) -> list[str]:
        if self.analysis == "all":
            return list(ANALYSES)
        chosen = [a.strip() for a in self.analysis.split(",")]
        bad = [a for a in chosen if a not in ANALYSES]
        if bad:
            raise ValueError(f"unknown analysis {bad}; choose from {ANALYSES} or 'all'")
        return chosen

    @property
    def constant(self) -> float:
        return PARKINSON_CONSTANT if self.parkinson_exact else self.range_constant


# --------------------------------------------------------------------------
# formatting helpers
# --------------------------------------------------------------------------

def stars(p: float) -> str:
    """``***`` at 1%, ``**`` at 5%, ``*`` at 10%."""
    if not np.isfinite(p):
        return ""
    return "***" if p < 0.01 else "**" if p < 0.05 else "*" if p < 0.10 else ""


def format_coefficient(estimate: float, t: float, p: float) -> str:
    """Display form ``0.0622***(7.6635)``."""
    if not np.isfinite(t):
        return f"{estimate:.4f}"
    return f"{estimate:.4f}{stars(p)}({t:.4f})"


class _Csv:
    def __init__(self, digits: int):
        self.digits = digits
        self.buf = io.StringIO()
        self.w = csv.writer(self.buf, lineterminator="\n")

    def fmt(self, v):
        if isinstance(v, (float, np.floating)):
            return f"{float(v):.{self.digits}g}" if self.digits else repr(float(v))
        if isinstance(v, (np.integer,)):
            return str(int(v))
        return v

    def row(self, values: Iterable):
        self.w.writerow([self.fmt(v) for v in values])

    def text(self) -> str:
        return self.buf.getvalue()


def _p_from_t(t: np.ndarray) -> np.ndarray:
    from scipy.stats import norm

    return 2.0 * norm.sf(np.abs(np.asarray(t, dtype=float)))


# --------------------------------------------------------------------------
# runner
# --------------------------------------------------------------------------

class _Writer:
    def __init__(self, out: Path, digits: int, full: bool):
        self.out = out
        self.digits = digits
        self.full = full
        self.artifacts: list[dict[str, str]] = []
        out.mkdir(parents=True, exist_ok=True)

    def text(self, name: str, text: str, kind: str):
        path = self.out / name
        path.write_text(text)
        self.artifacts.append({"file": name, "kind": kind,
                               "sha256": hashlib.sha256(text.encode()).hexdigest()})

    def table(self, name: str, header: Sequence[str], rows: Sequence[Sequence], kind: str):
        for digits, fname in ((self.digits, name),) + (((0, name.replace(".csv", ".full.csv")),)
                                                       if self.full else ()):
            c = _Csv(digits)
            c.row(header)
            for r in rows:
                c.row(r)
            self.text(fname, c.text(), kind)


def _stats(ctx, w: _Writer):
    report = descriptive_stats(ctx["returns"], adf_lags=ctx["cfg"].adf_lags)
    fields_ = [("mean", "mean"), ("max", "maximum"), ("min", "minimum"),
               ("std", "standard deviation"), ("skewness", "skewness"),
               ("kurtosis", "kurtosis"), ("n", "number of samples"), ("jb", "JB"),
               ("jb_pvalue", "JB p-value"), ("adf_t", "ADF t"), ("adf_pvalue", "ADF p-value"),
               ("adf_lags", "ADF lags")]
    rows = [[label, *[getattr(s, attr) for s in report.series]] for attr, label in fields_]
    w.table("stats.csv", ["statistic", *[s.name for s in report.series]], rows, "stats")


def _garch_rows(name, fit):
    rows = []
    for pname, (est, se, t) in fit.summary().items():
        p = float(_p_from_t(t))
        rows.append([name, pname, est, se, t, p, stars(p), format_coefficient(est, t, p)])
    rows.append([name, "loglik", fit.loglik, "", "", "", "", ""])
    return rows


_COEF_HEADER = ["series", "parameter", "estimate", "se", "t", "p", "stars", "display"]


def _garch(ctx, w: _Writer):
    cfg = ctx["cfg"]
    r = ctx["returns"]
    rows = []
    for k, name in enumerate(r.names):
        fit = fit_garch11(r.returns[:, k], cfg.mean_lag, ctx["garch_cfg"])
        rows += _garch_rows(name, fit)
    w.table("garch_coefficients.csv", _COEF_HEADER, rows, "garch")


def _dcc_tables(fit, label=""):
    rows = []
    for name, g in zip(fit.names, fit.garch_fits):
        rows += _garch_rows(name, g)
    inf = fit.inference
    for k, pname in enumerate(("theta", "eta")):
        est = (fit.params.theta, fit.params.eta)[k]
        se = inf.standard_errors[k] if inf else np.nan
        t = inf.t_statistics[k] if inf else np.nan
        p = float(_p_from_t(t))
        rows.append([label or "DCC", pname, est, se, t, p, stars(p), format_coefficient(est, t, p)])
    rows.append([label or "DCC", "loglik", fit.loglik, "", "", "", "", ""])
    return rows


def _dcc(ctx, w: _Writer):
    cfg = ctx["cfg"]
    r = ctx["returns"]
    dcfg = DccConfig(garch=ctx["garch_cfg"], mean_lag=cfg.mean_lag, workers=cfg.workers)
    rows, means = [], []
    if cfg.dcc_mode == "pairwise":
        fits = fit_dcc_pairwise(r, dcfg)
        univariate = {}
        for (i, j), fit in fits.items():
            univariate.setdefault(i, fit.garch_fits[0])
            univariate.setdefault(j, fit.garch_fits[1])
            label = f"{r.names[i]}|{r.names[j]}"
            rows += [row for row in _dcc_tables(fit, label) if row[0] == label]
            m, z = mean_dynamic_correlation(fit, 0, 1)
            p = float(_p_from_t(z))
            means.append([r.names[i], r.names[j], m, z, p, stars(p), format_coefficient(m, z, p)])
        rows = [row for k in sorted(univariate) for row in _garch_rows(r.names[k], univariate[k])
                ] + rows
    elif cfg.dcc_mode == "joint":
        fit = fit_dcc(r, dcfg)
        rows = _dcc_tables(fit)
        n = len(r.names)
        for i in range(n):
            for j in range(i + 1, n):
                m, z = mean_dynamic_correlation(fit, i, j)
                p = float(_p_from_t(z))
                means.append([r.names[i], r.names[j], m, z, p, stars(p),
                              format_coefficient(m, z, p)])
        dates = [str(d) for d in r.dates[len(r.dates) - fit.corr_path.shape[0]:]]
        corr_rows = [[d, r.names[i], r.names[j], fit.corr_path[t, i, j]]
                     for t, d in enumerate(dates) for i in range(n) for j in range(i + 1, n)]
        w.table("dcc_correlation_path.csv", ["date", "market_i", "market_j", "rho"], corr_rows,
                "dcc")
        if n >= 2:
            panels = {f"{r.names[0]} - {r.names[j]}": fit.corr_path[:, 0, j] for j in range(1, n)}
            w.text("dcc_correlation.svg", small_multiples(None, dates, panels,
                                                          ylabel="correlation"), "dcc")
    else:
        raise ValueError(f"unknown dcc_mode {cfg.dcc_mode!r}")
    w.table("dcc_coefficients.csv", _COEF_HEADER, rows, "dcc")
    w.table("dcc_mean_correlations.csv",
            ["market_i", "market_j", "mean", "z", "p", "stars", "display"], means, "dcc")


def _bekk(ctx, w: _Writer):
    cfg = ctx["cfg"]
    r = ctx["returns"]
    fit = fit_bekk(r, BekkConfig(diagonal=cfg.bekk_diagonal, variance_targeting=cfg.bekk_targeting,
                                 restarts=cfg.bekk_restarts, seed=cfg.seed, force=cfg.bekk_force,
                                 robust_se=cfg.robust_se))
    rows = [["BEKK", lab, est, se, t, p, stars(p), format_coefficient(est, t, p)]
            for lab, est, se, t, p in fit.coefficient_table()]
    rows.append(["BEKK", "loglik", fit.loglik, "", "", "", "", ""])
    w.table("bekk_coefficients.csv", _COEF_HEADER, rows, "bekk")
    ctx["warnings"] += [f"bekk: {note}" for note in fit.warnings]
    n = len(r.names)
    verdicts = []
    for i in range(n):
        for j in range(i + 1, n):
            v = classify_direction(fit, i, j, cfg.significance)
            verdicts.append([r.names[i], r.names[j], v.classification,
                             v.channels["i_to_j"] or "", v.channels["j_to_i"] or ""])
    w.table("bekk_directions.csv",
            ["market_i", "market_j", "classification", "channel_i_to_j", "channel_j_to_i"],
            verdicts, "bekk")


def _lag(ctx) -> int:
    cfg = ctx["cfg"]
    if cfg.var_lag is not None:
        return cfg.var_lag
    if cfg.max_lag:
        return select_lag(ctx["vol"], cfg.max_lag)
    return DEFAULT_LAG


def _spillover(ctx, w: _Writer):
    cfg = ctx["cfg"]
    table = spillover_pipeline(ctx["vol"], _lag(ctx), cfg.horizon, scaling=cfg.gfevd_scaling,
                               pairwise_sign=cfg.pairwise_sign)
    w.text("spillover_table.csv", table.to_csv(digits=cfg.digits), "spillover")
    if cfg.full_precision:
        w.text("spillover_table.full.csv", table.to_csv(digits=0), "spillover")
    names = table.names
    rows = [[names[i], names[j], table.net_pairwise[i, j]]
            for i in range(len(names)) for j in range(len(names)) if i != j]
    w.table("net_pairwise.csv", ["market_i", "market_j", "net_pairwise"], rows, "spillover")


def _rolling(ctx, w: _Writer):
    cfg = ctx["cfg"]
    rc = RollingConfig(window_length=cfg.window, horizon=cfg.horizon, lag=_lag(ctx),
                       step=cfg.step, select_lag_per_window=cfg.per_window_lag,
                       max_lag=cfg.max_lag or DEFAULT_LAG, scaling=cfg.gfevd_scaling,
                       pairwise_sign=cfg.pairwise_sign, workers=cfg.workers)
    series = rolling_spillover(ctx["vol"], rc)
    w.text("rolling_spillovers.csv", series.to_csv(digits=cfg.digits), "rolling")
    dates = [str(d) for d in series.dates]
    w.table("rolling_total.csv", ["date", "total"], list(zip(dates, series.total)), "rolling")
    names = series.names
    w.text("total_spillover.svg", line_chart(None, dates, {"total": series.total},
                                             title="Total spillover", ylabel="percent"),
           "rolling")
    w.text("directional_to.svg", small_multiples(
        None, dates, {f"{n}: to others": series.to[:, i] for i, n in enumerate(names)},
        ylabel="percent"), "rolling")
    w.text("directional_from.svg", small_multiples(
        None, dates, {f"{n}: from others": series.from_[:, i] for i, n in enumerate(names)},
        ylabel="percent"), "rolling")
    w.text("net_spillover.svg", small_multiples(
        None, dates, {f"{n}: net": series.net[:, i] for i, n in enumerate(names)},
        ylabel="percent"), "rolling")
    w.text("net_pairwise.svg", small_multiples(
        None, dates, {f"{names[0]} - {names[j]}": series.pairwise[:, 0, j]
                      for j in range(1, len(names))}, ylabel="percent"), "rolling")
    rows = [[key, s.minimum, str(s.min_date), s.maximum, str(s.max_date), s.mean]
            for key, s in summarize_all(series).items()]
    w.table("rolling_summary.csv", ["measure", "min", "min_date", "max", "max_date", "mean"],
            rows, "rolling")


_RUNNERS = {"stats": _stats, "garch": _garch, "dcc": _dcc, "bekk": _bekk,
            "spillover": _spillover, "rolling": _rolling}


def run(cfg: RunConfig) -> dict[str, Any]:
    """Execute every selected analysis and write ``manifest.json``.

    Returns the manifest. Module errors are re-raised as
    :class:`AnalysisError` carrying the analysis name and input files.
    """
    selected = cfg.selected()
    if not cfg.inputs:
        raise ValueError("no input files given")
    source = ",".join(cfg.inputs)
    try:
        panel = load_price_panel(cfg.inputs, cfg.schema, min_rows=cfg.min_rows)
    except (PanelError, OSError, ValueError) as exc:
        raise AnalysisError("load", source, exc) from exc
    if any(a in ("spillover", "rolling") for a in selected) and not panel.has_range:
        raise AnalysisError("config", source, ValueError(
            "spillover and rolling analyses need high/low prices"))
    ctx = {"cfg": cfg, "panel": panel, "returns": log_returns(panel),
           "garch_cfg": GarchConfig(allow_igarch=cfg.allow_igarch, seed=cfg.seed,
                                    robust_se=cfg.robust_se),
           "warnings": []}
    if panel.has_range:
        ctx["vol"] = range_volatility(panel, cfg.constant, cfg.annualization_days)
    w = _Writer(Path(cfg.output_dir), cfg.digits, cfg.full_precision)
    for name in selected:
        try:
            _RUNNERS[name](ctx, w)
        except AnalysisError:
            raise
        except Exception as exc:  # noqa: BLE001 - annotate and propagate
            raise AnalysisError(name, source, exc) from exc
    from . import __version__

    manifest = {"package": "volspill", "version": __version__, "config": asdict(cfg),
                "analyses": selected, "n_obs": panel.n_obs, "series": list(panel.names),
                "artifacts": w.artifacts, "warnings": ctx["warnings"]}
    (Path(cfg.output_dir) / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
