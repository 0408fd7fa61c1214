"""Volatility spillover analysis with conditional variance models and connectedness indices."""

from .bekk import BekkConfig, BekkFit, BekkParams, classify_direction, fit_bekk
from .dcc import DccConfig, DccFit, DccParams, fit_dcc, mean_dynamic_correlation
from .garch import GarchConfig, GarchFit, GarchParams, fit_garch11
from .panel import (PricePanel, ReturnPanel, VolatilityPanel, descriptive_stats,
                    load_price_panel, log_returns, range_volatility)
from .rolling import RollingConfig, RollingSeries, rolling_spillover, summarize_range
from .spillover import (SpilloverTable, build_spillover_table, fit_var, gfevd,
                        ma_coefficients, select_lag, spillover_pipeline,
                        spillover_table_from_percent)

__version__ = "0.1.0"

__all__ = [
    "BekkConfig", "BekkFit", "BekkParams", "classify_direction", "fit_bekk",
    "DccConfig", "DccFit", "DccParams", "fit_dcc", "mean_dynamic_correlation",
    "GarchConfig", "GarchFit", "GarchParams", "fit_garch11",
    "PricePanel", "ReturnPanel", "VolatilityPanel", "descriptive_stats", "load_price_panel",
    "log_returns", "range_volatility",
    "RollingConfig", "RollingSeries", "rolling_spillover", "summarize_range",
    "SpilloverTable", "build_spillover_table", "fit_var", "gfevd", "ma_coefficients",
    "select_lag", "spillover_pipeline", "spillover_table_from_percent",
]
