"""Command-line entry point: ``volspill <subcommand> [options]``.

Any option may also come from a TOML file passed with ``--config``; options
given on the command line take precedence. Failures exit with status 1 and
print a single JSON line prefixed by ``error:`` on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path
from typing import Any, Sequence

import tomli

from .report import ANALYSES, AnalysisError, RunConfig, run
from .simulate import simulate_panel

_BOOL_FLAGS = {
    "allow_igarch": "relax the GARCH persistence bound to 1.2",
    "robust_se": "QML sandwich standard errors",
    "bekk_diagonal": "restrict BEKK A and B to be diagonal",
    "bekk_targeting": "BEKK variance targeting",
    "bekk_force": "allow BEKK with more than six series",
    "parkinson_exact": "use 1/(4 ln 2) instead of 0.361",
    "per_window_lag": "re-select the VAR lag by AIC in each window",
    "full_precision": "also write full-precision CSV sidecars",
}

_VALUE_OPTS: dict[str, tuple[type, str]] = {
    "schema": (str, "auto | close | wide"),
    "output_dir": (str, "directory for tables, charts and manifest"),
    "min_rows": (int, "minimum aligned rows"),
    "adf_lags": (int, "fixed ADF lag order (default: BIC selection)"),
    "mean_lag": (int, "AR order of the GARCH mean equation"),
    "dcc_mode": (str, "joint | pairwise"),
    "workers": (int, "threads for independent fits / windows"),
    "bekk_restarts": (int, "BEKK starting points"),
    "significance": (float, "level for BEKK direction tests"),
    "range_constant": (float, "range-volatility constant"),
    "annualization_days": (int, "365 or 252"),
    "var_lag": (int, "VAR lag order (default 4)"),
    "max_lag": (int, "select VAR lag by AIC over 1..max_lag"),
    "horizon": (int, "forecast horizon H"),
    "gfevd_scaling": (str, "source | receiver"),
    "pairwise_sign": (str, "transmitted | printed"),
    "window": (int, "rolling window length"),
    "step": (int, "days between rolling windows"),
    "digits": (int, "significant digits in CSV output"),
    "seed": (int, "seed for restarts and simulation"),
}


def _add_run_options(p: argparse.ArgumentParser):
    p.add_argument("inputs", nargs="*", help="price CSV file(s)")
    for name, (typ, help_) in _VALUE_OPTS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None,
                       help=help_)
    for name, help_ in _BOOL_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, action="store_const",
                       const=True, default=None, help=help_)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="volspill", description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, default=None, help="TOML file with options")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*ANALYSES, "all"):
        _add_run_options(sub.add_parser(name, help=f"run the {name} analysis"))
    sim = sub.add_parser("simulate", help="write a seeded synthetic price panel")
    sim.add_argument("--model", choices=("garch", "dcc", "bekk", "var"), default=None)
    sim.add_argument("--params", default=None,
                     help="JSON object, or path to a .json/.toml parameter file")
    sim.add_argument("--n-obs", dest="n_obs", type=int, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--output", default=None, help="CSV path to write")
    sim.add_argument("--names", default=None, help="comma-separated series names")
    return parser


def _load_config(path: Path | None) -> dict[str, Any]:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomli.load(fh)


def _load_params(value) -> dict[str, Any]:
    if value is None:
        return {}
    if isinstance(value, dict):
        return value
    p = Path(value)
    if p.suffix in (".toml", ".json") and p.exists():
        with open(p, "rb") as fh:
            return tomli.load(fh) if p.suffix == ".toml" else json.load(fh)
    return json.loads(value)


def _merge(file_cfg: dict[str, Any], args: argparse.Namespace, keys) -> dict[str, Any]:
    merged = {k: v for k, v in file_cfg.items() if k in keys}
    for k in keys:
        v = getattr(args, k, None)
        if v is not None and v != []:
            merged[k] = v
    return merged


def _error(command: str, exc: BaseException) -> int:
    payload = {"command": command, "error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, AnalysisError):
        payload.update(analysis=exc.analysis, source=exc.source,
                       error=type(exc.cause).__name__)
    print("error: " + json.dumps(payload, sort_keys=True), file=sys.stderr)
    return 1


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_cfg = _load_config(args.config)
        if args.command == "simulate":
            sim_cfg = dict(file_cfg.get("simulate", {}))
            opts = _merge(sim_cfg, args, ("model", "params", "n_obs", "seed", "output", "names"))
            for required in ("model", "n_obs", "output"):
                if required not in opts:
                    raise ValueError(f"simulate needs --{required.replace('_', '-')}")
            names = opts.get("names")
            if isinstance(names, str):
                names = names.split(",")
            simulate_panel(opts["model"], _load_params(opts.get("params")), int(opts["n_obs"]),
                           int(opts.get("seed", 0)), opts["output"], names)
            print(opts["output"])
            return 0
        keys = [f.name for f in fields(RunConfig) if f.name != "analysis"]
        merged = _merge(file_cfg, args, keys)
        merged["analysis"] = args.command
        manifest = run(RunConfig.from_mapping(merged))
        for art in manifest["artifacts"]:
            print(Path(merged.get("output_dir", "out")) / art["file"])
        return 0
    except Exception as exc:  # noqa: BLE001 - reported as a machine-readable line
        return _error(args.command, exc)


if __name__ == "__main__":
    sys.exit(main())
