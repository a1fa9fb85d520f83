"""Run configuration: JSON file, defaults, and CLI overrides."""

from __future__ import annotations

import copy
import hashlib
import json
import os
from pathlib import Path

from .errors import ConfigError

DEFAULTS: dict = {
    "paths": {
        "macro": "macro.csv",
        "microdata": "microdata.csv",
        "outcomes": None,
        "out": "run",
    },
    "seed": 0,
    "threads": 1,
    "sample": {"start": None, "end": None, "exclude_countries": []},
    "frequency": {"interpolation": "linear", "anchor_quarter": 4},
    "transforms": {},
    "donors": "default",
    "var": {"lags": 4, "variables": None},
    "prior": {"ar_coefficient": 0.8, "lambda1": 0.1, "lambda3": 1.0, "lambda4": 100.0,
              "dof_shift": 2},
    "gibbs": {"iterations": 2000, "burn_in": 1000, "seed": None},
    "identification": {"method": "sign", "scheme": "baseline", "max_attempts": 1000,
                       "summary": "median", "ordering": None, "shocks": None,
                       "save_draws": False, "search": "auto"},
    "measures": {"list": None, "interp": "linear", "skill_log": True},
    "lp": {"horizons": 20, "lags": 4, "hac_rule": "h_plus_1", "include_uncertainty": "auto",
           "signed": False, "fixed_window": False, "outcomes": ["gini_total"], "shocks": None,
           "controls": ["financial_deepening"], "uncertainty": ["wui", "clifs"],
           "interp": "linear", "svg": True},
    "report": {"scatter_x": "stock_prices", "scatter_y": "gini_total"},
    "simulate": {"countries": 4, "T": 72, "start": "2006-Q1", "households": 150,
                 "scheme": "baseline", "radius": 0.6, "financial_scale": 2.0},
}


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path: str | os.PathLike | None = None, overrides: dict | None = None) -> dict:
    """Defaults <- JSON file <- overrides.  Relative paths resolve against the file."""
    cfg = copy.deepcopy(DEFAULTS)
    base_dir = Path.cwd()
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} not found")
        try:
            user = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON ({exc})") from None
        unknown = set(user) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"{p}: unknown config sections {sorted(unknown)}")
        cfg = deep_merge(cfg, user)
        base_dir = p.resolve().parent
    cfg = deep_merge(cfg, overrides or {})
    for key, val in cfg["paths"].items():
        if val is not None and not os.path.isabs(val):
            cfg["paths"][key] = str(base_dir / val)
    return cfg


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON form; output dir excluded so reruns elsewhere match."""
    clean = copy.deepcopy(cfg)
    clean.get("paths", {}).pop("out", None)
    clean["paths"] = {k: (os.path.basename(v) if v else v) for k, v in clean.get("paths", {}).items()}
    blob = json.dumps(clean, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def dotted(cfg: dict, key: str):
    """Look up ``"lp.horizons"`` style keys."""
    node = cfg
    for part in key.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"missing config key {key!r}")
        node = node[part]
    return node
