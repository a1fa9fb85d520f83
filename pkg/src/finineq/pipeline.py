"""Stage functions behind the command line.

Every stage reads a config dict (see :mod:`finineq.config`), writes its
artifacts into ``paths.out`` and refreshes ``manifest.json`` there.  Stages
exchange data only through files, so each can be rerun on its own.
"""

from __future__ import annotations

import copy
import glob
import json
import logging
import os
import tempfile
import time
from importlib import metadata
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from . import identification as ident
from . import inequality as ineq
from . import lp as lpmod
from . import psvar
from .config import config_hash
from .errors import ConfigError, DataError, FinIneqError, GapError, IdentificationError
from .panel import (DEFAULT_DONORS, LongPanel, PanelDataset, SeriesKey, align_balanced,
                    apply_donor_rules, format_period, load_panel, quarter, to_quarterly,
                    transform, write_long_csv)

logger = logging.getLogger(__name__)

INTERPS = ("linear", "flat")


def version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# -- files -----------------------------------------------------------------

def _out(cfg: dict) -> Path:
    out = Path(cfg["paths"]["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def update_manifest(cfg: dict, stage: str, seconds: float, diagnostics: dict | None = None) -> dict:
    """Merge one stage's record into ``manifest.json`` and rewrite it atomically."""
    path = _out(cfg) / "manifest.json"
    manifest = json.loads(path.read_text()) if path.exists() else {}
    manifest.update({
        "config_hash": config_hash(cfg),
        "seed": cfg["seed"],
        "version": version(),
        "config": cfg,
    })
    manifest.setdefault("stages", {})[stage] = {
        "seconds": round(seconds, 3),
        "diagnostics": diagnostics or {},
    }
    _atomic_write(path, _dump(manifest))
    return manifest


def _require(paths: Sequence[Path | str], what: str) -> None:
    missing = [str(p) for p in paths if p is None or not Path(p).exists()]
    if missing:
        raise DataError(f"{what}: missing files {missing}")


# -- macro panel ---------------------------------------------------------------

def _donor_rules(spec) -> dict:
    if spec in (None, "none", False):
        return {}
    if spec == "default":
        return dict(DEFAULT_DONORS)
    if not isinstance(spec, dict):
        raise ConfigError("donors must be 'default', 'none' or a mapping 'CC/variable' -> [donors]")
    rules = {}
    for key, donors in spec.items():
        try:
            country, variable = key.split("/")
        except ValueError:
            raise ConfigError(f"donor key {key!r} is not 'country/variable'") from None
        rules[(country, variable)] = tuple(donors)
    return rules


def _apply_transforms(panel: LongPanel, transforms: dict) -> LongPanel:
    """``{"var": "log_times_100"}`` or ``{"new": {"op": "ratio", "numerator": a, "denominator": b}}``."""
    out = panel.copy()
    for name, rule in transforms.items():
        if isinstance(rule, str):
            rule = {"op": rule, "numerator": name}
        op = rule.get("op", "identity")
        src = rule.get("numerator", name)
        for c in panel.countries:
            try:
                s = panel.get(c, src)
            except KeyError:
                continue
            den = panel.get(c, rule["denominator"]) if op == "ratio" else None
            out.put(c, name, transform(s, op, den, key=f"{c}/{name}"))
    return out


def _common_span(panel: LongPanel, countries, variables):
    starts, ends = [], []
    for key, s in panel.series.items():
        if key.country in countries and key.variable in variables:
            idx = s.dropna().index
            if len(idx):
                starts.append(idx.min())
                ends.append(idx.max())
    if not starts:
        raise DataError(f"no observations for variables {list(variables)}")
    return max(starts), min(ends)


def prepare_macro(cfg: dict, variables: Sequence[str]) -> PanelDataset:
    """Load, convert to quarterly, impute, transform and balance the macro panel.

    Variables keep the order given.  Without explicit sample dates the span
    is the window every included series covers.
    """
    path = cfg["paths"]["macro"]
    _require([path], "macro data")
    freq = cfg["frequency"]
    panel = load_panel(path)
    panel = to_quarterly(panel, freq["interpolation"], freq["anchor_quarter"])
    panel = apply_donor_rules(panel, _donor_rules(cfg["donors"]))
    panel = _apply_transforms(panel, cfg.get("transforms") or {})
    sample = cfg["sample"]
    excluded = set(sample.get("exclude_countries") or [])
    countries = [c for c in panel.countries if c not in excluded]
    absent = [v for v in variables if v not in panel.variables]
    if absent:
        raise DataError(f"{path}: variables {absent} not found (have {panel.variables})")
    lo, hi = _common_span(panel, countries, variables)
    start = quarter(sample["start"]) if sample.get("start") else lo
    end = quarter(sample["end"]) if sample.get("end") else hi
    dense = align_balanced(panel, start, end, countries, list(variables))
    return dense.select(variables=list(variables))


# -- measures --------------------------------------------------------------------

def _annual_to_long(frame: pd.DataFrame) -> LongPanel:
    lp = LongPanel()
    for (country, measure), g in frame.groupby(["country", "measure"], sort=True):
        idx = pd.PeriodIndex([pd.Period(year=int(y), freq="Y") for y in g["year"]])
        lp.series[SeriesKey(country, measure, "annual")] = pd.Series(
            g["value"].to_numpy(dtype=float), index=idx).sort_index()
    return lp


def cmd_measures(cfg: dict, interp: str | None = None) -> dict:
    """Country-year inequality measures plus their quarterly versions."""
    t0 = time.perf_counter()
    path = cfg["paths"]["microdata"]
    _require([path], "microdata")
    df = ineq.read_microdata(path)
    measures = tuple(cfg["measures"].get("list") or ineq.MEASURES)
    if any(m.startswith("skill_premium") for m in measures) and "skill_level" not in df.columns:
        raise ConfigError(f"{path}: skill premium requested but there is no skill_level column")
    frame = ineq.compute_measures(df, measures, cfg["measures"].get("skill_log", True))
    out = _out(cfg)
    ineq.write_measures_csv(frame, out / "measures_annual.csv")
    interp = interp or cfg["measures"].get("interp", "linear")
    methods = INTERPS if interp == "both" else (interp,)
    if any(m not in INTERPS for m in methods):
        raise ConfigError(f"interp must be linear, flat or both, got {interp!r}")
    annual = _annual_to_long(frame)
    files = []
    for m in methods:
        q = to_quarterly(annual, m, cfg["frequency"]["anchor_quarter"])
        name = f"measures_quarterly_{m}.csv"
        write_long_csv(q, out / name)
        files.append(name)
    diag = {"cells": int(frame.groupby(["country", "year"]).ngroups), "measures": list(measures),
            "files": ["measures_annual.csv"] + files}
    update_manifest(cfg, "measures", time.perf_counter() - t0, diag)
    return diag


# -- estimate ------------------------------------------------------------------------

def load_scheme(name: str) -> ident.RestrictionScheme:
    """Built-in scheme name, or a path to a JSON scheme description."""
    if name.endswith(".json"):
        path = Path(name)
        if not path.exists():
            raise ConfigError(f"scheme file {path} not found")
        return ident.RestrictionScheme.from_json(path.read_text())
    return ident.scheme(name)


def _recursive_names(ordering: Sequence[str]) -> tuple[str, ...]:
    *head, last = ordering
    return tuple(f"{v}_shock" for v in head) + ("financial",)


def cmd_estimate(cfg: dict) -> dict:
    """Posterior sampling, identification and shock extraction."""
    t0 = time.perf_counter()
    out = _out(cfg)
    icfg = cfg["identification"]
    method = icfg["method"]
    scheme_name = icfg["scheme"]
    if method == "sign":
        sch = load_scheme(scheme_name)
        variables = tuple(cfg["var"].get("variables") or sch.variables)
        if variables != sch.variables:
            raise ConfigError(f"VAR variables {variables} differ from scheme variables {sch.variables}")
    elif method == "recursive":
        variables = tuple(cfg["var"].get("variables") or ident.scheme("baseline").variables)
    else:
        raise ConfigError(f"identification method must be 'sign' or 'recursive', got {method!r}")

    panel = prepare_macro(cfg, variables)
    design = psvar.build_design(panel, psvar.VarSpec(variables, cfg["var"]["lags"]))
    prior = psvar.NwPrior.from_dict(cfg["prior"])
    post = psvar.nw_posterior(design, prior)
    g = cfg["gibbs"]
    gibbs_seed = g["seed"] if g.get("seed") is not None else [cfg["seed"], 1]
    t1 = time.perf_counter()
    draws = psvar.gibbs_sample(post, g["iterations"], g["burn_in"], seed=gibbs_seed)
    t_gibbs = time.perf_counter() - t1

    diag = {"method": method, "scheme": scheme_name if method == "sign" else None,
            "n_retained": len(draws), "n_obs": int(design.Y.shape[0]),
            "countries": list(panel.countries),
            "sample": [format_period(panel.quarters[0]), format_period(panel.quarters[-1])],
            "gibbs_seconds": round(t_gibbs, 3)}
    t1 = time.perf_counter()
    if method == "sign":
        try:
            res = ident.identify(draws, sch, icfg["max_attempts"], seed=[cfg["seed"], 2],
                                 threads=int(cfg.get("threads") or 1),
                                 search=icfg.get("search", "auto"))
        except IdentificationError as exc:
            diag["identification"] = exc.diagnostics
            diag["error"] = str(exc)
            _atomic_write(out / "diagnostics.json", _dump(diag))
            update_manifest(cfg, "estimate", time.perf_counter() - t0, diag)
            raise
        structural = res.draws
        diag["identification"] = res.diagnostics
        focus = icfg.get("shocks") or ident.FOCUS_SHOCKS.get(
            scheme_name, ("financial",) if "financial" in sch.shocks else sch.shocks[-1:])
    else:
        ordering = tuple(icfg.get("ordering") or variables)
        names = _recursive_names(ordering)
        structural = []
        for d in draws:
            sd = ident.cholesky_identify(d, variables, ordering)
            structural.append(ident.StructuralDraw(sd.parent, sd.Q, sd.A, names))
        diag["identification"] = {"ordering": list(ordering), "acceptance_rate": 1.0,
                                  "n_accepted": len(structural)}
        focus = icfg.get("shocks") or ("financial",)
    diag["identification_seconds"] = round(time.perf_counter() - t1, 3)

    residuals = [psvar.reduced_residuals(sd.parent, design) for sd in structural]
    files = []
    for name in focus:
        sp = ident.extract_shocks(structural, residuals, name, icfg.get("summary", "median"))
        fname = f"shocks_{name}.csv"
        ident.write_shocks_csv([sp], out / fname)
        files.append(fname)
    if icfg.get("save_draws"):
        psvar.write_draws_csv([sd.parent for sd in structural], out / "draws.csv")
        files.append("draws.csv")
    diag["files"] = files
    _atomic_write(out / "diagnostics.json", _dump(diag))
    update_manifest(cfg, "estimate", time.perf_counter() - t0, diag)
    return diag


# -- local projections ---------------------------------------------------------------

def _outcome_panel(cfg: dict, interp: str) -> LongPanel:
    out = Path(cfg["paths"]["out"])
    sources = [out / f"measures_quarterly_{interp}.csv"]
    if cfg["paths"].get("outcomes"):
        sources.append(Path(cfg["paths"]["outcomes"]))
    merged = LongPanel()
    found = False
    for src in sources:
        if src.exists():
            found = True
            merged.series.update(load_panel(src).series)
    if not found:
        raise DataError(f"no outcome files found; expected one of {[str(s) for s in sources]}")
    return merged


def _cover(panel: LongPanel, variable: str, countries, quarters, what: str) -> np.ndarray:
    idx = pd.PeriodIndex(list(quarters))
    arr = np.empty((len(countries), len(idx)))
    gaps = []
    for i, c in enumerate(countries):
        try:
            s = panel.get(c, variable)
        except KeyError:
            gaps.append(f"{c}/{variable}: absent")
            arr[i] = np.nan
            continue
        col = s.reindex(idx).to_numpy(dtype=float)
        gaps.extend(f"{c}/{variable}/{format_period(idx[t])}" for t in np.flatnonzero(~np.isfinite(col)))
        arr[i] = col
    if gaps:
        raise GapError(f"{what} does not cover the shock window: " + "; ".join(gaps[:20])
                       + (" ..." if len(gaps) > 20 else ""), gaps)
    return arr


def _uses_uncertainty(setting, shock: str) -> bool:
    if setting == "auto":
        return shock.startswith("financial")
    return bool(setting)


def cmd_lp(cfg: dict) -> dict:
    """Local projections of every configured outcome on every extracted shock."""
    t0 = time.perf_counter()
    out = _out(cfg)
    lcfg = cfg["lp"]
    shock_files = sorted(glob.glob(str(out / "shocks_*.csv")))
    wanted = lcfg.get("shocks")
    if wanted:
        shock_files = [str(out / f"shocks_{s}.csv") for s in wanted]
    if not shock_files:
        raise DataError(f"{out}: no shocks_*.csv files; run 'estimate' first")
    _require(shock_files, "shock panels")
    interps = INTERPS if lcfg.get("interp") == "both" else (lcfg.get("interp") or "linear",)

    manifest_path = out / "manifest.json"
    var_vars = cfg["var"].get("variables")
    if not var_vars and manifest_path.exists():
        est = json.loads(manifest_path.read_text()).get("config", {})
        var_vars = est.get("var", {}).get("variables")
    if not var_vars:
        if cfg["identification"]["method"] == "sign":
            var_vars = load_scheme(cfg["identification"]["scheme"]).variables
        else:
            var_vars = ident.scheme("baseline").variables
    controls = list(var_vars) + [c for c in lcfg.get("controls", []) if c not in var_vars]
    unc_names = list(lcfg.get("uncertainty", []))
    shocks = [ident.read_shocks_csv(f) for f in shock_files]
    any_unc = any(_uses_uncertainty(lcfg["include_uncertainty"], s.shock) for s in shocks)
    macro = _macro_long(cfg, controls + (unc_names if any_unc else []))

    written = []
    for interp in interps:
        outcomes = _outcome_panel(cfg, interp)
        for sp in shocks:
            use_unc = _uses_uncertainty(lcfg["include_uncertainty"], sp.shock)
            X = np.stack([_cover(macro, v, sp.countries, sp.quarters, "macro panel")
                          for v in controls], axis=2)
            U = (np.stack([_cover(macro, v, sp.countries, sp.quarters, "macro panel")
                           for v in unc_names], axis=2) if use_unc and unc_names else None)
            for outcome in lcfg["outcomes"]:
                y = _cover(outcomes, outcome, sp.countries, sp.quarters, f"outcome {outcome!r}")
                data = lpmod.LpData(y, sp.values, X, U, tuple(controls),
                                    tuple(unc_names) if U is not None else (),
                                    tuple(sp.countries), tuple(sp.quarters))
                spec = lpmod.LpSpec(outcome, sp.shock, lcfg["horizons"], lcfg["lags"],
                                    lcfg["hac_rule"], use_unc, fixed_window=lcfg["fixed_window"])
                suffix = "" if interp == "linear" else f"_{interp}"
                if lcfg.get("signed"):
                    signed = lpmod.lp_irf_signed(data, spec)
                    irfs = [(signed.positive, "pos"), (signed.negative, "neg")]
                else:
                    irfs = [(lpmod.lp_irf(data, spec), "linear")]
                for irf, kind in irfs:
                    written.extend(_emit_irf(out, irf, kind + suffix, lcfg.get("svg", True)))
    diag = {"files": written, "hac_rule": lcfg["hac_rule"], "interp": list(interps)}
    update_manifest(cfg, "lp", time.perf_counter() - t0, diag)
    return diag


def _macro_long(cfg: dict, variables: Sequence[str]) -> LongPanel:
    """Macro series as a long panel, without forcing a balanced span."""
    path = cfg["paths"]["macro"]
    _require([path], "macro data")
    panel = load_panel(path)
    panel = to_quarterly(panel, cfg["frequency"]["interpolation"], cfg["frequency"]["anchor_quarter"])
    panel = apply_donor_rules(panel, _donor_rules(cfg["donors"]))
    panel = _apply_transforms(panel, cfg.get("transforms") or {})
    absent = [v for v in variables if v not in panel.variables]
    if absent:
        raise DataError(f"{path}: variables {absent} not found")
    return panel


def _emit_irf(out: Path, irf: lpmod.IrfResult, variant: str, svg: bool) -> list[str]:
    from .plots import irf_svg
    stem = f"{irf.outcome}__{irf.shock}__{variant}"
    names = [f"irf_{stem}.csv", f"plot_{stem}.csv"]
    lpmod.write_irf_csv(irf, out / names[0])
    lpmod.write_plot_data(irf, out / names[1])
    if svg:
        names.append(f"plot_{stem}.svg")
        (out / names[2]).write_text(irf_svg(irf, title=f"{irf.outcome} / {irf.shock} ({variant})"))
    return names


# -- report ------------------------------------------------------------------------------

def peak(beta: np.ndarray) -> tuple[int, float, str]:
    """Horizon, value and sign of the largest absolute response (first on ties)."""
    beta = np.asarray(beta, dtype=float)
    h = int(np.argmax(np.abs(beta)))
    v = float(beta[h])
    return h, v, "+" if v > 0 else "-" if v < 0 else "0"


def linear_trend(x, y) -> tuple[float, float]:
    """OLS slope and intercept of ``y`` on ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise DataError("need at least two points for a trend line")
    xc = x - x.mean()
    sxx = xc @ xc
    if sxx == 0:
        raise DataError("x has no variation; trend slope undefined")
    slope = (xc @ (y - y.mean())) / sxx
    return float(slope), float(y.mean() - slope * x.mean())


REPORT_EXPECTED = ("manifest.json", "shocks_*.csv", "irf_*.csv")


def cmd_report(run_dir, cfg: dict | None = None) -> dict:
    """Peak summary over every IRF file and the share-price/Gini scatter."""
    t0 = time.perf_counter()
    run = Path(run_dir)
    missing = [pat for pat in REPORT_EXPECTED if not glob.glob(str(run / pat))]
    if missing:
        raise DataError(f"{run}: missing run artifacts {list(missing)}")
    manifest = json.loads((run / "manifest.json").read_text())
    cfg = copy.deepcopy(cfg or manifest.get("config"))
    if cfg:
        cfg["paths"]["out"] = str(run)
    rows = []
    for f in sorted(glob.glob(str(run / "irf_*.csv"))):
        df = pd.read_csv(f, float_precision="round_trip")
        h, v, sign = peak(df["beta"].to_numpy())
        se = float(df["se"].iloc[h])
        stem = Path(f).stem[len("irf_"):]
        variant = stem.split("__")[-1]
        rows.append({"file": Path(f).name, "outcome": df["outcome"].iloc[0],
                     "shock": df["shock"].iloc[0], "variant": variant, "peak_horizon": h,
                     "peak_beta": v, "peak_se": se, "sign": sign})
    summary = pd.DataFrame(rows)
    summary.to_csv(run / "summary.csv", index=False, float_format="%.17g")
    lines = ["Peak responses", ""]
    for r in rows:
        lines.append(f"{r['outcome']:<16} {r['shock']:<20} {r['variant']:<12} "
                     f"h={r['peak_horizon']:>2}  beta={r['peak_beta']:+.4f}  (se {r['peak_se']:.4f})")
    diag = {"irf_files": len(rows)}
    if cfg:
        try:
            diag["trend"] = _scatter(run, cfg)
            lines += ["", f"Trend of {cfg['report']['scatter_y']} on {cfg['report']['scatter_x']}: "
                      f"slope {diag['trend']['slope']:.6g}, intercept {diag['trend']['intercept']:.6g}"]
        except (FinIneqError, KeyError) as exc:
            lines += ["", f"Scatter skipped: {exc}"]
            diag["scatter_skipped"] = str(exc)
    (run / "summary.txt").write_text("\n".join(lines) + "\n")
    update_manifest(cfg or {"paths": {"out": str(run)}, "seed": manifest.get("seed")},
                    "report", time.perf_counter() - t0, diag)
    return diag


def _scatter(run: Path, cfg: dict) -> dict:
    xname, yname = cfg["report"]["scatter_x"], cfg["report"]["scatter_y"]
    macro = _macro_long(cfg, [xname])
    interp = cfg["lp"].get("interp") or "linear"
    ys = _outcome_panel(cfg, "linear" if interp == "both" else interp)
    rows = []
    for c in sorted(set(macro.countries) & set(ys.countries)):
        try:
            x = macro.get(c, xname)
            y = ys.get(c, yname)
        except KeyError:
            continue
        x, y = x.align(y, join="inner")
        ok = np.isfinite(x.to_numpy()) & np.isfinite(y.to_numpy())
        for q, xv, yv in zip(x.index[ok], x.to_numpy()[ok], y.to_numpy()[ok]):
            rows.append((c, format_period(q), float(xv), float(yv)))
    if not rows:
        raise DataError(f"no overlapping observations of {xname} and {yname}")
    frame = pd.DataFrame(rows, columns=["country", "date", xname, yname])
    frame.to_csv(run / "scatter.csv", index=False, float_format="%.17g")
    slope, intercept = linear_trend(frame[xname], frame[yname])
    trend = {"x": xname, "y": yname, "slope": slope, "intercept": intercept, "n": len(frame)}
    pd.DataFrame([trend]).to_csv(run / "trend.csv", index=False, float_format="%.17g")
    return trend


# -- simulate --------------------------------------------------------------------------

def cmd_simulate(cfg: dict) -> dict:
    """Synthetic fixture: macro panel, microdata, true shocks and a runnable config.

    The macro block follows a pooled VAR whose impact matrix satisfies the
    configured sign scheme.  A synthetic Gini responds to the true focus
    shock with a known hump-shaped profile.
    """
    from .synthetic import (AsymmetricOutcomeSpec, DgpSpec, exogenous_ar1_panel,
                            make_sign_separated_impact, random_lag_matrices, simulate_microdata,
                            simulate_outcome, simulate_var_panel)
    t0 = time.perf_counter()
    out = _out(cfg)
    sim = cfg["simulate"]
    root = np.random.SeedSequence(cfg["seed"])
    s_impact, s_lags, s_var, s_ctrl, s_out, s_micro = (int(c.generate_state(1)[0])
                                                        for c in root.spawn(6))
    sch = ident.scheme(sim["scheme"])
    focus = ident.FOCUS_SHOCKS.get(sim["scheme"], ("financial",))
    lags = cfg["var"]["lags"]
    N, T = int(sim["countries"]), int(sim["T"])
    impact = make_sign_separated_impact(sch, 0.2, s_impact,
                                        column_scale={f: sim["financial_scale"] for f in focus})
    rng = np.random.default_rng(s_lags)
    mats = random_lag_matrices(sch.K, lags, rng, sim["radius"])
    intercepts = rng.normal(0.0, 1.0, (N, sch.K))
    dgp = DgpSpec(mats, impact, N, T, intercepts, s_var, sch.variables, sch.shocks,
                  start=sim["start"])
    simd = simulate_var_panel(dgp)
    panel = simd.panel
    long = panel.to_long()
    extra = {
        "financial_deepening": exogenous_ar1_panel(N, T, 0.9, 1.0, s_ctrl, 100.0),
        "wui": exogenous_ar1_panel(N, T, 0.7, 0.05, s_ctrl + 1, 0.2),
        "clifs": exogenous_ar1_panel(N, T, 0.8, 0.05, s_ctrl + 2, 0.15),
    }
    idx = pd.PeriodIndex(panel.quarters)
    for name, arr in extra.items():
        for i, c in enumerate(panel.countries):
            long.put(c, name, pd.Series(arr[i], index=idx))
    write_long_csv(long, out / "macro.csv")

    # true shocks on the post-lag window, the span an estimated panel covers
    true = [simd.shock_panel(f, drop=lags) for f in focus]
    ident.write_shocks_csv(true, out / "true_shocks.csv")
    H = cfg["lp"]["horizons"]
    theta = 0.15 * np.arange(H + 1) * np.exp(-np.arange(H + 1) / 4.0) / (4.0 * np.exp(-1.0))
    outcome_spec = AsymmetricOutcomeSpec(theta, theta, 0.05)
    eps = simd.shocks[:, :, sch.shock_index(focus[0])]
    gsyn = 30.0 + simulate_outcome(eps, outcome_spec, H, s_out)
    olong = LongPanel()
    for i, c in enumerate(panel.countries):
        olong.put(c, "gini_synthetic", pd.Series(gsyn[i], index=idx))
    write_long_csv(olong, out / "outcome_synthetic.csv")
    pd.DataFrame({"horizon": np.arange(H + 1), "theta": theta}).to_csv(
        out / "outcome_loadings.csv", index=False, float_format="%.17g")

    years = sorted({q.year for q in panel.quarters})
    micro = simulate_microdata(int(sim["households"]), seed=s_micro,
                               countries=panel.countries, years=years)
    ineq.write_microdata(micro, out / "microdata.csv")

    fixture = {
        "paths": {"macro": "macro.csv", "microdata": "microdata.csv",
                  "outcomes": "outcome_synthetic.csv", "out": "run"},
        "seed": cfg["seed"],
        "identification": {"scheme": sim["scheme"]},
        "lp": {"outcomes": ["gini_synthetic", "gini_total"], "horizons": H},
    }
    (out / "config.json").write_text(_dump(fixture))
    diag = {"spectral_radius": dgp.spectral_radius(), "impact": impact, "countries": list(panel.countries),
            "files": ["macro.csv", "microdata.csv", "true_shocks.csv", "outcome_synthetic.csv",
                      "outcome_loadings.csv", "config.json"]}
    update_manifest(cfg, "simulate", time.perf_counter() - t0, diag)
    return diag
