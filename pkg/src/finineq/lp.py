"""Panel local projections with Driscoll-Kraay inference.

For each horizon ``h`` the outcome at ``t + h`` is regressed on the shock
at ``t`` plus lags of controls, after a two-way within transformation.  The
shock is only demeaned across countries at each date; outcome and controls
are double demeaned over the estimation window.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg
from scipy.stats import norm

from .errors import (
    ConfigError,
    DegenerateRegressorError,
    EstimationError,
    InsufficientDataError,
    RankDeficiencyError,
)

Z68 = float(norm.ppf(0.84))
Z90 = float(norm.ppf(0.95))

HAC_RULES = ("h_plus_1", "p_plus_1", "p_plus_h_plus_1")


def double_demean(x: np.ndarray) -> np.ndarray:
    """``x_it + mean(x) - mean_i(x) - mean_t(x)`` on an ``N x T`` array."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or not np.all(np.isfinite(x)):
        raise ValueError("double_demean needs a balanced N x T array")
    return x + x.mean() - x.mean(axis=1, keepdims=True) - x.mean(axis=0, keepdims=True)


def demean_shock(x: np.ndarray) -> np.ndarray:
    """Subtract the cross-sectional mean at each date."""
    x = np.asarray(x, dtype=float)
    return x - x.mean(axis=0, keepdims=True)


def unit_demean(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x - x.mean(axis=1, keepdims=True)


@dataclass(frozen=True)
class LpSpec:
    outcome: str = "outcome"
    shock: str = "shock"
    horizons: int = 20
    lags: int = 4
    hac_rule: str = "h_plus_1"
    include_uncertainty: bool = True
    lag_outcome: bool = True
    lag_shock: bool = True
    fixed_window: bool = False
    effects: str = "two_way"

    def __post_init__(self):
        if self.horizons < 0 or self.lags < 1:
            raise ConfigError("need horizons >= 0 and lags >= 1")
        if self.hac_rule not in HAC_RULES:
            raise ConfigError(f"hac_rule must be one of {HAC_RULES}")
        if self.effects not in ("two_way", "unit"):
            raise ConfigError("effects must be 'two_way' or 'unit'")

    def bandwidth(self, h: int) -> int:
        return {"h_plus_1": h + 1, "p_plus_1": self.lags + 1,
                "p_plus_h_plus_1": self.lags + h + 1}[self.hac_rule]


@dataclass
class LpData:
    """Aligned ``N x T`` arrays over a common window."""

    outcome: np.ndarray
    shock: np.ndarray
    controls: np.ndarray | None = None      # (N, T, kx), lags 1..p
    uncertainty: np.ndarray | None = None   # (N, T, ku), lags 0..p
    control_names: tuple[str, ...] = ()
    uncertainty_names: tuple[str, ...] = ()
    countries: tuple[str, ...] = ()
    quarters: tuple = ()

    def __post_init__(self):
        self.outcome = np.asarray(self.outcome, dtype=float)
        self.shock = np.asarray(self.shock, dtype=float)
        N, T = self.outcome.shape
        if self.shock.shape != (N, T):
            raise ValueError(f"shock shape {self.shock.shape} != outcome shape {(N, T)}")
        for name in ("controls", "uncertainty"):
            arr = getattr(self, name)
            arr = np.zeros((N, T, 0)) if arr is None else np.asarray(arr, dtype=float)
            if arr.ndim == 2:
                arr = arr[:, :, None]
            if arr.shape[:2] != (N, T):
                raise ValueError(f"{name} shape {arr.shape} incompatible with {(N, T)}")
            setattr(self, name, arr)
        if not self.control_names:
            self.control_names = tuple(f"x{k}" for k in range(self.controls.shape[2]))
        if not self.uncertainty_names:
            self.uncertainty_names = tuple(f"u{k}" for k in range(self.uncertainty.shape[2]))
        arrays = (self.outcome, self.shock, self.controls, self.uncertainty)
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ValueError("LpData must be balanced (no missing values)")

    @property
    def shape(self):
        return self.outcome.shape


@dataclass
class LpDesign:
    y: np.ndarray
    X: np.ndarray
    names: list[str]
    time_ids: np.ndarray
    unit_ids: np.ndarray
    n_shock: int
    window: tuple[int, int]


def _window(T: int, p: int, h: int, spec: LpSpec) -> tuple[int, int]:
    last = T - 1 - (spec.horizons if spec.fixed_window else h)
    if last < p:
        raise InsufficientDataError(f"horizon {h}: no admissible dates (T={T}, p={p})")
    return p, last


def build_lp_design(data: LpData, spec: LpSpec, h: int, shock_terms: Sequence[np.ndarray] | None = None,
                    shock_names: Sequence[str] | None = None) -> LpDesign:
    """Regression arrays for horizon ``h`` pooled over countries and admissible dates.

    Admissible dates run from ``p`` to ``T - 1 - h``.  ``shock_terms``
    replaces the single shock regressor (used by the sign-split variant);
    lags of the raw shock are still used as controls.
    """
    N, T = data.shape
    p = spec.lags
    t0, t1 = _window(T, p, h, spec)
    ts = np.arange(t0, t1 + 1)
    if spec.effects == "two_way":
        fy, fe = double_demean, demean_shock
    else:
        fy, fe = unit_demean, unit_demean
    if N == 1 and spec.effects == "two_way":
        raise InsufficientDataError("two-way effects absorb everything with a single country")
    terms = [data.shock] if shock_terms is None else list(shock_terms)
    tnames = [spec.shock] if shock_names is None else list(shock_names)
    cols, names = [], []
    for term, name in zip(terms, tnames):
        cols.append(fe(term[:, ts]))
        names.append(name)
    lagged = []
    if spec.lag_outcome:
        lagged.append((spec.outcome, data.outcome))
    if spec.lag_shock:
        lagged.append((spec.shock, data.shock))
    lagged += [(n, data.controls[:, :, k]) for k, n in enumerate(data.control_names)]
    for name, arr in lagged:
        for l in range(1, p + 1):
            cols.append(fy(arr[:, ts - l]))
            names.append(f"{name}_l{l}")
    if spec.include_uncertainty:
        for k, name in enumerate(data.uncertainty_names):
            for l in range(0, p + 1):
                cols.append(fy(data.uncertainty[:, ts - l, k]))
                names.append(f"{name}_l{l}")
    y = fy(data.outcome[:, ts + h]).ravel()
    X = np.column_stack([c.ravel() for c in cols])
    time_ids = np.tile(ts, N)
    unit_ids = np.repeat(np.arange(N), len(ts))
    return LpDesign(y, X, names, time_ids, unit_ids, len(terms), (t0, t1))


@dataclass
class OlsResult:
    coef: np.ndarray
    resid: np.ndarray
    bread: np.ndarray  # (X'X)^{-1}, built from the R factor


def ols(y: np.ndarray, X: np.ndarray, names: Sequence[str] | None = None, rtol: float = 1e-10) -> OlsResult:
    """Least squares through a column-pivoted QR factorization."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    if n < k:
        raise RankDeficiencyError(f"{n} observations for {k} regressors")
    Q, R, piv = linalg.qr(X, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    tol = rtol * d[0] * max(n, k) if k else 0.0
    rank = int(np.sum(d > tol))
    if rank < k:
        bad = sorted(piv[rank:])
        labels = [names[i] if names is not None else str(i) for i in bad]
        raise RankDeficiencyError(f"regressors collinear: {labels}", labels)
    coef_p = linalg.solve_triangular(R, Q.T @ y)
    coef = np.empty(k)
    coef[piv] = coef_p
    resid = y - X @ coef
    Rinv = linalg.solve_triangular(R, np.eye(k))
    bread_p = Rinv @ Rinv.T
    bread = np.empty_like(bread_p)
    bread[np.ix_(piv, piv)] = bread_p
    return OlsResult(coef, resid, bread)


def dk_cov(X: np.ndarray, resid: np.ndarray, time_ids: np.ndarray, m: int,
           bread: np.ndarray | None = None, small_sample: bool = True) -> np.ndarray:
    """Driscoll-Kraay covariance of OLS coefficients.

    Moment vectors ``x_it u_it`` are summed over countries at each date, a
    Bartlett-weighted long-run covariance with bandwidth ``m`` is taken over
    dates, and the result is sandwiched with ``(X'X)^{-1}``.  With
    ``small_sample`` the meat is scaled by ``T / (T - k)``.
    """
    if m < 0:
        raise ValueError("bandwidth must be >= 0")
    X = np.asarray(X, dtype=float)
    u = np.asarray(resid, dtype=float)
    dates, inv = np.unique(time_ids, return_inverse=True)
    T_dates = len(dates)
    if T_dates < 2:
        raise InsufficientDataError("Driscoll-Kraay needs at least two dates")
    k = X.shape[1]
    g = np.zeros((T_dates, k))
    np.add.at(g, inv, X * u[:, None])
    S = g.T @ g
    for j in range(1, min(m, T_dates - 1) + 1):
        w = 1.0 - j / (m + 1.0)
        G = g[j:].T @ g[:-j]
        S += w * (G + G.T)
    if small_sample:
        if T_dates <= k:
            raise InsufficientDataError(f"{T_dates} dates for {k} regressors")
        S *= T_dates / (T_dates - k)
    if bread is None:
        bread = ols(np.zeros(X.shape[0]), X).bread
    V = bread @ S @ bread
    return 0.5 * (V + V.T)


@dataclass
class IrfResult:
    outcome: str
    shock: str
    beta: np.ndarray
    se: np.ndarray
    n_obs: np.ndarray
    hac_m: np.ndarray
    variant: str = "linear"
    meta: dict = field(default_factory=dict)

    @property
    def horizons(self) -> np.ndarray:
        return np.arange(len(self.beta))

    @property
    def lo68(self):
        return self.beta - Z68 * self.se

    @property
    def hi68(self):
        return self.beta + Z68 * self.se

    @property
    def lo90(self):
        return self.beta - Z90 * self.se

    @property
    def hi90(self):
        return self.beta + Z90 * self.se

    def rows(self):
        for h in range(len(self.beta)):
            yield {
                "outcome": self.outcome, "shock": self.shock, "horizon": h,
                "beta": self.beta[h], "se": self.se[h],
                "lo68": self.lo68[h], "hi68": self.hi68[h],
                "lo90": self.lo90[h], "hi90": self.hi90[h],
                "n_obs": int(self.n_obs[h]), "hac_m": int(self.hac_m[h]),
            }


IRF_COLUMNS = ["outcome", "shock", "horizon", "beta", "se", "lo68", "hi68", "lo90", "hi90",
               "n_obs", "hac_m"]


def write_irf_csv(irf: IrfResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(IRF_COLUMNS)
        for r in irf.rows():
            w.writerow([repr(float(r[c])) if isinstance(r[c], float) or isinstance(r[c], np.floating)
                        else r[c] for c in IRF_COLUMNS])


def write_plot_data(irf: IrfResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["horizon", "estimate", "lo68", "hi68", "lo90", "hi90"])
        for h in range(len(irf.beta)):
            w.writerow([h] + [repr(float(v[h])) for v in
                              (irf.beta, irf.lo68, irf.hi68, irf.lo90, irf.hi90)])


def read_irf_csv(path) -> IrfResult:
    import pandas as pd
    df = pd.read_csv(path, float_precision="round_trip").sort_values("horizon")
    return IrfResult(str(df["outcome"].iloc[0]), str(df["shock"].iloc[0]),
                     df["beta"].to_numpy(), df["se"].to_numpy(), df["n_obs"].to_numpy(),
                     df["hac_m"].to_numpy())


def _fit(design: LpDesign, m: int):
    res = ols(design.y, design.X, design.names)
    V = dk_cov(design.X, res.resid, design.time_ids, m, res.bread)
    return res, V


def lp_irf(data: LpData, spec: LpSpec) -> IrfResult:
    """Horizon-by-horizon local projection of the outcome on the shock."""
    beta, se, nobs, ms = [], [], [], []
    for h in range(spec.horizons + 1):
        m = spec.bandwidth(h)
        try:
            design = build_lp_design(data, spec, h)
            res, V = _fit(design, m)
        except EstimationError as exc:
            raise type(exc)(f"horizon {h}: {exc}") from None
        except InsufficientDataError as exc:
            raise InsufficientDataError(f"horizon {h}: {exc}") from None
        beta.append(res.coef[0])
        se.append(np.sqrt(max(V[0, 0], 0.0)))
        nobs.append(len(design.y))
        ms.append(m)
    return IrfResult(spec.outcome, spec.shock, np.array(beta), np.array(se), np.array(nobs),
                     np.array(ms), "linear", {"dk_scaling": "T/(T-k)", "effects": spec.effects})


@dataclass
class SignedIrf:
    positive: IrfResult
    negative: IrfResult
    cov_pn: np.ndarray  # covariance of (beta+, beta-) per horizon

    def diff_se(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.positive.se ** 2 + self.negative.se ** 2 - 2 * self.cov_pn, 0))


def lp_irf_signed(data: LpData, spec: LpSpec) -> SignedIrf:
    """One regression per horizon on ``max(0, e)`` and ``min(0, e)``."""
    pos = np.maximum(data.shock, 0.0)
    neg = np.minimum(data.shock, 0.0)
    p = spec.lags
    window = data.shock[:, p:]
    if not (np.any(window > 0) and np.any(window < 0)):
        raise DegenerateRegressorError("shock series is one-signed; cannot split by sign")
    names = [f"{spec.shock}_pos", f"{spec.shock}_neg"]
    out = {"pos": ([], []), "neg": ([], [])}
    cov, nobs, ms = [], [], []
    for h in range(spec.horizons + 1):
        m = spec.bandwidth(h)
        try:
            design = build_lp_design(data, spec, h, [pos, neg], names)
            res, V = _fit(design, m)
        except EstimationError as exc:
            raise type(exc)(f"horizon {h}: {exc}") from None
        for j, key in enumerate(("pos", "neg")):
            out[key][0].append(res.coef[j])
            out[key][1].append(np.sqrt(max(V[j, j], 0.0)))
        cov.append(V[0, 1])
        nobs.append(len(design.y))
        ms.append(m)
    mk = lambda key, shock: IrfResult(spec.outcome, shock, np.array(out[key][0]),
                                       np.array(out[key][1]), np.array(nobs), np.array(ms),
                                       key, {"dk_scaling": "T/(T-k)"})
    return SignedIrf(mk("pos", names[0]), mk("neg", names[1]), np.array(cov))
