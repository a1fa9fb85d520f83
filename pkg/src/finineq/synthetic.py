"""Ground-truth generators for every estimator in the package.

All generators take a seed and split it into independent
:class:`numpy.random.SeedSequence` substreams (one per country, or per
country-year for microdata), so outputs are reproducible and do not depend
on loop order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError, EstimationError
from .identification import RestrictionScheme, ShockPanel, satisfies
from .panel import EURO_AREA_16, PanelDataset, quarter_range
from .psvar import companion_matrix

BURN_IN = 200
RADIUS_CAP = 0.9


@dataclass
class DgpSpec:
    lag_matrices: list[np.ndarray]
    impact: np.ndarray
    N: int = 16
    T: int = 72
    intercepts: np.ndarray | None = None  # (N, K)
    seed: int | None = None
    variables: tuple[str, ...] = ()
    shocks: tuple[str, ...] = ()
    countries: tuple[str, ...] = ()
    start: str = "2006-Q1"

    @property
    def K(self) -> int:
        return self.impact.shape[0]

    @property
    def p(self) -> int:
        return len(self.lag_matrices)

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(self.lag_matrices)))))

    def validate(self) -> None:
        r = self.spectral_radius()
        if r > RADIUS_CAP:
            raise ConfigError(f"companion spectral radius {r:.3f} exceeds cap {RADIUS_CAP}")
        if abs(np.linalg.det(self.impact)) < 1e-10:
            raise ConfigError("impact matrix is singular")


def random_lag_matrices(K: int, p: int, rng: np.random.Generator, radius: float = 0.6) -> list[np.ndarray]:
    """Random VAR(p) lag matrices rescaled to an exact companion spectral radius.

    Multiplying ``B_l`` by ``s**l`` scales every companion eigenvalue by ``s``.
    """
    mats = [0.5 ** l * (0.4 * np.eye(K) + 0.15 * rng.standard_normal((K, K))) for l in range(p)]
    r = np.max(np.abs(np.linalg.eigvals(companion_matrix(mats))))
    s = radius / r
    return [m * s ** (l + 1) for l, m in enumerate(mats)]


@dataclass
class SimulatedPanel:
    panel: PanelDataset
    shocks: np.ndarray  # (N, T, K) true structural shocks
    shock_names: tuple[str, ...]
    spec: DgpSpec

    def shock_panel(self, name: str, drop: int = 0) -> ShockPanel:
        j = self.shock_names.index(name)
        return ShockPanel(name, self.shocks[:, drop:, j], self.panel.countries,
                          self.panel.quarters[drop:], False)


def simulate_var_panel(spec: DgpSpec) -> SimulatedPanel:
    """``y_t = c_i + sum_l B_l y_{t-l} + A eps_t`` per country, burn-in discarded."""
    spec.validate()
    K, p, N, T = spec.K, spec.p, spec.N, spec.T
    c = np.zeros((N, K)) if spec.intercepts is None else np.asarray(spec.intercepts, dtype=float)
    streams = np.random.SeedSequence(spec.seed).spawn(N)
    total = T + BURN_IN
    Bcat = np.hstack(spec.lag_matrices)  # (K, K*p)
    y = np.zeros((N, total + p, K))
    eps = np.empty((N, total, K))
    for i, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        e = rng.standard_normal((total, K))
        eps[i] = e
        shocks = e @ spec.impact.T
        yi = y[i]
        for t in range(total):
            yi[t + p] = c[i] + Bcat @ yi[t:t + p][::-1].reshape(-1) + shocks[t]
    values = y[:, p + BURN_IN:, :]
    if spec.countries:
        countries = tuple(spec.countries)
    elif N <= len(EURO_AREA_16):
        countries = EURO_AREA_16[:N]
    else:
        countries = tuple(f"C{i:02d}" for i in range(N))
    variables = spec.variables or tuple(f"y{k}" for k in range(K))
    shocks = spec.shocks or tuple(f"e{k}" for k in range(K))
    idx = quarter_range(spec.start, pd.Period(spec.start.replace("-", ""), freq="Q") + (T - 1))
    panel = PanelDataset(tuple(countries), tuple(idx), tuple(variables), values.copy())
    return SimulatedPanel(panel, eps[:, BURN_IN:, :], tuple(shocks), spec)


def make_sign_separated_impact(scheme: RestrictionScheme, delta: float = 0.2, seed=None,
                               max_attempts: int = 10_000, unrestricted_scale: float = 0.3,
                               column_scale: Mapping[str, float] | None = None) -> np.ndarray:
    """Impact matrix that satisfies ``scheme`` with every restricted cell at least ``delta``.

    Restricted cells get ``sign * U(delta, 1)``; free cells ``N(0, unrestricted_scale**2)``.
    ``column_scale`` multiplies the named shock columns afterwards, making
    those shocks dominant sources of variance.  Draws are rejected until
    ``|det| > 1e-6`` and the margin holds after scaling.
    """
    rng = np.random.default_rng(seed)
    signs = scheme.signs
    mask = signs != 0
    K = scheme.K
    scale = np.ones(K)
    for name, f in (column_scale or {}).items():
        scale[scheme.shock_index(name)] = f
    for _ in range(max_attempts):
        A = np.where(mask, signs * rng.uniform(delta, 1.0, (K, K)),
                     unrestricted_scale * rng.standard_normal((K, K))) * scale
        if (abs(np.linalg.det(A)) > 1e-6 and satisfies(A, scheme)
                and np.all(np.abs(A[mask]) >= delta)):
            return A
    raise EstimationError(f"no admissible impact matrix after {max_attempts} attempts")


@dataclass
class AsymmetricOutcomeSpec:
    theta_pos: np.ndarray
    theta_neg: np.ndarray
    noise_scale: float = 0.1

    def __post_init__(self):
        self.theta_pos = np.asarray(self.theta_pos, dtype=float)
        self.theta_neg = np.asarray(self.theta_neg, dtype=float)
        if self.theta_pos.shape != self.theta_neg.shape:
            raise ValueError("loadings must have equal length")
        if not (np.all(np.isfinite(self.theta_pos)) and np.all(np.isfinite(self.theta_neg))):
            raise ValueError("loadings must be finite")


def simulate_outcome(shock: np.ndarray, spec: AsymmetricOutcomeSpec, H: int | None = None,
                     seed=None) -> np.ndarray:
    """Distributed-lag outcome with separate loadings on positive and negative shocks.

    Shocks before the first period are taken as zero.
    """
    eps = np.asarray(shock, dtype=float)
    H = len(spec.theta_pos) - 1 if H is None else H
    if len(spec.theta_pos) != H + 1:
        raise ValueError(f"loadings must have length H+1 = {H + 1}")
    N, T = eps.shape
    pos, neg = np.maximum(eps, 0.0), np.minimum(eps, 0.0)
    y = np.zeros((N, T))
    for h in range(H + 1):
        if h >= T:
            break
        y[:, h:] += spec.theta_pos[h] * pos[:, :T - h] + spec.theta_neg[h] * neg[:, :T - h]
    if spec.noise_scale > 0:
        rng = np.random.default_rng(seed)
        y += spec.noise_scale * rng.standard_normal((N, T))
    return y


@dataclass
class MicroParams:
    mu: float = 10.0
    sigma: float = 0.6
    participation: float = 0.3
    fin_mu: float = 7.0
    fin_sigma: float = 1.2
    size_probs: Sequence[float] = (0.3, 0.3, 0.2, 0.15, 0.05)
    skill_noise: float = 1.0

    def __post_init__(self):
        if self.sigma < 0 or self.fin_sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if not 0 <= self.participation <= 1:
            raise ValueError("participation must be in [0, 1]")
        if abs(sum(self.size_probs) - 1) > 1e-9:
            raise ValueError("size_probs must sum to 1")


MICRO_COLUMNS = ["household_id", "person_id", "country", "year", "weight", "age", "skill_level",
                 "income_labor", "income_financial", "hours_per_week"]


def _simulate_cell(n_households: int, params: MicroParams, rng: np.random.Generator):
    sizes = rng.choice(np.arange(1, len(params.size_probs) + 1), size=n_households,
                       p=np.asarray(params.size_probs))
    hh = np.repeat(np.arange(n_households), sizes)
    pos = np.concatenate([np.arange(s) for s in sizes])
    n = len(hh)
    age = np.where(pos == 0, rng.integers(20, 80, n),
                   np.where(pos == 1, rng.integers(18, 80, n), rng.integers(0, 30, n)))
    weight = rng.uniform(0.5, 1.5, n_households)[hh]
    earner = (age >= 18) & (age <= 64)
    z = rng.standard_normal(n)
    labor = np.where(earner, np.exp(params.mu + params.sigma * z), 0.0)
    # skill ordered by a noisy version of the earnings draw
    latent = z + params.skill_noise * rng.standard_normal(n)
    cuts = np.quantile(latent, [0.25, 0.5, 0.75]) if n else np.zeros(3)
    skill = np.where(earner, 1 + np.searchsorted(cuts, latent), 0)
    rank = np.zeros(n)
    if earner.any():
        order = np.argsort(np.argsort(labor[earner]))
        rank[earner] = (order + 1) / earner.sum()
    rank[~earner & (age >= 18)] = 0.3
    prob = np.clip(params.participation * (0.5 + rank), 0.0, 1.0) * (age >= 18)
    has_fin = rng.uniform(size=n) < prob
    fin = np.where(has_fin, np.exp(params.fin_mu + params.fin_sigma * rng.standard_normal(n))
                   * (1.0 + 2.0 * rank), 0.0)
    hours = np.where(earner, np.clip(rng.normal(38, 6, n), 5, 70), np.nan)
    return hh, age, weight, skill, labor, fin, hours


def simulate_microdata(n_households: int, params: MicroParams | None = None, seed=None,
                       countries: Sequence[str] = ("AT",), years: Sequence[int] = (2020,)
                       ) -> pd.DataFrame:
    """Person-level survey records for every (country, year) cell.

    Labor income is lognormal for ages 18-64.  Financial income is sparse
    lognormal with participation probability rising in labor-income rank.
    """
    params = params or MicroParams()
    cells = [(c, y) for c in countries for y in years]
    streams = np.random.SeedSequence(seed).spawn(len(cells))
    frames = []
    hh_offset = 0
    pid_offset = 0
    for (country, year), ss in zip(cells, streams):
        rng = np.random.default_rng(ss)
        hh, age, weight, skill, labor, fin, hours = _simulate_cell(n_households, params, rng)
        n = len(hh)
        frames.append(pd.DataFrame({
            "household_id": hh + hh_offset,
            "person_id": np.arange(n) + pid_offset,
            "country": country,
            "year": year,
            "weight": weight,
            "age": age,
            "skill_level": pd.array(np.where(skill > 0, skill, 0), dtype="Int64"),
            "income_labor": labor,
            "income_financial": fin,
            "hours_per_week": hours,
        }))
        frames[-1].loc[skill == 0, "skill_level"] = pd.NA
        hh_offset += n_households
        pid_offset += n
    return pd.concat(frames, ignore_index=True)[MICRO_COLUMNS]


def lognormal_gini(sigma: float) -> float:
    """Closed-form Gini (percent) of a lognormal with log-sd ``sigma``."""
    from scipy.stats import norm
    return 100.0 * (2.0 * norm.cdf(sigma / np.sqrt(2.0)) - 1.0)


def exogenous_ar1_panel(N: int, T: int, rho: float, scale: float, seed=None,
                        mean: float = 0.0) -> np.ndarray:
    """Independent AR(1) series per country, used for controls in fixtures."""
    streams = np.random.SeedSequence(seed).spawn(N)
    out = np.empty((N, T))
    for i, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        e = scale * rng.standard_normal(T + BURN_IN)
        x = np.zeros(T + BURN_IN)
        for t in range(1, T + BURN_IN):
            x[t] = rho * x[t - 1] + e[t]
        out[i] = mean + x[BURN_IN:]
    return out
