"""Pooled panel VAR with country intercepts under a Normal-Wishart prior.

The model for country ``i`` is

    y_{i,t} = B [y_{i,t-1}; ...; y_{i,t-p}; d_i] + u_{i,t},   u ~ N(0, Sigma)

with one coefficient matrix shared by all countries and ``d_i`` a country
dummy.  Internally the regression is kept in the stacked orientation
``Y = X Phi + U`` with ``Phi = B.T``.

The prior is the natural conjugate one::

    vec(Phi) | Sigma ~ N(vec(Phi0), Sigma kron Omega0),  Sigma ~ IW(S0, alpha0)

``Omega0`` is diagonal with Minnesota-style scaling: lag ``l`` of variable
``j`` gets variance ``(lambda1 / (sigma_j * l**lambda3))**2`` and every
country dummy ``(lambda1 * lambda4)**2``.  All factorizations go through
Cholesky; no explicit inverses are formed.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import EstimationError, InsufficientDataError, NumericalRankError
from .panel import PanelDataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VarSpec:
    variables: tuple[str, ...]
    lags: int = 4

    def __post_init__(self):
        if self.lags < 1:
            raise ValueError("lags must be >= 1")
        object.__setattr__(self, "variables", tuple(self.variables))


@dataclass(frozen=True)
class NwPrior:
    """Hyperparameters; defaults are the conventional Normal-Wishart values."""

    ar_coefficient: float = 0.8
    lambda1: float = 0.1
    lambda3: float = 1.0
    lambda4: float = 100.0
    dof_shift: int = 2

    def __post_init__(self):
        if not (self.lambda1 > 0 and self.lambda3 >= 0 and self.lambda4 > 0):
            raise ValueError("need lambda1 > 0, lambda3 >= 0, lambda4 > 0")
        if self.dof_shift < 2:
            raise ValueError("dof_shift must be >= 2 for a finite prior mean of Sigma")

    @classmethod
    def diffuse(cls, scale: float = 1e8) -> "NwPrior":
        return cls(ar_coefficient=0.0, lambda1=scale, lambda3=0.0, lambda4=1.0)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NwPrior":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass(frozen=True)
class Design:
    """Stacked regression arrays; rows are country-major, time-minor."""

    Y: np.ndarray  # (N*(T-p), K)
    X: np.ndarray  # (N*(T-p), K*p + N)
    n_countries: int
    n_periods: int  # T - p
    lags: int
    variables: tuple[str, ...]
    countries: tuple[str, ...] = ()
    quarters: tuple = ()

    @property
    def K(self) -> int:
        return self.Y.shape[1]

    @property
    def n_regressors(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class ReducedDraw:
    B: np.ndarray      # (K, K*p + N)
    Sigma: np.ndarray  # (K, K)

    def lag_matrices(self, lags: int) -> list[np.ndarray]:
        K = self.B.shape[0]
        return [self.B[:, l * K:(l + 1) * K] for l in range(lags)]


@dataclass(frozen=True)
class ResidualPanel:
    u: np.ndarray  # (N, T-p, K)
    countries: tuple[str, ...] = ()
    quarters: tuple = ()


@dataclass(frozen=True)
class NwPosterior:
    """Matric-normal / inverse-Wishart posterior (or prior when n_obs == 0)."""

    Phi: np.ndarray          # posterior mean, (m, K)
    precision_chol: np.ndarray  # lower Cholesky factor of Omega^{-1}, (m, m)
    S: np.ndarray            # inverse-Wishart scale, (K, K)
    dof: float
    Phi0: np.ndarray
    Omega0_diag: np.ndarray
    S0: np.ndarray
    dof0: float
    design: Design | None = None

    @property
    def B_mean(self) -> np.ndarray:
        return self.Phi.T

    @property
    def Sigma_mean(self) -> np.ndarray:
        K = self.S.shape[0]
        return self.S / (self.dof - K - 1)


def build_design(panel: PanelDataset, spec: VarSpec) -> Design:
    """Stack ``[lags 1..p, country dummies]`` regressors over countries."""
    data = panel.select(variables=spec.variables).values if tuple(panel.variables) != spec.variables \
        else panel.values
    if not np.all(np.isfinite(data)):
        raise ValueError("unbalanced panel: missing cells in VAR variables")
    N, T, K = data.shape
    p = spec.lags
    if T <= p:
        raise InsufficientDataError(f"T={T} periods with p={p} lags leaves no observations")
    Tp = T - p
    Y = data[:, p:, :].reshape(N * Tp, K)
    lagged = [data[:, p - l:T - l, :] for l in range(1, p + 1)]
    Xl = np.concatenate(lagged, axis=2).reshape(N * Tp, K * p)
    D = np.kron(np.eye(N), np.ones((Tp, 1)))
    X = np.hstack([Xl, D])
    return Design(Y, X, N, Tp, p, spec.variables, tuple(panel.countries), tuple(panel.quarters[p:]))


def ar_residual_variances(design: Design) -> np.ndarray:
    """Per-variable residual variance of pooled univariate AR(p) with country dummies."""
    K, p = design.K, design.lags
    dummies = design.X[:, K * p:]
    out = np.empty(K)
    for j in range(K):
        cols = [l * K + j for l in range(p)]
        Z = np.hstack([design.X[:, cols], dummies])
        y = design.Y[:, j]
        coef, *_ = linalg.lstsq(Z, y)
        e = y - Z @ coef
        dof = max(len(y) - Z.shape[1], 1)
        out[j] = e @ e / dof
    return out


def prior_moments(design: Design, prior: NwPrior, sigma2: np.ndarray | None = None):
    """Return ``(Phi0, Omega0_diag, S0, dof0)`` for the given design."""
    K, p, N = design.K, design.lags, design.n_countries
    if sigma2 is None:
        sigma2 = ar_residual_variances(design)
    sigma = np.sqrt(sigma2)
    m = K * p + N
    Phi0 = np.zeros((m, K))
    Phi0[:K, :K] = prior.ar_coefficient * np.eye(K)
    om = np.empty(m)
    for l in range(1, p + 1):
        om[(l - 1) * K:l * K] = (prior.lambda1 / (sigma * l ** prior.lambda3)) ** 2
    om[K * p:] = (prior.lambda1 * prior.lambda4) ** 2
    dof0 = K + prior.dof_shift
    S0 = (dof0 - K - 1) * np.diag(sigma2)
    return Phi0, om, S0, float(dof0)


def nw_posterior(design: Design, prior: NwPrior, sigma2: np.ndarray | None = None) -> NwPosterior:
    """Conjugate Normal-Wishart update.

    ``sigma2`` (per-variable scale) defaults to pooled AR(p) residual
    variances; pass it explicitly when the design has no rows.
    """
    Phi0, om, S0, dof0 = prior_moments(design, prior, sigma2)
    X, Y = design.X, design.Y
    prec0 = 1.0 / om
    P = X.T @ X
    P[np.diag_indices_from(P)] += prec0
    try:
        L = linalg.cholesky(P, lower=True)
    except linalg.LinAlgError:
        raise NumericalRankError("posterior precision not positive definite") from None
    if np.min(np.diag(L)) <= np.sqrt(np.finfo(float).eps) * np.max(np.diag(L)):
        raise NumericalRankError("cross-product matrix numerically singular")
    rhs = prec0[:, None] * Phi0 + X.T @ Y
    Phi = linalg.cho_solve((L, True), rhs)
    E = Y - X @ Phi
    D = Phi - Phi0
    S = S0 + E.T @ E + D.T @ (prec0[:, None] * D)
    S = 0.5 * (S + S.T)
    return NwPosterior(Phi, L, S, dof0 + X.shape[0], Phi0, om, S0, dof0, design)


def sample_inverse_wishart(S: np.ndarray, dof: float, rng: np.random.Generator) -> np.ndarray:
    """Inverse-Wishart draw via the Bartlett decomposition.

    With ``S = L L'`` and ``A`` the Bartlett factor of ``W(dof, I)``,
    ``Sigma = (L A^{-T})(L A^{-T})'``.
    """
    K = S.shape[0]
    L = linalg.cholesky(S, lower=True)
    A = np.tril(rng.standard_normal((K, K)), -1)
    A[np.diag_indices(K)] = np.sqrt(rng.chisquare(dof - np.arange(K)))
    Ct = linalg.solve_triangular(A, L.T, lower=True)
    Sigma = Ct.T @ Ct
    return 0.5 * (Sigma + Sigma.T)


def _draw_phi(post: NwPosterior, Sigma: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    m, K = post.Phi.shape
    Z = rng.standard_normal((m, K))
    # rows: Omega^{1/2} with Omega^{-1} = L L'  ->  L^{-T} Z has covariance Omega
    left = linalg.solve_triangular(post.precision_chol, Z, lower=True, trans="T")
    C = linalg.cholesky(Sigma, lower=True)
    return post.Phi + left @ C.T


def gibbs_sample(post: NwPosterior, n_iter: int = 2000, burn_in: int = 1000, seed=None,
                 max_retries: int = 10) -> list[ReducedDraw]:
    """Alternate ``Sigma | Phi`` and ``Phi | Sigma``; keep post-burn-in draws.

    ``Sigma | Phi ~ IW(S0 + E'E + (Phi-Phi0)' Omega0^{-1} (Phi-Phi0), dof0 + n + m)``
    and ``Phi | Sigma ~ MN(Phi_bar, Omega_bar, Sigma)``.
    """
    if n_iter <= burn_in:
        raise ValueError("n_iter must exceed burn_in")
    rng = np.random.default_rng(seed)
    design = post.design
    if design is None:
        raise ValueError("posterior carries no design")
    X, Y = design.X, design.Y
    prec0 = 1.0 / post.Omega0_diag
    m, K = post.Phi.shape
    dof = post.dof0 + X.shape[0] + m
    Phi = post.Phi.copy()
    draws = []
    for it in range(n_iter):
        E = Y - X @ Phi
        D = Phi - post.Phi0
        scale = post.S0 + E.T @ E + D.T @ (prec0[:, None] * D)
        scale = 0.5 * (scale + scale.T)
        for attempt in range(max_retries + 1):
            try:
                Sigma = sample_inverse_wishart(scale, dof, rng)
                Phi_new = _draw_phi(post, Sigma, rng)
                break
            except linalg.LinAlgError:
                logger.warning("non-PD conditional scale at iteration %d, retry %d", it, attempt)
        else:
            raise EstimationError(f"Gibbs step {it}: conditional scale not PD after {max_retries} retries")
        Phi = Phi_new
        if it >= burn_in:
            draws.append(ReducedDraw(Phi.T.copy(), Sigma))
    return draws


def reduced_residuals(draw: ReducedDraw, design: Design) -> ResidualPanel:
    if draw.B.shape != (design.K, design.n_regressors):
        raise ValueError(f"draw B shape {draw.B.shape} does not match design "
                         f"({design.K}, {design.n_regressors})")
    U = design.Y - design.X @ draw.B.T
    return ResidualPanel(U.reshape(design.n_countries, design.n_periods, design.K),
                         design.countries, design.quarters)


def companion_matrix(lag_mats: Sequence[np.ndarray]) -> np.ndarray:
    K = lag_mats[0].shape[0]
    p = len(lag_mats)
    F = np.zeros((K * p, K * p))
    F[:K, :] = np.hstack(lag_mats)
    if p > 1:
        F[K:, :-K] = np.eye(K * (p - 1))
    return F


def companion_irf(draw_or_lags, horizons: int, lags: int | None = None) -> np.ndarray:
    """Reduced-form MA coefficients ``Psi[h]`` for ``h = 0..horizons``.

    Accepts a :class:`ReducedDraw` (then ``lags`` is required) or a list of
    ``K x K`` lag matrices.
    """
    if isinstance(draw_or_lags, ReducedDraw):
        if lags is None:
            raise ValueError("lags required with a ReducedDraw")
        mats = draw_or_lags.lag_matrices(lags)
    else:
        mats = [np.atleast_2d(np.asarray(m, dtype=float)) for m in draw_or_lags]
    K = mats[0].shape[0]
    F = companion_matrix(mats)
    radius = np.max(np.abs(np.linalg.eigvals(F)))
    if radius >= 1.0:
        warnings.warn(f"companion spectral radius {radius:.3f} >= 1", RuntimeWarning, stacklevel=2)
    out = np.empty((horizons + 1, K, K))
    Fh = np.eye(K * len(mats))
    for h in range(horizons + 1):
        out[h] = Fh[:K, :K]
        Fh = F @ Fh
    return out


def posterior_mean(draws: Sequence[ReducedDraw]) -> tuple[np.ndarray, np.ndarray]:
    B = np.mean([d.B for d in draws], axis=0)
    S = np.mean([d.Sigma for d in draws], axis=0)
    return B, S


def batch_means_se(samples: np.ndarray, n_batches: int = 20) -> np.ndarray:
    """Monte Carlo standard error of the mean along axis 0 by batch means."""
    samples = np.asarray(samples)
    n = samples.shape[0] // n_batches * n_batches
    batches = samples[:n].reshape(n_batches, n // n_batches, *samples.shape[1:]).mean(axis=1)
    return batches.std(axis=0, ddof=1) / np.sqrt(n_batches)


def write_draws_csv(draws: Sequence[ReducedDraw], path) -> None:
    """Audit dump with columns ``draw_id,matrix,row,col,value``."""
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["draw_id", "matrix", "row", "col", "value"])
        for d, draw in enumerate(draws):
            for name, M in (("B", draw.B), ("Sigma", draw.Sigma)):
                for (r, c), v in np.ndenumerate(M):
                    w.writerow([d, name, r, c, repr(float(v))])


def read_draws_csv(path) -> list[ReducedDraw]:
    import pandas as pd
    df = pd.read_csv(path, float_precision="round_trip")
    out = []
    for _, g in df.groupby("draw_id", sort=True):
        mats = {}
        for name, gm in g.groupby("matrix"):
            M = np.zeros((gm["row"].max() + 1, gm["col"].max() + 1))
            M[gm["row"].to_numpy(), gm["col"].to_numpy()] = gm["value"].to_numpy()
            mats[name] = M
        out.append(ReducedDraw(mats["B"], mats["Sigma"]))
    return out
