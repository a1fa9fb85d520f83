"""Sign-restriction and recursive identification of structural shocks.

A candidate impact matrix is ``A = chol(Sigma) @ Q`` with ``Q`` Haar-uniform
on the orthogonal group.  Rotations are searched per reduced-form draw
until the sign pattern holds at impact or the attempt budget runs out.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import ConfigError, IdentificationError, NumericalRankError
from .psvar import ReducedDraw, ResidualPanel

logger = logging.getLogger(__name__)

SIGN_CODES = {"+": 1, "-": -1, ".": 0, "": 0, " ": 0, "−": -1}

BASELINE_VARIABLES = ("gdp", "prices", "interest_rate", "investment_output", "stock_prices")
BASELINE_SHOCKS = ("supply", "demand", "monetary", "investment", "financial")


@dataclass(frozen=True)
class RestrictionScheme:
    """Sign pattern: ``signs[k, j]`` is the impact sign of variable k to shock j."""

    variables: tuple[str, ...]
    shocks: tuple[str, ...]
    signs: np.ndarray
    flip_allowed: bool = True
    residual_shocks: tuple[str, ...] = ()

    def __post_init__(self):
        signs = np.asarray(self.signs, dtype=int)
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "shocks", tuple(self.shocks))
        K = len(self.variables)
        if signs.shape != (K, len(self.shocks)) or len(self.shocks) != K:
            raise ConfigError(f"sign matrix must be {K}x{K}, got {signs.shape}")
        if not np.isin(signs, (-1, 0, 1)).all():
            raise ConfigError("signs must be -1, 0 or +1")
        for names, what in ((self.variables, "variable"), (self.shocks, "shock")):
            if len(set(names)) != len(names):
                raise ConfigError(f"duplicate {what} names in {names}")
        for j, s in enumerate(self.shocks):
            if not signs[:, j].any() and s not in self.residual_shocks:
                raise ConfigError(f"shock {s!r} has no restriction and is not labelled residual")
        for a in range(K):
            for b in range(a + 1, K):
                ca, cb = signs[:, a], signs[:, b]
                if not ca.any() or not cb.any():
                    continue
                if np.array_equal(ca, cb) or (self.flip_allowed and np.array_equal(ca, -cb)):
                    raise ConfigError(
                        f"shocks {self.shocks[a]!r} and {self.shocks[b]!r} have "
                        "indistinguishable restrictions")
                if self.flip_allowed and _opposite_pair(ca, cb):
                    raise ConfigError(
                        f"shocks {self.shocks[a]!r} and {self.shocks[b]!r} are an opposite-sign "
                        "pair; such schemes need flip_allowed=False")

    @property
    def K(self) -> int:
        return len(self.variables)

    def shock_index(self, name: str) -> int:
        try:
            return self.shocks.index(name)
        except ValueError:
            raise ConfigError(f"shock {name!r} not in scheme {self.shocks}") from None

    def relax(self, variable: str, shock: str) -> "RestrictionScheme":
        signs = self.signs.copy()
        signs[self.variables.index(variable), self.shock_index(shock)] = 0
        residual = self.residual_shocks
        if not signs[:, self.shock_index(shock)].any():
            residual = residual + (shock,)
        return RestrictionScheme(self.variables, self.shocks, signs, self.flip_allowed, residual)

    def to_json(self) -> str:
        inv = {1: "+", -1: "-", 0: "."}
        return json.dumps({
            "variables": list(self.variables),
            "shocks": list(self.shocks),
            "signs": [[inv[int(v)] for v in row] for row in self.signs],
            "flip_allowed": self.flip_allowed,
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RestrictionScheme":
        d = json.loads(text)
        try:
            signs = [[SIGN_CODES[c.strip()] for c in row] for row in d["signs"]]
        except KeyError as exc:
            raise ConfigError(f"bad sign code {exc}") from None
        return cls(tuple(d["variables"]), tuple(d["shocks"]), np.array(signs),
                   d.get("flip_allowed", True), tuple(d.get("residual_shocks", ())))


def _opposite_pair(ca: np.ndarray, cb: np.ndarray) -> bool:
    """Same support and opposite signs on a strict majority of it."""
    sa, sb = ca != 0, cb != 0
    if not np.array_equal(sa, sb):
        return False
    disagree = np.sum(ca[sa] != cb[sa])
    return disagree * 2 > sa.sum()


def _parse(rows: Sequence[str]) -> np.ndarray:
    return np.array([[SIGN_CODES[c] for c in row.split()] for row in rows])


_BASELINE = _parse([
    # supply demand monetary investment financial
    "+ + + + +",   # gdp
    "- + + + +",   # prices
    ". + - + +",   # interest rate
    ". - . + +",   # investment / output
    "+ . . - +",   # stock prices
])


def scheme(name: str) -> RestrictionScheme:
    """Built-in restriction schemes.

    ``baseline`` and ``demand_focus`` share the five-variable pattern; the
    latter only changes which shock the pipeline carries forward.
    """
    if name in ("baseline", "demand_focus"):
        return RestrictionScheme(BASELINE_VARIABLES, BASELINE_SHOCKS, _BASELINE.copy())
    if name == "credit":
        signs = np.zeros((6, 6), dtype=int)
        signs[:5, :5] = _BASELINE
        signs[:5, 5] = 1
        signs[5, 4], signs[5, 5] = -1, 1
        return RestrictionScheme(BASELINE_VARIABLES + ("credit_stock_ratio",),
                                 BASELINE_SHOCKS + ("credit",), signs)
    if name == "volatility_signed":
        signs = np.zeros((6, 6), dtype=int)
        signs[:5, :4] = _BASELINE[:, :4]
        signs[:5, 4], signs[:5, 5] = 1, -1
        signs[5, 4] = signs[5, 5] = 1
        shocks = BASELINE_SHOCKS[:4] + ("financial_positive", "financial_negative")
        return RestrictionScheme(BASELINE_VARIABLES + ("stock_volatility",), shocks, signs,
                                 flip_allowed=False)
    raise ConfigError(f"unknown restriction scheme {name!r}")


FOCUS_SHOCKS = {
    "baseline": ("financial",),
    "credit": ("credit", "financial"),
    "volatility_signed": ("financial_positive", "financial_negative"),
    "demand_focus": ("demand",),
}


def draw_rotation(K: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-distributed orthogonal matrix (or a stack of ``size`` of them).

    QR of an i.i.d. standard normal matrix with R's diagonal made positive.
    """
    shape = (K, K) if size is None else (size, K, K)
    while True:
        G = rng.standard_normal(shape)
        Q, R = np.linalg.qr(G)
        d = np.diagonal(R, axis1=-2, axis2=-1)
        if np.all(d != 0):
            break
    return Q * np.sign(d)[..., None, :]


def _column_status(A: np.ndarray, signs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per column: does it match as-is, does it match after negation."""
    mask = signs != 0
    prod = A * signs
    ok = np.all((prod > 0) | ~mask, axis=-2)
    ok_flip = np.all((prod < 0) | ~mask, axis=-2)
    return ok, ok_flip


def satisfies(A: np.ndarray, scheme: RestrictionScheme) -> bool:
    """True iff every restricted cell has the strict required sign.

    With ``flip_allowed`` each column may instead match after negating the
    whole column.
    """
    ok, ok_flip = _column_status(np.asarray(A), scheme.signs)
    if scheme.flip_allowed:
        ok = ok | ok_flip
    return bool(np.all(ok))


def normalize_signs(A: np.ndarray, scheme: RestrictionScheme):
    """Return the column signs ``d`` with ``A * d`` satisfying the scheme, or None."""
    ok, ok_flip = _column_status(np.asarray(A), scheme.signs)
    if np.all(ok):
        return np.ones(A.shape[-1])
    if scheme.flip_allowed and np.all(ok | ok_flip):
        return np.where(ok, 1.0, -1.0)
    return None


@dataclass(frozen=True)
class StructuralDraw:
    parent: ReducedDraw
    Q: np.ndarray
    A: np.ndarray
    shocks: tuple[str, ...] = ()


@dataclass
class IdentificationResult:
    draws: list[StructuralDraw]
    accepted_index: list[int]
    attempts: list[int]
    n_reduced: int
    shocks: tuple[str, ...]
    diagnostics: dict = field(default_factory=dict)

    @property
    def acceptance_rate(self) -> float:
        return len(self.draws) / self.n_reduced if self.n_reduced else 0.0


def _search(draw: ReducedDraw, ss: np.random.SeedSequence, scheme: RestrictionScheme,
            max_attempts: int, batch: int):
    K = scheme.K
    if draw.Sigma.shape != (K, K):
        raise ConfigError(f"draw has {draw.Sigma.shape[0]} variables, scheme has {K}")
    rng = np.random.default_rng(ss)
    P = linalg.cholesky(draw.Sigma, lower=True)
    used = 0
    while used < max_attempts:
        n = min(batch, max_attempts - used)
        Q = draw_rotation(K, rng, size=n)
        A = P @ Q
        ok, ok_flip = _column_status(A, scheme.signs)
        good = ok | ok_flip if scheme.flip_allowed else ok
        hit = np.flatnonzero(np.all(good, axis=1))
        if hit.size:
            i = hit[0]
            dvec = np.where(ok[i], 1.0, -1.0)
            return Q[i] * dvec, A[i] * dvec, used + i + 1
        used += n
    return None, None, used


def _search_sequential(draw: ReducedDraw, ss: np.random.SeedSequence, scheme: RestrictionScheme,
                       max_attempts: int, batch: int):
    """Column-by-column search: each column is drawn uniformly on the unit
    sphere orthogonal to the columns already fixed, proposing ``batch``
    candidates at a time.  A pass that cannot fill some column restarts.
    """
    K = scheme.K
    if draw.Sigma.shape != (K, K):
        raise ConfigError(f"draw has {draw.Sigma.shape[0]} variables, scheme has {K}")
    rng = np.random.default_rng(ss)
    P = linalg.cholesky(draw.Sigma, lower=True)
    signs = scheme.signs
    # most restricted columns first, ties in scheme order
    order = sorted(range(K), key=lambda j: -int(np.count_nonzero(signs[:, j])))
    for attempt in range(1, max_attempts + 1):
        Q = np.zeros((K, K))
        basis = np.zeros((K, 0))
        for j in order:
            Z = rng.standard_normal((batch, K))
            Z -= (Z @ basis) @ basis.T
            norms = np.linalg.norm(Z, axis=1)
            keep = norms > 1e-12
            C = Z[keep] / norms[keep, None]
            ok, ok_flip = _column_status(P @ C.T, signs[:, [j]])
            good = ok | ok_flip if scheme.flip_allowed else ok
            hit = np.flatnonzero(good)
            if not hit.size:
                break
            q = C[hit[0]] * (1.0 if ok[hit[0]] else -1.0)
            Q[:, j] = q
            basis = np.column_stack([basis, q])
        else:
            return Q, P @ Q, attempt
    return None, None, max_attempts


SEARCH_METHODS = ("joint", "sequential", "auto")


def identify(draws: Sequence[ReducedDraw], scheme: RestrictionScheme, max_attempts: int = 1000,
             seed=None, batch: int = 250, threads: int = 1, search: str = "auto"
             ) -> IdentificationResult:
    """Rotation search per reduced-form draw.

    ``search="joint"`` draws whole Haar rotations and keeps the first one
    that satisfies every column (exact conditional of the Haar prior).
    ``"sequential"`` fills columns one at a time, which is far cheaper for
    densely restricted schemes but tilts the rotation distribution.
    ``"auto"`` uses joint search unless column flips are disabled.

    Each draw gets its own RNG substream, so results are identical for any
    ``threads`` setting.  A draw is discarded after ``max_attempts``
    rotations (joint) or passes (sequential).
    """
    if not draws:
        raise IdentificationError("no reduced-form draws to identify")
    if search not in SEARCH_METHODS:
        raise ConfigError(f"search must be one of {SEARCH_METHODS}, got {search!r}")
    if search == "auto":
        search = "joint" if scheme.flip_allowed else "sequential"
    fn = _search if search == "joint" else _search_sequential
    streams = np.random.SeedSequence(seed).spawn(len(draws))
    args = list(zip(draws, streams))
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as pool:
            found = list(pool.map(lambda a: fn(*a, scheme, max_attempts, batch), args))
    else:
        found = [fn(d, ss, scheme, max_attempts, batch) for d, ss in args]
    accepted, acc_idx, attempts = [], [], []
    for d, (draw, (Q, A, used)) in enumerate(zip(draws, found)):
        attempts.append(used)
        if Q is not None:
            accepted.append(StructuralDraw(draw, Q, A, scheme.shocks))
            acc_idx.append(d)
    diag = {
        "n_reduced": len(draws),
        "n_accepted": len(accepted),
        "n_discarded": len(draws) - len(accepted),
        "acceptance_rate": len(accepted) / len(draws),
        "mean_attempts": float(np.mean(attempts)),
        "max_attempts": max_attempts,
        "search": search,
    }
    logger.info("identification: %d/%d draws accepted", len(accepted), len(draws))
    if not accepted:
        raise IdentificationError("no draw satisfied the sign restrictions", diag)
    return IdentificationResult(accepted, acc_idx, attempts, len(draws), scheme.shocks, diag)


def cholesky_identify(draw: ReducedDraw, variables: Sequence[str], ordering: Sequence[str]
                      ) -> StructuralDraw:
    """Recursive identification; shock j is named after ``ordering[j]``.

    The impact matrix is lower triangular once rows are put in ``ordering``.
    """
    variables = list(variables)
    if sorted(ordering) != sorted(variables):
        raise ConfigError("ordering must be a permutation of the variables")
    perm = [variables.index(v) for v in ordering]
    Sp = draw.Sigma[np.ix_(perm, perm)]
    try:
        L = linalg.cholesky(Sp, lower=True)
    except linalg.LinAlgError:
        raise NumericalRankError("Sigma is not positive definite") from None
    inv = np.argsort(perm)
    A = L[inv, :]
    P = linalg.cholesky(draw.Sigma, lower=True)
    Q = linalg.solve_triangular(P, A, lower=True)
    return StructuralDraw(draw, Q, A, tuple(ordering))


@dataclass(frozen=True)
class ShockPanel:
    shock: str
    values: np.ndarray  # (N, T-p)
    countries: tuple[str, ...] = ()
    quarters: tuple = ()
    standardized: bool = False

    def standardize(self) -> "ShockPanel":
        sd = np.std(self.values, ddof=1)
        return ShockPanel(self.shock, self.values / sd, self.countries, self.quarters, True)


def extract_shocks(structural: Sequence[StructuralDraw], residuals: Sequence[ResidualPanel],
                   shock: str, summary: str = "median", standardize: bool = True) -> ShockPanel:
    """Structural shock series ``A^{-1} u`` summarised pointwise across draws."""
    if len(structural) != len(residuals):
        raise ValueError("need one residual panel per structural draw")
    series = []
    for sd, rp in zip(structural, residuals):
        names = sd.shocks
        j = names.index(shock) if names else int(shock)
        scale = np.max(np.abs(sd.A))
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", linalg.LinAlgWarning)
                lu = linalg.lu_factor(sd.A, check_finite=True)
            if not scale > 0 or np.min(np.abs(np.diag(lu[0]))) <= 1e-12 * scale:
                raise linalg.LinAlgError("singular")
        except (linalg.LinAlgError, ValueError):
            warnings.warn("singular impact matrix skipped", RuntimeWarning, stacklevel=2)
            continue
        N, T, K = rp.u.shape
        eps = linalg.lu_solve(lu, rp.u.reshape(N * T, K).T).T
        series.append(eps[:, j].reshape(N, T))
    if not series:
        raise IdentificationError("no usable structural draws for shock extraction")
    stack = np.stack(series)
    if summary == "median":
        point = np.median(stack, axis=0)
    elif summary == "mean":
        point = stack.mean(axis=0)
    else:
        raise ConfigError(f"unknown shock summary {summary!r}")
    ref = residuals[0]
    out = ShockPanel(shock, point, tuple(ref.countries), tuple(ref.quarters), False)
    return out.standardize() if standardize else out


def write_shocks_csv(panels: Sequence[ShockPanel], path) -> None:
    import csv
    from .panel import format_period
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["country", "date", "shock", "value"])
        for sp in panels:
            for i, c in enumerate(sp.countries):
                for t, q in enumerate(sp.quarters):
                    w.writerow([c, format_period(q), sp.shock, repr(float(sp.values[i, t]))])


def read_shocks_csv(path, shock: str | None = None) -> ShockPanel:
    import pandas as pd
    from .panel import parse_date
    df = pd.read_csv(path, dtype={"country": str, "date": str, "shock": str},
                     float_precision="round_trip")
    if shock is None:
        names = df["shock"].unique()
        if len(names) != 1:
            raise ConfigError(f"{path} holds several shocks {list(names)}; name one")
        shock = names[0]
    df = df[df["shock"] == shock]
    if df.empty:
        raise ConfigError(f"shock {shock!r} not found in {path}")
    wide = df.pivot(index="country", columns="date", values="value")
    quarters = tuple(parse_date(d)[0] for d in wide.columns)
    order = np.argsort(quarters)
    wide = wide.iloc[:, order]
    return ShockPanel(shock, wide.to_numpy(dtype=float), tuple(wide.index),
                      tuple(np.array(quarters, dtype=object)[order]), True)
