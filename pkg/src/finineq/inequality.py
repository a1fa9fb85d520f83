"""Inequality measures from person-level survey microdata.

Records are a :class:`pandas.DataFrame` with the columns of
:data:`finineq.synthetic.MICRO_COLUMNS`.  Incomes are equivalised with the
modified OECD scale and every Gini is reported in percent.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError, DomainError, UndefinedGiniError

logger = logging.getLogger(__name__)

ADULT_AGE = 14
WORKING_AGE = (15, 64)
HIGH_SKILL = (3, 4)
LOW_SKILL = (1, 2)

COMPONENTS = {
    "total": ("income_labor", "income_financial"),
    "labor": ("income_labor",),
    "financial": ("income_financial",),
}


@dataclass(frozen=True)
class MicroRecord:
    household_id: int
    person_id: int
    country: str
    year: int
    survey_weight: float
    age: int
    skill_level: int | None
    income_labor: float
    income_financial: float
    hours_per_week: float | None = None

    def __post_init__(self):
        if self.survey_weight < 0:
            raise DomainError("survey weight must be nonnegative")


def records_frame(records: Iterable[MicroRecord]) -> pd.DataFrame:
    rows = [{
        "household_id": r.household_id, "person_id": r.person_id, "country": r.country,
        "year": r.year, "weight": r.survey_weight, "age": r.age, "skill_level": r.skill_level,
        "income_labor": r.income_labor, "income_financial": r.income_financial,
        "hours_per_week": r.hours_per_week,
    } for r in records]
    df = pd.DataFrame(rows)
    if not df.empty:
        df["skill_level"] = df["skill_level"].astype("Int64")
    return df


def read_microdata(path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"country": str}, float_precision="round_trip")
    required = {"household_id", "person_id", "country", "year", "weight", "age",
                "income_labor", "income_financial"}
    missing = required - set(df.columns)
    if missing:
        raise DataError(f"{path}: missing columns {sorted(missing)}")
    if "skill_level" in df.columns:
        df["skill_level"] = df["skill_level"].astype("Int64")
    if (df["weight"] < 0).any():
        raise DomainError(f"{path}: negative survey weights")
    return df


def write_microdata(df: pd.DataFrame, path) -> None:
    df.to_csv(path, index=False, float_format="%.17g")


def equivalence_factor(ages: Sequence[float]) -> float:
    """Modified OECD scale: 1.0 for the oldest member, then 0.5 per person
    aged 14+ and 0.3 per child under 14."""
    ages = sorted(ages, reverse=True)
    if not ages:
        raise DomainError("empty household")
    return 1.0 + sum(0.5 if a >= ADULT_AGE else 0.3 for a in ages[1:])


def _household_keys(df: pd.DataFrame) -> list[str]:
    return [c for c in ("country", "year", "household_id") if c in df.columns]


def equivalise(df: pd.DataFrame, component: str = "total") -> pd.Series:
    """Household component sum divided by the equivalence factor, per person.

    Returns a Series aligned with ``df.index``.
    """
    try:
        cols = COMPONENTS[component]
    except KeyError:
        raise ConfigError(f"unknown income component {component!r}") from None
    income = df[list(cols)]
    bad = income.isna().any(axis=1)
    if bad.any():
        pid = df.loc[bad, "person_id"].iloc[0]
        raise DataError(f"person {pid} has no {component} income")
    keys = _household_keys(df)
    inc = income.sum(axis=1)
    g = df.assign(_inc=inc).groupby(keys, sort=False)
    hh_income = g["_inc"].transform("sum")
    # vectorised equivalence factor: oldest member 1.0, others 0.5 / 0.3
    rank = g["age"].rank(method="first", ascending=False)
    w = np.where(rank == 1, 1.0, np.where(df["age"] >= ADULT_AGE, 0.5, 0.3))
    factor = pd.Series(w, index=df.index).groupby([df[k] for k in keys], sort=False).transform("sum")
    return hh_income / factor


def household_factors(df: pd.DataFrame) -> pd.Series:
    keys = _household_keys(df)
    return df.groupby(keys, sort=False)["age"].agg(lambda a: equivalence_factor(a.tolist()))


def _validate(values, weights):
    x = np.asarray(values, dtype=float).ravel()
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float).ravel()
    if x.shape != w.shape:
        raise ValueError("values and weights differ in length")
    if x.size == 0:
        raise DomainError("empty input")
    if np.any(~np.isfinite(x)) or np.any(~np.isfinite(w)):
        raise DomainError("non-finite values or weights")
    if np.any(w < 0):
        raise DomainError("negative weights")
    return x, w


def gini(values, weights=None) -> float:
    """Weighted Gini in percent.

    Pairwise-difference definition
    ``sum_ij w_i w_j |x_i - x_j| / (2 W^2 mu)``, evaluated on sorted data as
    ``sum_k w_k x_k (W_below_k - W_above_k) / (W * sum w x)``.
    """
    x, w = _validate(values, weights)
    if np.any(x < 0):
        raise DomainError("Gini undefined for negative values")
    W = w.sum()
    if W <= 0:
        raise UndefinedGiniError("weights sum to zero")
    order = np.argsort(x, kind="mergesort")
    x, w = x[order], w[order]
    wx = w * x
    total = wx.sum()
    if total <= 0:
        raise UndefinedGiniError("all incomes are zero")
    cum = np.cumsum(w)
    below = cum - w
    above = W - cum
    return float(100.0 * np.sum(wx * (below - above)) / (W * total))


def gini_pairwise(values, weights=None) -> float:
    """O(n^2) reference implementation of :func:`gini`."""
    x, w = _validate(values, weights)
    W = w.sum()
    mu = np.sum(w * x) / W
    diff = np.abs(x[:, None] - x[None, :])
    return float(100.0 * np.sum(w[:, None] * w[None, :] * diff) / (2.0 * W * W * mu))


def weighted_percentile(values, weights, p: float) -> float:
    """Smallest value whose weighted CDF reaches ``p / 100``."""
    if not 0 < p < 100:
        raise ValueError("p must lie in (0, 100)")
    x, w = _validate(values, weights)
    order = np.argsort(x, kind="mergesort")
    x, w = x[order], w[order]
    total = w.sum()
    if total <= 0:
        raise DomainError("weights sum to zero")
    cum = np.cumsum(w)
    i = int(np.searchsorted(100.0 * cum >= p * total, True))
    return float(x[min(i, len(x) - 1)])


def quintile_assignment(values, weights) -> np.ndarray:
    """Quintile 1..5; a value equal to a cut point goes to the lower group."""
    x, w = _validate(values, weights)
    cuts = np.array([weighted_percentile(x, w, q) for q in (20, 40, 60, 80)])
    return 1 + np.searchsorted(cuts, x, side="left")


def quintile_gini(values, weights, q: int) -> float:
    if q not in (1, 2, 3, 4, 5):
        raise ValueError("quintile must be in 1..5")
    x, w = _validate(values, weights)
    group = quintile_assignment(x, w) == q
    if not group.any() or w[group].sum() <= 0:
        raise DomainError(f"quintile {q} is empty after tie resolution")
    return gini(x[group], w[group])


def _drop_negative(x, w, what):
    neg = x < 0
    if neg.any():
        logger.info("%s: excluded %d negative incomes", what, int(neg.sum()))
    return x[~neg], w[~neg]


def total_gini(df: pd.DataFrame) -> float:
    x, w = _drop_negative(equivalise(df, "total").to_numpy(), df["weight"].to_numpy(), "gini_total")
    return gini(x, w)


def component_gini(df: pd.DataFrame, component: str) -> float:
    """Gini of equivalised component income among strictly positive values."""
    if component not in ("financial", "labor"):
        raise ConfigError("component must be 'financial' or 'labor'")
    x = equivalise(df, component).to_numpy()
    w = df["weight"].to_numpy()
    keep = x > 0
    if not keep.any():
        raise UndefinedGiniError(f"no positive {component} incomes")
    return gini(x[keep], w[keep])


def skill_premium(df: pd.DataFrame, log: bool = True, ages: tuple[int, int] = WORKING_AGE) -> float:
    """Mean labor income of skill levels 3-4 over levels 1-2 (log by default).

    Only working-age persons with positive labor income and a known skill
    level enter either group.
    """
    if "skill_level" not in df.columns:
        raise ConfigError("skill premium needs a skill_level column")
    lo, hi = ages
    skill = df["skill_level"]
    base = (df["age"] >= lo) & (df["age"] <= hi) & skill.notna() & (df["income_labor"] > 0)
    means = []
    for levels in (HIGH_SKILL, LOW_SKILL):
        sel = base & skill.isin(levels).fillna(False)
        w = df.loc[sel, "weight"].to_numpy(dtype=float)
        if not sel.any() or w.sum() <= 0:
            raise DomainError(f"no working-age workers at skill levels {levels}")
        means.append(np.sum(w * df.loc[sel, "income_labor"].to_numpy()) / w.sum())
    ratio = means[0] / means[1]
    return math.log(ratio) if log else ratio


def income_share_curve(df: pd.DataFrame) -> tuple[np.ndarray, float]:
    """Share of total financial income held by each overall-income percentile.

    Persons are ranked by equivalised total income; bucket ``b`` holds the
    persons whose weighted CDF lies in ``((b-1)%, b%]``.  Returns the 99
    shares for buckets 1..99 and, separately, the top bucket's share.
    """
    income = equivalise(df, "total").to_numpy()
    w = df["weight"].to_numpy(dtype=float)
    fin = np.clip(df["income_financial"].to_numpy(dtype=float), 0.0, None) * w
    grand = fin.sum()
    if grand <= 0:
        raise DomainError("total financial income is zero")
    order = np.argsort(income, kind="mergesort")
    xs, ws = income[order], w[order]
    cum = np.cumsum(ws)
    # ties share the CDF value at the end of their run
    last = np.searchsorted(xs, xs, side="right") - 1
    cdf = cum[last] / cum[-1]
    bucket_sorted = np.clip(np.ceil(100.0 * cdf - 1e-9), 1, 100).astype(int)
    bucket = np.empty_like(bucket_sorted)
    bucket[order] = bucket_sorted
    shares = np.bincount(bucket, weights=fin, minlength=101)[1:] / grand
    return shares[:99], float(shares[99])


MEASURES = ("gini_total", "gini_financial", "gini_labor", "gini_q1", "gini_q2", "gini_q3",
            "gini_q4", "gini_q5", "p90", "p95", "skill_premium")


def cell_measures(df: pd.DataFrame, measures: Sequence[str] = MEASURES,
                  skill_log: bool = True) -> dict[str, float]:
    """All requested measures for one country-year slice."""
    out: dict[str, float] = {}
    need_total = any(m.startswith("gini_q") or m in ("p90", "p95") for m in measures)
    if need_total:
        x, w = _drop_negative(equivalise(df, "total").to_numpy(), df["weight"].to_numpy(), "total")
    for m in measures:
        if m == "gini_total":
            out[m] = total_gini(df)
        elif m == "gini_financial":
            out[m] = component_gini(df, "financial")
        elif m == "gini_labor":
            out[m] = component_gini(df, "labor")
        elif m.startswith("gini_q"):
            out[m] = quintile_gini(x, w, int(m[-1]))
        elif m in ("p90", "p95"):
            out[m] = weighted_percentile(x, w, float(m[1:]))
        elif m == "skill_premium":
            out[m] = skill_premium(df, log=skill_log)
        elif m == "skill_premium_ratio":
            out[m] = skill_premium(df, log=False)
        else:
            raise ConfigError(f"unknown measure {m!r}")
    return out


def compute_measures(df: pd.DataFrame, measures: Sequence[str] = MEASURES,
                     skill_log: bool = True) -> pd.DataFrame:
    """Long frame ``country,year,measure,value`` over every country-year cell."""
    rows = []
    for (country, year), cell in df.groupby(["country", "year"], sort=True):
        try:
            vals = cell_measures(cell, measures, skill_log)
        except DataError as exc:
            raise type(exc)(f"{country}/{year}: {exc}") from None
        rows.extend((country, int(year), m, vals[m]) for m in measures)
    return pd.DataFrame(rows, columns=["country", "year", "measure", "value"])


def write_measures_csv(frame: pd.DataFrame, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["country", "year", "measure", "value"])
        for r in frame.itertuples(index=False):
            w.writerow([r.country, r.year, r.measure, repr(float(r.value))])
