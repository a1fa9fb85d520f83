"""Macro panel ingestion, frequency alignment and balancing.

Input is always a long CSV with header ``country,date,variable,value``.
Dates are ``YYYY`` (annual), ``YYYY-Qq`` (quarterly) or ``YYYY-Mmm``
(monthly).  Series are kept as :class:`pandas.Series` indexed by
:class:`pandas.Period` until :func:`align_balanced` packs them into a dense
``N x T x K`` array.
"""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import (
    ConfigError,
    ConflictError,
    DateParseError,
    DomainError,
    GapError,
    InsufficientDataError,
)

logger = logging.getLogger(__name__)

EURO_AREA_16 = (
    "AT", "BE", "DE", "EE", "EL", "ES", "FI", "FR",
    "IT", "LT", "LU", "LV", "NL", "PT", "SI", "SK",
)

# (target, variable) -> donor countries
DEFAULT_DONORS = {
    ("EE", "wui"): ("LV", "LT"),
    ("EE", "clifs"): ("LV", "LT"),
    ("LU", "wui"): ("BE", "NL"),
}

FREQ_CODES = {"annual": "Y", "quarterly": "Q", "monthly": "M"}

_RE_ANNUAL = re.compile(r"^(\d{4})$")
_RE_QUARTER = re.compile(r"^(\d{4})-Q(\d)$")
_RE_MONTH = re.compile(r"^(\d{4})-M(\d{2})$")


@dataclass(frozen=True)
class SeriesKey:
    country: str
    variable: str
    frequency: str


def parse_date(text: str) -> tuple[pd.Period, str]:
    """Parse a date literal into ``(period, frequency)``."""
    text = text.strip()
    m = _RE_QUARTER.match(text)
    if m:
        q = int(m.group(2))
        if not 1 <= q <= 4:
            raise DateParseError(f"invalid quarter in {text!r}")
        return pd.Period(year=int(m.group(1)), quarter=q, freq="Q"), "quarterly"
    m = _RE_MONTH.match(text)
    if m:
        month = int(m.group(2))
        if not 1 <= month <= 12:
            raise DateParseError(f"invalid month in {text!r}")
        return pd.Period(year=int(m.group(1)), month=month, freq="M"), "monthly"
    m = _RE_ANNUAL.match(text)
    if m:
        return pd.Period(year=int(m.group(1)), freq="Y"), "annual"
    raise DateParseError(f"unrecognised date literal {text!r}")


def format_period(p: pd.Period) -> str:
    code = p.freqstr[0]
    if code == "Q":
        return f"{p.year}-Q{p.quarter}"
    if code == "M":
        return f"{p.year}-M{p.month:02d}"
    return f"{p.year}"


def quarter(text: str) -> pd.Period:
    p, freq = parse_date(text)
    if freq != "quarterly":
        raise DateParseError(f"expected a quarterly date, got {text!r}")
    return p


def quarter_range(start: str | pd.Period, end: str | pd.Period) -> pd.PeriodIndex:
    start = quarter(start) if isinstance(start, str) else start
    end = quarter(end) if isinstance(end, str) else end
    return pd.period_range(start, end, freq="Q")


@dataclass
class LongPanel:
    """Unbalanced intermediate: one series per :class:`SeriesKey`."""

    series: dict[SeriesKey, pd.Series] = field(default_factory=dict)

    def get(self, country: str, variable: str) -> pd.Series:
        for key, s in self.series.items():
            if key.country == country and key.variable == variable:
                return s
        raise KeyError((country, variable))

    def frequency(self, variable: str) -> str:
        for key in self.series:
            if key.variable == variable:
                return key.frequency
        raise KeyError(variable)

    @property
    def countries(self) -> list[str]:
        return sorted({k.country for k in self.series})

    @property
    def variables(self) -> list[str]:
        return sorted({k.variable for k in self.series})

    def put(self, country: str, variable: str, s: pd.Series, frequency: str = "quarterly"):
        for key in [k for k in self.series if k.country == country and k.variable == variable]:
            del self.series[key]
        self.series[SeriesKey(country, variable, frequency)] = s

    def copy(self) -> "LongPanel":
        return LongPanel({k: s.copy() for k, s in self.series.items()})


def load_panel(path, schema: Mapping[str, str] | None = None) -> LongPanel:
    """Read a long-format CSV into a :class:`LongPanel`.

    ``schema`` maps the canonical column names (``country``, ``date``,
    ``variable``, ``value``) to the names used in the file.
    """
    cols = {"country": "country", "date": "date", "variable": "variable", "value": "value"}
    if schema:
        cols.update(schema)
    raw: dict[tuple[str, str], dict[pd.Period, float]] = {}
    freqs: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in cols.values() if c not in (reader.fieldnames or [])]
        if missing:
            raise DateParseError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                period, freq = parse_date(row[cols["date"]])
            except DateParseError as exc:
                raise DateParseError(f"{path}, row {lineno}: {exc}") from None
            country = row[cols["country"]].strip()
            variable = row[cols["variable"]].strip()
            if freqs.setdefault(variable, freq) != freq:
                raise DateParseError(
                    f"{path}, row {lineno}: variable {variable!r} declared {freqs[variable]} "
                    f"but row is {freq}"
                )
            try:
                value = float(row[cols["value"]])
            except ValueError:
                raise DateParseError(f"{path}, row {lineno}: bad value {row[cols['value']]!r}") from None
            obs = raw.setdefault((country, variable), {})
            if period in obs:
                raise ConflictError(
                    f"{path}, row {lineno}: duplicate observation for "
                    f"{country}/{variable}/{format_period(period)}"
                )
            obs[period] = value
    panel = LongPanel()
    for (country, variable), obs in raw.items():
        s = pd.Series(obs, dtype=float).sort_index()
        panel.series[SeriesKey(country, variable, freqs[variable])] = s
    return panel


def interpolate_annual(series: pd.Series, method: str = "linear", anchor_quarter: int = 4) -> pd.Series:
    """Convert an annual series (Period index, freq Y) to quarterly.

    ``linear`` places each annual value at ``anchor_quarter`` of its year and
    joins consecutive anchors with straight lines; quarters before the first
    or after the last anchor hold that anchor's value.  ``flat`` repeats the
    annual value in all four quarters.
    """
    if not 1 <= anchor_quarter <= 4:
        raise ConfigError("anchor_quarter must be in 1..4")
    s = series.dropna().sort_index()
    years = [p.year for p in s.index]
    values = s.to_numpy(dtype=float)
    if method == "flat":
        if len(s) < 1:
            raise InsufficientDataError("flat interpolation needs at least one annual value")
        out = {}
        for y, v in zip(years, values):
            for q in range(1, 5):
                out[pd.Period(year=y, quarter=q, freq="Q")] = v
        return pd.Series(out, dtype=float).sort_index()
    if method != "linear":
        raise ConfigError(f"unknown interpolation method {method!r}")
    if len(s) < 2:
        raise InsufficientDataError("linear interpolation needs at least two annual values")
    first = pd.Period(year=years[0], quarter=1, freq="Q")
    last = pd.Period(year=years[-1], quarter=4, freq="Q")
    idx = pd.period_range(first, last, freq="Q")
    anchors = np.array([(pd.Period(year=y, quarter=anchor_quarter, freq="Q") - first).n for y in years])
    pos = np.arange(len(idx))
    out = np.interp(pos, anchors, values)
    # np.interp holds the end values flat outside the anchors; anchors are exact
    out[anchors] = values
    return pd.Series(out, index=idx, dtype=float)


def aggregate_monthly(series: pd.Series) -> pd.Series:
    """Quarterly arithmetic mean of a monthly series (Period index, freq M)."""
    s = series.dropna().sort_index()
    if s.empty:
        return pd.Series(dtype=float)
    groups: dict[pd.Period, list[tuple[int, float]]] = {}
    for p, v in s.items():
        groups.setdefault(p.asfreq("Q"), []).append((p.month, v))
    gaps = []
    out = {}
    for q, members in sorted(groups.items()):
        months = {m for m, _ in members}
        expected = {3 * (q.quarter - 1) + k for k in (1, 2, 3)}
        if months != expected:
            gaps.extend(f"{q.year}-M{m:02d}" for m in sorted(expected - months))
            continue
        # offset from the first month keeps constant quarters exact
        v0 = members[0][1]
        out[q] = v0 + math.fsum(v - v0 for _, v in members) / 3.0
    if gaps:
        raise GapError(f"incomplete quarters, missing months: {', '.join(gaps)}", gaps)
    return pd.Series(out, dtype=float)


def transform(series, op: str = "identity", denominator=None, key: str = ""):
    """Apply ``log_times_100``, ``ratio`` or ``identity`` elementwise.

    Works on scalars, arrays and Series; for ``ratio`` the input is the
    numerator.  ``key`` is only used to make error messages traceable.
    """
    if op == "identity":
        return series
    if op == "log_times_100":
        arr = np.asarray(series, dtype=float)
        bad = ~(arr > 0)
        if np.any(bad):
            where = _locate(series, bad)
            raise DomainError(f"log of nonpositive value in {key or 'series'} at {where}")
        res = 100.0 * np.log(arr)
    elif op == "ratio":
        if denominator is None:
            raise ConfigError("ratio transform needs a denominator")
        if isinstance(series, pd.Series) and isinstance(denominator, pd.Series):
            series, denominator = series.align(denominator, join="inner")
        num = np.asarray(series, dtype=float)
        den = np.asarray(denominator, dtype=float)
        bad = den == 0
        if np.any(bad):
            raise DomainError(f"zero denominator in {key or 'ratio'} at {_locate(series, bad)}")
        res = num / den
    else:
        raise ConfigError(f"unknown transform {op!r}")
    if isinstance(series, pd.Series):
        return pd.Series(res, index=series.index)
    return res if np.ndim(res) else float(res)


def _locate(series, mask) -> str:
    if isinstance(series, pd.Series):
        return ", ".join(format_period(p) if isinstance(p, pd.Period) else str(p)
                         for p in series.index[np.asarray(mask)])
    return str(np.flatnonzero(np.atleast_1d(mask)).tolist())


def impute_from_donors(panel: LongPanel, target: str, donors: Sequence[str], variable: str,
                       span: Iterable[pd.Period] | None = None) -> pd.Series:
    """Unweighted mean of the donor countries' series, date by date."""
    if not donors:
        raise ConfigError(f"no donors configured for {target}/{variable}")
    donor_series = [panel.get(d, variable) for d in donors]
    if span is None:
        idx = donor_series[0].index
        for s in donor_series[1:]:
            idx = idx.intersection(s.index)
    else:
        idx = pd.PeriodIndex(list(span))
    gaps = []
    for d, s in zip(donors, donor_series):
        missing = idx.difference(s.dropna().index)
        gaps.extend(f"{d}/{variable}/{format_period(p)}" for p in missing)
    if gaps:
        raise GapError(f"donor series not fully observed: {', '.join(gaps)}", gaps)
    stacked = np.vstack([s.reindex(idx).to_numpy(dtype=float) for s in donor_series])
    return pd.Series(stacked.mean(axis=0), index=idx)


@dataclass(frozen=True)
class PanelDataset:
    """Dense balanced panel, ``values[i, t, k]``."""

    countries: tuple[str, ...]
    quarters: tuple[pd.Period, ...]
    variables: tuple[str, ...]
    values: np.ndarray
    units: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        shape = (len(self.countries), len(self.quarters), len(self.variables))
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} != {shape}")
        if np.prod(shape) == 0:
            raise ValueError("empty panel")
        self.values.setflags(write=False)

    @property
    def shape(self):
        return self.values.shape

    def var(self, name: str) -> np.ndarray:
        return self.values[:, :, self.variables.index(name)]

    def select(self, variables: Sequence[str] | None = None, countries: Sequence[str] | None = None,
               exclude_countries: Sequence[str] = (), start=None, end=None) -> "PanelDataset":
        vs = list(variables) if variables is not None else list(self.variables)
        cs = [c for c in (countries if countries is not None else self.countries)
              if c not in set(exclude_countries)]
        missing = [v for v in vs if v not in self.variables] + [c for c in cs if c not in self.countries]
        if missing:
            raise ConfigError(f"unknown variables/countries: {missing}")
        qs = list(self.quarters)
        lo = 0 if start is None else qs.index(quarter(start) if isinstance(start, str) else start)
        hi = len(qs) if end is None else qs.index(quarter(end) if isinstance(end, str) else end) + 1
        ci = [self.countries.index(c) for c in cs]
        ki = [self.variables.index(v) for v in vs]
        vals = self.values[np.ix_(ci, range(lo, hi), ki)].copy()
        return PanelDataset(tuple(cs), tuple(qs[lo:hi]), tuple(vs), vals,
                            {v: self.units.get(v, "") for v in vs})

    def to_long(self) -> LongPanel:
        lp = LongPanel()
        idx = pd.PeriodIndex(self.quarters)
        for i, c in enumerate(self.countries):
            for k, v in enumerate(self.variables):
                lp.series[SeriesKey(c, v, "quarterly")] = pd.Series(self.values[i, :, k], index=idx)
        return lp

    def write_csv(self, path) -> None:
        write_long_csv(self.to_long(), path)


def write_long_csv(panel: LongPanel, path) -> None:
    """Write ``country,date,variable,value``; values use ``repr`` so they round-trip."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["country", "date", "variable", "value"])
        for key in sorted(panel.series, key=lambda k: (k.country, k.variable)):
            for p, v in panel.series[key].items():
                w.writerow([key.country, format_period(p), key.variable, repr(float(v))])


def align_balanced(panel: LongPanel, start, end, countries: Sequence[str] | None = None,
                   variables: Sequence[str] | None = None, units: Mapping[str, str] | None = None
                   ) -> PanelDataset:
    """Pack quarterly series into a dense panel over ``start..end``.

    Countries and variables are ordered lexicographically unless given.
    Every gap on the span is collected before raising :class:`GapError`.
    """
    idx = quarter_range(start, end)
    cs = sorted(countries) if countries is not None else panel.countries
    vs = sorted(variables) if variables is not None else panel.variables
    lookup = {(k.country, k.variable): (k, s) for k, s in panel.series.items()}
    values = np.full((len(cs), len(idx), len(vs)), np.nan)
    gaps = []
    for i, c in enumerate(cs):
        for j, v in enumerate(vs):
            entry = lookup.get((c, v))
            if entry is None:
                gaps.append(f"{c}/{v}: series absent")
                continue
            key, s = entry
            if key.frequency != "quarterly":
                gaps.append(f"{c}/{v}: {key.frequency} series not converted to quarterly")
                continue
            col = s.reindex(idx).to_numpy(dtype=float)
            for t in np.flatnonzero(~np.isfinite(col)):
                gaps.append(f"{c}/{v}/{format_period(idx[t])}")
            values[i, :, j] = col
    if gaps:
        raise GapError(f"{len(gaps)} missing cells: " + "; ".join(gaps[:20])
                       + (" ..." if len(gaps) > 20 else ""), gaps)
    return PanelDataset(tuple(cs), tuple(idx), tuple(vs), values, dict(units or {}))


def to_quarterly(panel: LongPanel, method: str = "linear", anchor_quarter: int = 4) -> LongPanel:
    """Convert every annual/monthly series in place of a copy to quarterly."""
    out = LongPanel()
    for key, s in panel.series.items():
        if key.frequency == "quarterly":
            q = s
        elif key.frequency == "monthly":
            try:
                q = aggregate_monthly(s)
            except GapError as exc:
                raise GapError(f"{key.country}/{key.variable}: {exc}", exc.gaps) from None
        else:
            q = interpolate_annual(s, method, anchor_quarter)
        out.series[SeriesKey(key.country, key.variable, "quarterly")] = q
    return out


def apply_donor_rules(panel: LongPanel, rules: Mapping[tuple[str, str], Sequence[str]] | None = None
                      ) -> LongPanel:
    """Fill absent target series from the donor mapping; existing series are kept."""
    rules = DEFAULT_DONORS if rules is None else rules
    out = panel.copy()
    present = {(k.country, k.variable) for k in panel.series}
    for (target, variable), donors in rules.items():
        if (target, variable) in present:
            continue
        if not all((d, variable) in present for d in donors):
            continue
        logger.info("imputing %s/%s from %s", target, variable, list(donors))
        out.put(target, variable, impute_from_donors(panel, target, donors, variable))
    return out
