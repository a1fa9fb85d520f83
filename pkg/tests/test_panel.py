import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finineq.errors import (ConfigError, ConflictError, DateParseError, DomainError, GapError,
                            InsufficientDataError)
from finineq.panel import (DEFAULT_DONORS, LongPanel, align_balanced, aggregate_monthly,
                           apply_donor_rules, impute_from_donors, interpolate_annual, load_panel,
                           parse_date, quarter, quarter_range, to_quarterly, transform,
                           write_long_csv)


def write_csv(path, rows, header="country,date,variable,value"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path


def annual(values, start=2006):
    idx = pd.PeriodIndex([pd.Period(year=start + i, freq="Y") for i in range(len(values))])
    return pd.Series(values, index=idx, dtype=float)


def monthly(values, start="2006-01"):
    return pd.Series(values, index=pd.period_range(start, periods=len(values), freq="M"), dtype=float)


# -- parsing ---------------------------------------------------------------

def test_single_quarterly_row(tmp_path):
    p = load_panel(write_csv(tmp_path / "m.csv", ["AT,2006-Q1,gdp,100.0"]))
    s = p.get("AT", "gdp")
    assert p.frequency("gdp") == "quarterly"
    assert list(s.index) == [quarter("2006-Q1")]
    assert s.iloc[0] == 100.0


def test_duplicate_rows_conflict(tmp_path):
    f = write_csv(tmp_path / "m.csv", ["AT,2006-Q1,gdp,100.0", "AT,2006-Q1,gdp,101.0"])
    with pytest.raises(ConflictError, match="AT/gdp/2006-Q1"):
        load_panel(f)


def test_bad_month_names_row(tmp_path):
    f = write_csv(tmp_path / "m.csv", ["AT,2006-Q1,gdp,1", "AT,2006-13,gdp,2"])
    with pytest.raises(DateParseError, match="row 3"):
        load_panel(f)


@pytest.mark.parametrize("text", ["2006-13", "2006-Q5", "2006-M13", "2006-M00", "06", "2006Q1", ""])
def test_parse_date_rejects(text):
    with pytest.raises(DateParseError):
        parse_date(text)


@pytest.mark.parametrize("text,freq", [("2006", "annual"), ("2006-Q3", "quarterly"),
                                       ("2006-M07", "monthly")])
def test_parse_date_accepts(text, freq):
    assert parse_date(text)[1] == freq


def test_frequency_declared_once(tmp_path):
    f = write_csv(tmp_path / "m.csv", ["AT,2006-Q1,gdp,1", "BE,2006,gdp,2"])
    with pytest.raises(DateParseError, match="declared"):
        load_panel(f)


def test_schema_column_map(tmp_path):
    f = write_csv(tmp_path / "m.csv", ["AT,2006-Q1,gdp,5"], header="iso,period,series,obs")
    p = load_panel(f, {"country": "iso", "date": "period", "variable": "series", "value": "obs"})
    assert p.get("AT", "gdp").iloc[0] == 5.0


# -- interpolation -------------------------------------------------------------

def test_linear_uniform_rate():
    q = interpolate_annual(annual([100.0, 104.0]), "linear", anchor_quarter=4)
    between = q[quarter("2007-Q1"):quarter("2007-Q4")].to_numpy()
    np.testing.assert_allclose(between, [101, 102, 103, 104], rtol=0, atol=1e-12)


def test_linear_edges_held_flat():
    q = interpolate_annual(annual([100.0, 104.0]), "linear", anchor_quarter=4)
    assert q[quarter("2006-Q1")] == q[quarter("2006-Q3")] == 100.0


def test_flat_repeats_value():
    q = interpolate_annual(annual([100.0]), "flat")
    assert q.tolist() == [100.0] * 4


def test_linear_equal_anchors_constant():
    q = interpolate_annual(annual([7.0, 7.0]), "linear")
    assert np.all(q.to_numpy() == 7.0)


def test_linear_needs_two_points():
    with pytest.raises(InsufficientDataError):
        interpolate_annual(annual([1.0]), "linear")


def test_bad_anchor_quarter():
    with pytest.raises(ConfigError):
        interpolate_annual(annual([1.0, 2.0]), "linear", anchor_quarter=5)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=12),
       st.integers(1, 4), st.sampled_from(["linear", "flat"]))
def test_anchor_roundtrip_exact(values, anchor, method):
    q = interpolate_annual(annual(values), method, anchor_quarter=anchor)
    back = [q[pd.Period(year=2006 + i, quarter=anchor, freq="Q")] for i in range(len(values))]
    assert back == [float(v) for v in values]


# -- monthly --------------------------------------------------------------------

def test_monthly_mean():
    assert aggregate_monthly(monthly([1, 2, 3])).iloc[0] == 2.0


def test_monthly_constant():
    assert aggregate_monthly(monthly([0.5, 0.5, 0.5])).iloc[0] == 0.5


def test_monthly_gap_lists_months():
    with pytest.raises(GapError) as exc:
        aggregate_monthly(monthly([1, 2]))
    assert exc.value.gaps == ["2006-M03"]


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e9, 1e9, allow_nan=False), st.integers(1, 8))
def test_monthly_constant_property(c, quarters):
    q = aggregate_monthly(monthly([c] * (3 * quarters)))
    assert np.all(q.to_numpy() == c)


# -- transforms ---------------------------------------------------------------------

def test_log_transform_values():
    assert transform(1.0, "log_times_100") == 0.0
    assert transform(math.e, "log_times_100") == pytest.approx(100.0, abs=1e-12)
    assert transform(50.0, "ratio", 200.0) == 0.25


def test_log_nonpositive_reports_location():
    s = pd.Series([1.0, 0.0], index=quarter_range("2006-Q1", "2006-Q2"))
    with pytest.raises(DomainError, match="AT/gdp.*2006-Q2"):
        transform(s, "log_times_100", key="AT/gdp")


def test_ratio_zero_denominator():
    with pytest.raises(DomainError):
        transform(np.array([1.0, 2.0]), "ratio", np.array([1.0, 0.0]))


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-300, 1e300), st.floats(1e-300, 1e300))
def test_log_monotone(x, y):
    if x < y:
        assert transform(x, "log_times_100") < transform(y, "log_times_100")


# -- donors ---------------------------------------------------------------------------

def donor_panel():
    p = LongPanel()
    idx = quarter_range("2006-Q1", "2006-Q2")
    p.put("LV", "wui", pd.Series([2.0, 1.0], index=idx))
    p.put("LT", "wui", pd.Series([4.0, 3.0], index=idx))
    return p


def test_donor_mean():
    s = impute_from_donors(donor_panel(), "EE", ["LV", "LT"], "wui")
    assert s.tolist() == [3.0, 2.0]


def test_single_donor():
    s = impute_from_donors(donor_panel(), "EE", ["LT"], "wui")
    assert s.tolist() == [4.0, 3.0]


def test_empty_donors():
    with pytest.raises(ConfigError):
        impute_from_donors(donor_panel(), "EE", [], "wui")


def test_default_donor_mapping():
    assert DEFAULT_DONORS[("EE", "wui")] == ("LV", "LT")
    assert DEFAULT_DONORS[("LU", "wui")] == ("BE", "NL")


def test_apply_donor_rules_fills_only_absent():
    out = apply_donor_rules(donor_panel())
    assert out.get("EE", "wui").tolist() == [3.0, 2.0]
    assert ("LU", "wui") not in {(k.country, k.variable) for k in out.series}


# -- balancing -------------------------------------------------------------------------

def full_panel(countries=("BE", "AT"), start="2006-Q1", end="2023-Q4", variables=("y", "x")):
    p = LongPanel()
    idx = quarter_range(start, end)
    rng = np.random.default_rng(0)
    for c in countries:
        for v in variables:
            p.put(c, v, pd.Series(rng.standard_normal(len(idx)), index=idx))
    return p


def test_full_span_length():
    d = align_balanced(full_panel(), "2006-Q1", "2023-Q4")
    assert d.shape == (2, 72, 2)
    assert d.countries == ("AT", "BE") and d.variables == ("x", "y")


def test_span_to_2019():
    d = align_balanced(full_panel(), "2006-Q1", "2019-Q4")
    assert d.shape[1] == 56


def test_gap_report_lists_every_cell():
    p = full_panel()
    s = p.get("AT", "y").copy()
    s.iloc[[3, 10]] = np.nan
    p.put("AT", "y", s)
    p.series.pop(next(k for k in p.series if k.country == "BE" and k.variable == "x"))
    with pytest.raises(GapError) as exc:
        align_balanced(p, "2006-Q1", "2023-Q4")
    assert set(exc.value.gaps) == {"AT/y/2006-Q4", "AT/y/2008-Q3", "BE/x: series absent"}


def test_panel_values_read_only():
    d = align_balanced(full_panel(), "2006-Q1", "2006-Q4")
    with pytest.raises(ValueError):
        d.values[0, 0, 0] = 1.0


@settings(max_examples=20, deadline=None)
@given(st.permutations(list(range(8))))
def test_align_invariant_to_row_order(perm):
    base = full_panel(countries=("AT", "BE"), start="2006-Q1", end="2006-Q2")
    rows = [(k, p, v) for k, s in base.series.items() for p, v in s.items()]
    shuffled = LongPanel()
    grouped = {}
    for i in perm:
        k, p, v = rows[i]
        grouped.setdefault(k, {})[p] = v
    for k, obs in grouped.items():
        shuffled.series[k] = pd.Series(obs)
    a = align_balanced(base, "2006-Q1", "2006-Q2")
    b = align_balanced(shuffled, "2006-Q1", "2006-Q2")
    np.testing.assert_array_equal(a.values, b.values)


def test_csv_roundtrip_bit_exact(tmp_path):
    d = align_balanced(full_panel(), "2006-Q1", "2010-Q4")
    d.write_csv(tmp_path / "out.csv")
    back = align_balanced(load_panel(tmp_path / "out.csv"), "2006-Q1", "2010-Q4")
    np.testing.assert_array_equal(back.values, d.values)


def test_select_filters_commute():
    d = align_balanced(full_panel(countries=("AT", "BE", "LV")), "2006-Q1", "2023-Q4")
    a = d.select(exclude_countries=["LV"]).select(end="2019-Q4")
    b = d.select(end="2019-Q4").select(exclude_countries=["LV"])
    assert a.countries == b.countries and a.quarters == b.quarters
    np.testing.assert_array_equal(a.values, b.values)


def test_to_quarterly_mixed(tmp_path):
    rows = ["AT,2006,gini,30", "AT,2007,gini,34"] + [f"AT,2006-M{m:02d},clifs,{m}" for m in range(1, 13)]
    p = to_quarterly(load_panel(write_csv(tmp_path / "m.csv", rows)), "linear")
    assert p.frequency("gini") == p.frequency("clifs") == "quarterly"
    assert p.get("AT", "clifs").tolist() == [2.0, 5.0, 8.0, 11.0]
    assert p.get("AT", "gini")[quarter("2007-Q2")] == 32.0


def test_write_long_csv_header(tmp_path):
    write_long_csv(donor_panel(), tmp_path / "x.csv")
    assert (tmp_path / "x.csv").read_text().splitlines()[0] == "country,date,variable,value"
