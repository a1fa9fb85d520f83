import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from finineq.errors import ConfigError, DataError, DomainError, UndefinedGiniError
from finineq.inequality import (MEASURES, MicroRecord, component_gini, compute_measures,
                                equivalence_factor, equivalise, gini, gini_pairwise,
                                household_factors, income_share_curve, quintile_assignment,
                                quintile_gini, read_microdata, records_frame, skill_premium,
                                weighted_percentile, write_microdata)
from finineq.synthetic import MicroParams, lognormal_gini, simulate_microdata


def person(hh, pid, age, labor=0.0, fin=0.0, skill=None, weight=1.0):
    return MicroRecord(hh, pid, "AT", 2020, weight, age, skill, labor, fin)


positive = st.floats(0.01, 1e6, allow_nan=False)
weight_st = st.floats(0.01, 100.0, allow_nan=False)


# -- equivalence scale ---------------------------------------------------------------

@pytest.mark.parametrize("ages,factor", [([40], 1.0), ([40, 38], 1.5), ([40, 38, 15, 10], 2.3),
                                         ([10], 1.0), ([8, 12], 1.3), ([14, 13], 1.3)])
def test_equivalence_factor(ages, factor):
    assert equivalence_factor(ages) == pytest.approx(factor, abs=1e-15)


def test_empty_household():
    with pytest.raises(DomainError):
        equivalence_factor([])


def test_equivalise_examples():
    df = records_frame([person(1, 1, 40, 1000.0), person(2, 2, 40, 600.0), person(2, 3, 38, 900.0),
                        person(3, 4, 50), person(3, 5, 9)])
    eq = equivalise(df, "total")
    assert eq.tolist() == [1000.0, 1000.0, 1000.0, 0.0, 0.0]


def test_equivalise_components():
    df = records_frame([person(1, 1, 40, 100.0, 50.0), person(1, 2, 38, 200.0, 0.0)])
    assert equivalise(df, "labor").tolist() == [200.0, 200.0]
    assert equivalise(df, "financial").tolist() == [pytest.approx(100 / 3)] * 2


def test_equivalise_missing_income_names_person():
    df = records_frame([person(1, 7, 40, 100.0)])
    df.loc[0, "income_financial"] = np.nan
    with pytest.raises(DataError, match="person 7"):
        equivalise(df)


def test_equivalise_unknown_component():
    with pytest.raises(ConfigError):
        equivalise(records_frame([person(1, 1, 40, 1.0)]), "pension")


def test_vectorised_factor_matches_scalar_rule():
    df = simulate_microdata(300, seed=5)
    fac = household_factors(df)
    eq = equivalise(df, "total")
    inc = df.groupby("household_id")[["income_labor", "income_financial"]].sum().sum(axis=1)
    per_hh = eq.groupby(df["household_id"]).first()
    hh = per_hh.index
    np.testing.assert_allclose(per_hh * fac.droplevel([0, 1]).loc[hh], inc.loc[hh], rtol=1e-14)


def test_members_share_value():
    df = simulate_microdata(200, seed=2)
    eq = equivalise(df)
    assert (eq.groupby(df["household_id"]).nunique() == 1).all()


# -- Gini --------------------------------------------------------------------------------

def test_gini_examples():
    assert gini([1, 2, 3, 4, 5]) == pytest.approx(80 / 3, abs=1e-12)
    assert gini([0, 10], [1, 1]) == pytest.approx(50.0, abs=1e-12)
    assert gini([3, 3, 3], [1, 5, 2]) == 0.0


def test_gini_errors():
    with pytest.raises(UndefinedGiniError):
        gini([0, 0, 0])
    with pytest.raises(DomainError):
        gini([1, -1])
    with pytest.raises(DomainError):
        gini([], [])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(positive, weight_st), min_size=1, max_size=60))
def test_gini_matches_pairwise(rows):
    x, w = np.array(rows).T
    assert abs(gini(x, w) - gini_pairwise(x, w)) < 1e-10


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(positive, weight_st), min_size=2, max_size=40), st.floats(1e-3, 1e3))
def test_gini_scale_invariance(rows, c):
    x, w = np.array(rows).T
    assert gini(c * x, w) == pytest.approx(gini(x, w), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.lists(positive, min_size=2, max_size=40))
def test_gini_replication_invariance(x):
    x = np.array(x)
    doubled = gini(np.concatenate([x, x]))
    assert abs(doubled - gini(x)) < 1e-12 * 100
    assert abs(gini(x, np.full(x.size, 2.0)) - gini(x)) < 1e-12 * 100


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(1, 10_000), min_size=3, max_size=30, unique=True), st.data())
def test_pigou_dalton(vals, data):
    x = np.sort(np.array(vals, dtype=float))
    i = data.draw(st.integers(0, len(x) - 2))
    gap = x[i + 1] - x[i]
    t = gap / 4
    y = x.copy()
    y[i] += t
    y[i + 1] -= t
    assert gini(y) < gini(x)


# -- percentiles ------------------------------------------------------------------------

def test_percentile_examples():
    assert weighted_percentile(np.arange(1, 11), None, 90) == 9
    assert weighted_percentile([4.2], [3.0], 37) == 4.2
    assert weighted_percentile([1, 2, 9], [0, 0, 1], 5) == 9


def test_percentile_empty():
    with pytest.raises(DomainError):
        weighted_percentile([], [], 50)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=80), st.integers(1, 99))
def test_percentile_order_statistic(x, p):
    x = np.array(x)
    k = math.ceil(len(x) * p / 100)
    assert weighted_percentile(x, np.ones_like(x), p) == np.sort(x)[k - 1]


# -- quintiles ---------------------------------------------------------------------------

def test_quintile_uniform_zero():
    x = np.full(50, 7.0)
    for q in range(1, 6):
        if (quintile_assignment(x, None) == q).any():
            assert quintile_gini(x, None, q) == 0.0


def test_quintile_one_of_hundred():
    x = np.arange(1.0, 101.0)
    expected = gini_pairwise(np.arange(1.0, 21.0))
    assert expected == pytest.approx(100 * (2 * 2870 / (20 * 210) - 21 / 20), abs=1e-12)
    assert quintile_gini(x, None, 1) == pytest.approx(expected, abs=1e-12)
    assert np.bincount(quintile_assignment(x, None))[1:].tolist() == [20] * 5


def test_cut_point_goes_low():
    x = np.array([1.0, 2.0, 2.0, 2.0, 3.0])
    groups = quintile_assignment(x, None)
    assert groups.tolist() == [1, 2, 2, 2, 5]


def test_quintile_out_of_range():
    with pytest.raises(ValueError):
        quintile_gini([1, 2, 3], None, 6)


def test_empty_quintile_error():
    with pytest.raises(DomainError):
        quintile_gini(np.full(10, 1.0), None, 3)


# -- component Gini ----------------------------------------------------------------------

def test_component_gini_cases():
    df = records_frame([person(1, 1, 40, 10.0, 0.0), person(2, 2, 40, 10.0, 5.0),
                        person(3, 3, 40, 10.0, 10.0)])
    assert component_gini(df, "financial") == pytest.approx(gini([5.0, 10.0]), abs=1e-12)
    single = records_frame([person(1, 1, 40, 10.0, 0.0), person(2, 2, 40, 10.0, 3.0)])
    assert component_gini(single, "financial") == 0.0
    none = records_frame([person(1, 1, 40, 10.0), person(2, 2, 30, 5.0)])
    with pytest.raises(UndefinedGiniError):
        component_gini(none, "financial")


# -- skill premium ------------------------------------------------------------------------

def test_skill_premium_cases():
    df = records_frame([person(1, 1, 40, 100.0, skill=4), person(2, 2, 40, 100.0, skill=1)])
    assert skill_premium(df) == 0.0
    df = records_frame([person(1, 1, 40, 100.0 * math.e, skill=3), person(2, 2, 30, 100.0, skill=2),
                        person(3, 3, 70, 1e6, skill=4), person(4, 4, 30, 5e5, skill=None)])
    assert skill_premium(df) == pytest.approx(1.0, abs=1e-12)
    assert skill_premium(df, log=False) == pytest.approx(math.e, rel=1e-12)


def test_skill_premium_weighted_means():
    df = records_frame([person(1, 1, 40, 300.0, skill=3, weight=1.0),
                        person(2, 2, 40, 600.0, skill=4, weight=2.0),
                        person(3, 3, 40, 100.0, skill=1)])
    assert skill_premium(df, log=False) == pytest.approx(500.0 / 100.0)


def test_skill_premium_empty_group():
    df = records_frame([person(1, 1, 40, 100.0, skill=4)])
    with pytest.raises(DomainError):
        skill_premium(df)


def test_skill_premium_needs_column():
    df = records_frame([person(1, 1, 40, 100.0, skill=4)]).drop(columns="skill_level")
    with pytest.raises(ConfigError):
        skill_premium(df)


# -- share curve ------------------------------------------------------------------------------

def test_share_curve_single_holder():
    recs = [person(i, i, 40, float(i + 1), 0.0) for i in range(200)]
    recs[197] = person(197, 197, 40, 148.0, 50.0)  # total 198, CDF 0.99 -> bucket 99
    shares, top = income_share_curve(records_frame(recs))
    assert shares[98] == 1.0 and shares[:98].sum() == 0.0 and top == 0.0


def test_share_curve_uniform():
    recs = [person(i, i, 40, float(i + 1), 1.0) for i in range(1000)]
    shares, top = income_share_curve(records_frame(recs))
    np.testing.assert_allclose(shares, 0.01, atol=1e-12)
    assert top == pytest.approx(0.01, abs=1e-12)


def test_share_curve_two_people():
    df = records_frame([person(1, 1, 40, 10.0, 30.0), person(2, 2, 40, 100.0, 70.0)])
    shares, top = income_share_curve(df)
    assert shares[49] == pytest.approx(0.3) and top == pytest.approx(0.7)


def test_share_curve_zero_financial():
    with pytest.raises(DomainError):
        income_share_curve(records_frame([person(1, 1, 40, 10.0)]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(20, 300))
def test_share_curve_sums_to_one(seed, n):
    df = simulate_microdata(n, MicroParams(participation=0.8), seed=seed)
    assume(df["income_financial"].sum() > 0)
    shares, top = income_share_curve(df)
    assert np.all(shares >= 0) and top >= 0
    assert abs(shares.sum() + top - 1.0) < 1e-12


# -- microdata simulator and end-to-end measures -------------------------------------------------

def test_sigma_zero_labor_equal():
    df = simulate_microdata(300, MicroParams(sigma=0.0), seed=1)
    earners = df["income_labor"] > 0
    assert gini(df.loc[earners, "income_labor"], df.loc[earners, "weight"]) == pytest.approx(0.0, abs=1e-10)


def test_no_participation_undefined():
    df = simulate_microdata(100, MicroParams(participation=0.0), seed=1)
    with pytest.raises(UndefinedGiniError):
        component_gini(df, "financial")


def test_lognormal_closed_form():
    sigma = 0.6
    x = np.random.default_rng(11).lognormal(0.0, sigma, 100_000)
    assert abs(gini(x) - lognormal_gini(sigma)) < 0.5


def test_compute_measures_long_format(tmp_path):
    df = simulate_microdata(150, seed=3, countries=("AT", "BE"), years=(2019, 2020))
    write_microdata(df, tmp_path / "m.csv")
    back = read_microdata(tmp_path / "m.csv")
    frame = compute_measures(back)
    assert list(frame.columns) == ["country", "year", "measure", "value"]
    assert len(frame) == 4 * len(MEASURES)
    assert set(frame["measure"]) == set(MEASURES)


def test_compute_measures_context_in_error():
    df = records_frame([person(1, 1, 40, 10.0, 0.0)])
    with pytest.raises(DataError, match="AT/2020"):
        compute_measures(df, ["gini_financial"])


def test_read_microdata_missing_columns(tmp_path):
    pd.DataFrame({"household_id": [1]}).to_csv(tmp_path / "m.csv", index=False)
    with pytest.raises(DataError, match="missing columns"):
        read_microdata(tmp_path / "m.csv")


def test_negative_weight_record():
    with pytest.raises(DomainError):
        MicroRecord(1, 1, "AT", 2020, -1.0, 30, None, 1.0, 0.0)
