from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from macrohpi.errors import DataError
from macrohpi.metrics import (
    FitStatistics, LewisCategory, RunMetrics, aggregate, chi2_pair, correlation, lewis_category,
    mae, mape, mape_abs, residual_sd, rms, run_metrics, statistics_csv,
)


def two_pass_oracle(p, o):
    """Plain-Python two-pass reference values."""
    n = len(p)
    r = [oi - pi for pi, oi in zip(p, o)]
    rms_ = math.sqrt(sum(x * x for x in r) / n)
    mae_ = sum(abs(x) for x in r) / n
    mean_r = sum(r) / n
    sd_ = math.sqrt(sum((x - mean_r) ** 2 for x in r) / n)
    mape_ = sum(abs(pi - oi) / oi for pi, oi in zip(p, o)) / n
    return rms_, mae_, sd_, mape_


def test_metrics_match_oracle_on_random_vectors():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(2, 60))
        o = rng.normal(10, 5, n)
        o[o == 0] = 1.0
        p = o + rng.normal(0, 2, n)
        ref = two_pass_oracle(p.tolist(), o.tolist())
        got = (rms(p, o), mae(p, o), residual_sd(p, o), mape(p, o))
        for g, r in zip(got, ref):
            assert g == pytest.approx(r, rel=1e-12, abs=1e-300)


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@given(st.integers(1, 40).flatmap(lambda n: st.tuples(arrays(float, n, elements=finite),
                                                       arrays(float, n, elements=finite))))
def test_rms_at_least_mae(pair):
    p, o = pair
    assert rms(p, o) >= mae(p, o) * (1 - 1e-12)


def test_known_values():
    p, o = np.array([1.0, 2.0, 3.0]), np.array([2.0, 2.0, 5.0])
    assert rms(p, o) == pytest.approx(math.sqrt(5 / 3))
    assert mae(p, o) == pytest.approx(1.0)
    assert mape(p, o) == pytest.approx((0.5 + 0 + 0.4) / 3)


def test_mape_signed_divisor_and_abs_variant():
    p, o = np.array([-1.0]), np.array([-2.0])
    assert mape(p, o) == pytest.approx(-0.5)
    assert mape_abs(p, o) == pytest.approx(0.5)


def test_mape_zero_observation():
    with pytest.raises(ZeroDivisionError):
        mape([1.0], [0.0])


def test_length_mismatch_and_nonfinite():
    with pytest.raises(ValueError):
        rms([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        rms([np.nan], [1.0])


def test_correlation_constant_is_nan():
    assert math.isnan(correlation([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]))
    assert correlation([1.0, 2.0, 3.0], [2.0, 4.0, 6.0]) == pytest.approx(1.0)


@pytest.mark.parametrize("value,band", [
    (0.0, LewisCategory.HIGHLY_ACCURATE),
    (0.0999, LewisCategory.HIGHLY_ACCURATE),
    (0.1, LewisCategory.GOOD),
    (0.1999, LewisCategory.GOOD),
    (0.2, LewisCategory.REASONABLE),
    (0.5, LewisCategory.INACCURATE),
    (3.0, LewisCategory.INACCURATE),
])
def test_lewis_bands(value, band):
    assert lewis_category(value) is band


def test_chi2_matches_contingency_oracle():
    rng = np.random.default_rng(3)
    p, o = rng.normal(size=200), rng.normal(0.3, 1.2, 200)
    pv, s = chi2_pair(p, o, bins=10)
    edges = np.linspace(min(p.min(), o.min()), max(p.max(), o.max()), 11)
    table = np.vstack([np.histogram(p, edges)[0], np.histogram(o, edges)[0]])
    table = table[:, table.sum(axis=0) > 0]
    ref_stat = stats.chi2_contingency(table, correction=False)[0]
    assert s == pytest.approx(ref_stat / 200)
    assert pv == pytest.approx(stats.chi2.sf(ref_stat, 9))


def test_chi2_identical_samples():
    x = np.linspace(0, 1, 50)
    pv, s = chi2_pair(x, x, 5)
    assert s == 0.0 and pv == 1.0


def test_chi2_errors():
    with pytest.raises(ValueError):
        chi2_pair(np.arange(5.0), np.arange(5.0), bins=10)
    with pytest.raises(DataError):
        chi2_pair(np.ones(30), np.ones(30), bins=10)


def test_run_metrics_degenerate_cases():
    m = run_metrics(np.ones(10), np.ones(10))
    assert m.rms == 0.0 and math.isnan(m.cor) and math.isnan(m.chip)
    m = run_metrics([1.0, 2.0], [0.0, 2.0])
    assert math.isnan(m.mape)


def test_aggregate_population_std():
    runs = [RunMetrics(c, r, 1.0, 0.1, 0.5, 0.2, sd) for c, r, sd in
            [(0.9, 1.0, 3.0), (0.8, 3.0, 4.0)]]
    st_ = aggregate(runs)
    assert st_.m_rms == pytest.approx(2.0)
    assert st_.s_rms == pytest.approx(1.0)  # population, not sample
    assert st_.s_cor == pytest.approx(0.05)
    assert st_.sd == 4.0
    assert aggregate(runs, final_sd=7.0).sd == 7.0
    assert st_.lewis is LewisCategory.GOOD


def test_aggregate_order_independent_mean():
    rng = np.random.default_rng(0)
    vals = rng.normal(size=600)
    runs = [RunMetrics(0.5, v, 1, 1, 1, 1, 1) for v in vals]
    a = aggregate(runs).m_rms
    b = aggregate(runs[::-1]).m_rms
    assert a == b


def test_statistics_csv_layout():
    st_ = FitStatistics(1, 0, 2, 0, 3, 4, 0.1, float("nan"), 0.2)
    text = statistics_csv([("CH", st_)])
    head, row = text.strip().splitlines()
    assert head == "country,M_COR,S_COR,M_RMS,S_RMS,SD,M_MAE,M_MAPE,M_CHIp,M_CHIs"
    assert row.split(",")[8] == "NA"
