from __future__ import annotations

import math

import numpy as np
import pytest
from statsmodels.tsa.api import VAR

from macrohpi.baselines import (
    Deterministic, ForecastMode, METHOD_COLUMNS, benchmark_table, fit_glm, fit_var, forecast_var,
    linear_inversion, perturbation_factors, perturbed_glm_ensemble, qr_lstsq,
)
from macrohpi.dataset import from_arrays
from macrohpi.errors import RankDeficiencyError


def normal_equations(Z, y):
    return np.linalg.solve(Z.T @ Z, Z.T @ y)


# ---------------------------------------------------------------------------
# linear inversion and GLM


def test_linear_fits_match_normal_equations():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n, d = int(rng.integers(10, 80)), int(rng.integers(1, 5))
        X = rng.normal(size=(n, d))
        y = X @ rng.normal(size=d) + 1.5 + rng.normal(size=n)
        data = from_arrays(X, y)
        li = linear_inversion(data)
        np.testing.assert_allclose(li.coef, normal_equations(X, y), rtol=1e-10, atol=1e-10)
        Z = np.column_stack([np.ones(n), X])
        beta = normal_equations(Z, y)
        glm = fit_glm(data)
        np.testing.assert_allclose([glm.intercept, *glm.coef], beta, rtol=1e-10, atol=1e-10)
        resid = y - Z @ beta
        cov = resid @ resid / (n - d - 1) * np.linalg.inv(Z.T @ Z)
        np.testing.assert_allclose([glm.intercept_se, *glm.se], np.sqrt(np.diag(cov)), rtol=1e-8)


def test_residuals_orthogonal_to_design():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(60, 3)) * [1.0, 1e6, 1e-3]
    y = rng.normal(size=60)
    glm = fit_glm(from_arrays(X, y))
    Z = np.column_stack([np.ones(60), X])
    assert np.all(np.abs(Z.T @ glm.residuals) / np.linalg.norm(Z, axis=0) < 1e-10)


def test_exact_line_recovered():
    x = np.arange(1.0, 41.0)
    li = linear_inversion(from_arrays(x[:, None], 2 * x))
    assert li.coef[0] == pytest.approx(2.0, rel=1e-12)
    glm = fit_glm(from_arrays(x[:, None], 3 + 2 * x))
    assert glm.intercept == pytest.approx(3.0, rel=1e-10)
    assert glm.coef[0] == pytest.approx(2.0, rel=1e-12)
    assert glm.se[0] == pytest.approx(0.0, abs=1e-10)


def test_glm_intercept_is_mean_on_centred_features():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 2))
    X -= X.mean(axis=0)
    y = rng.normal(size=50) + 4
    assert fit_glm(from_arrays(X, y)).intercept == pytest.approx(y.mean(), rel=1e-12)


def test_rank_deficiency_names_columns():
    rng = np.random.default_rng(3)
    a = rng.normal(size=50)
    X = np.column_stack([a, rng.normal(size=50), 2 * a])
    with pytest.raises(RankDeficiencyError) as exc:
        fit_glm(from_arrays(X, rng.normal(size=50), ["A", "B", "C"]))
    assert set(exc.value.columns) & {"A", "C"}
    assert set(exc.value.columns) <= {"A", "C", "(Intercept)", "B"}
    assert "collinear" in str(exc.value)


def test_qr_lstsq_zero_column():
    with pytest.raises(RankDeficiencyError, match="Z"):
        qr_lstsq(np.column_stack([np.ones(5), np.zeros(5)]), np.ones(5), ["one", "Z"])


def test_coefficient_csv():
    text = fit_glm(from_arrays(np.arange(20.0)[:, None], np.arange(20.0) * 3 + 1, ["x"])).to_csv()
    lines = text.splitlines()
    assert lines[0] == "term,estimate,std_error"
    assert lines[1].startswith("(Intercept),")
    assert len(lines) == 3


# ---------------------------------------------------------------------------
# VAR


def test_var_recovers_ar1():
    rng = np.random.default_rng(4)
    y = np.zeros(500)
    for t in range(1, 500):
        y[t] = 0.5 * y[t - 1] + rng.normal()
    m = fit_var(y, p=1, deterministic="const")
    assert m.coefs[0, 0, 0] == pytest.approx(0.5, abs=0.05)


def test_var_exact_trend_is_rank_deficient():
    # lags of an exact line are a combination of the constant and the trend
    t = np.arange(30.0)
    with pytest.raises(RankDeficiencyError, match="y1.l1|trend|const"):
        fit_var(2 + 0.5 * t, p=1)


def test_var_near_trend_extrapolates_slope():
    rng = np.random.default_rng(0)
    t = np.arange(60.0)
    panel = np.column_stack([2 + 0.5 * t, -1 + 0.25 * t]) + 1e-6 * rng.normal(size=(60, 2))
    m = fit_var(panel, p=1)
    assert np.sqrt(np.mean(m.residuals ** 2)) < 1e-5
    fc = forecast_var(m, panel, 5)
    future = np.arange(60.0, 65.0)
    np.testing.assert_allclose(fc.mean[:, 0], 2 + 0.5 * future, atol=1e-4)
    np.testing.assert_allclose(fc.mean[:, 1], -1 + 0.25 * future, atol=1e-4)


def test_var_matches_statsmodels():
    rng = np.random.default_rng(5)
    n = 120
    e = rng.normal(size=(n, 3))
    Y = np.zeros((n, 3))
    A = np.array([[0.5, 0.1, 0.0], [0.0, 0.4, 0.2], [0.1, 0.0, 0.3]])
    for t in range(1, n):
        Y[t] = A @ Y[t - 1] + e[t] + 0.01 * t
    ours = fit_var(Y, p=2, deterministic="both")
    ref = VAR(Y).fit(2, trend="ct")
    np.testing.assert_allclose(ours.coefs, ref.coefs, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(ours.sigma, ref.sigma_u, rtol=1e-8)
    fc = forecast_var(ours, Y, 6)
    mean, lo, _ = ref.forecast_interval(Y[-2:], 6, alpha=0.05)
    np.testing.assert_allclose(fc.mean, mean, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(fc.se, np.sqrt(np.diagonal(ref.forecast_cov(6), axis1=1, axis2=2)),
                               rtol=1e-8)


def _zero_var():
    from macrohpi.baselines import VarModel
    return VarModel(1, Deterministic.CONST, np.zeros((1, 2, 2)), np.array([[3.0], [1.0]]),
                    ("a", "b"), np.eye(2), 100)


def test_zero_coefficient_forecast_constant_and_se_not_shrinking():
    m = _zero_var()
    fc = forecast_var(m, np.ones((3, 2)), 5)
    np.testing.assert_array_equal(fc.mean, [[3.0, 1.0]] * 5)
    assert np.all(np.diff(fc.se[:, 0]) >= 0)


def test_forecast_matches_hand_recursion():
    from macrohpi.baselines import VarModel
    a1, a2, c = 0.6, -0.2, 1.0
    m = VarModel(2, Deterministic.CONST, np.array([[[a1]], [[a2]]]), np.array([[c]]), ("y",),
                 np.array([[1.0]]), 50)
    hist = [4.0, 5.0]
    fc = forecast_var(m, hist, 4)
    y = list(hist)
    for _ in range(4):
        y.append(c + a1 * y[-1] + a2 * y[-2])
    np.testing.assert_allclose(fc.mean[:, 0], y[2:], rtol=1e-14)
    psi = [1.0, a1, a1 * a1 + a2, a1 * (a1 * a1 + a2) + a2 * a1]
    np.testing.assert_allclose(fc.se[:, 0], np.sqrt(np.cumsum(np.square(psi))), rtol=1e-12)


def test_forecast_se_monotone():
    rng = np.random.default_rng(6)
    Y = rng.normal(size=(80, 2)).cumsum(axis=0)
    fc = forecast_var(fit_var(Y, p=2), Y, 8)
    assert np.all(np.diff(fc.se, axis=0) >= -1e-12)


def test_forecast_horizon_zero():
    fc = forecast_var(_zero_var(), np.ones((2, 2)), 0)
    assert fc.mean.shape == (0, 2) and fc.se.shape == (0, 2)


def test_conditional_equals_iterated_when_fed_iterated_path():
    rng = np.random.default_rng(7)
    Y = rng.normal(size=(80, 3)).cumsum(axis=0)
    m = fit_var(Y, p=2)
    it = forecast_var(m, Y, 5)
    cond = forecast_var(m, Y, 5, ForecastMode.CONDITIONAL, it.mean[:, 1:], target=0)
    np.testing.assert_allclose(cond.mean[:, 0], it.mean[:, 0], rtol=1e-12)
    cond_full = forecast_var(m, Y, 5, "conditional", it.mean, target=0)
    np.testing.assert_array_equal(cond_full.mean[:, 0], cond.mean[:, 0])


def test_conditional_requires_exogenous():
    with pytest.raises(ValueError):
        forecast_var(_zero_var(), np.ones((2, 2)), 3, ForecastMode.CONDITIONAL)


# ---------------------------------------------------------------------------
# perturbation ensemble


def _glm_data(n=80, seed=8):
    rng = np.random.default_rng(seed)
    X = rng.normal(5, 1, size=(n, 2))
    return from_arrays(X, 1 + X @ [2.0, -1.0] + 0.3 * rng.normal(size=n), ["A", "B"])


def test_factors_bounded():
    f = perturbation_factors(np.random.default_rng(0), (1000, 3), 0.1)
    assert f.min() >= 0.9 and f.max() <= 1.1
    assert f.std() == pytest.approx(0.1 / 3, rel=0.1)


def test_tiny_amplitude_reproduces_base():
    data = _glm_data()
    ens = perturbed_glm_ensemble(data, runs=3, amplitude=1e-9)
    base = [ens.base.intercept, *ens.base.coef]
    np.testing.assert_allclose(ens.mean, base, rtol=1e-6)


def test_single_run_deterministic():
    data = _glm_data()
    a = perturbed_glm_ensemble(data, runs=1, seed=3)
    b = perturbed_glm_ensemble(data, runs=1, seed=3)
    assert a.coefficients.tobytes() == b.coefficients.tobytes()


def test_spread_scales_with_amplitude():
    data = _glm_data()
    sd = [perturbed_glm_ensemble(data, runs=300, amplitude=a).std[1] for a in (0.05, 0.10, 0.20)]
    assert sd[1] / sd[0] == pytest.approx(2.0, rel=0.25)
    assert sd[2] / sd[1] == pytest.approx(2.0, rel=0.25)


@pytest.mark.slow
def test_large_ensemble_centred_on_base():
    data = _glm_data()
    ens = perturbed_glm_ensemble(data, runs=2000, amplitude=0.1)
    base = np.array([ens.base.intercept, *ens.base.coef])
    assert np.all(np.abs(ens.mean - base) <= 2 * ens.std)
    lo, mid, hi = ens.envelope()
    assert np.all(lo <= mid) and np.all(mid <= hi)
    assert ens.to_csv().splitlines()[0] == "term,base,mean,std"


def test_ensemble_rejects_bad_arguments():
    with pytest.raises(ValueError):
        perturbed_glm_ensemble(_glm_data(), amplitude=0.0)
    with pytest.raises(ValueError):
        perturbed_glm_ensemble(_glm_data(), runs=0)


# ---------------------------------------------------------------------------
# benchmark table


def test_benchmark_constant_target():
    rng = np.random.default_rng(9)
    data = from_arrays(rng.normal(size=(60, 2)), np.full(60, 5.0), ["A", "B"])
    tab = benchmark_table(data, runs=2)
    for k in ("GLM", "ML_KNN", "ML_TREEBAG", "OBSERVED"):
        np.testing.assert_allclose(tab.columns[k], 5.0, atol=1e-9)
    # a constant target column makes the VAR design collinear with the intercept
    assert "VAR" in tab.notes and np.all(np.isnan(tab.columns["VAR"]))
    assert len(tab.quarters) == 4


def test_benchmark_declining_target():
    n = 60
    rng = np.random.default_rng(10)
    rate = (np.arange(n) % 20) / 4.0
    X = np.column_stack([rate, rng.normal(size=n)])
    y = 20.0 - 3.0 * rate + 0.01 * rng.normal(size=n)
    tab = benchmark_table(from_arrays(X, y, ["rate", "noise"]), runs=2)
    assert set(tab.columns) == set(METHOD_COLUMNS)
    assert all(len(v) == 4 for v in tab.columns.values())
    assert tab.decreasing("OBSERVED")
    sc = tab.sign_correct()
    # the no-intercept inversion cannot represent an offset line, so LI is not checked
    for k in ("GLM", "ML_KNN", "ML_TREEBAG"):
        assert sc[k] is True
        assert tab.decreasing(k)
    lines = tab.to_csv().splitlines()
    assert lines[0].split(",")[:8] == ["quarter", "VAR", "VAR_SE", "LI", "GLM", "ML_KNN",
                                       "ML_TREEBAG", "OBSERVED"]
    assert lines[5].startswith("sign_correct")
    assert math.isfinite(tab.slope("GLM"))
