"""Model diagnostics: residual unit-root test, input permutation and
hold-out prediction of the last quarters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .dataset import CountryDataset, MIN_PANEL_ROWS, Quarter
from .errors import DataError, NumericalError
from .metrics import FitStatistics, RunMetrics, aggregate, run_metrics
from .models.learners import Learner, get_learner

# ---------------------------------------------------------------------------
# augmented Dickey-Fuller


class AdfRegression(str, Enum):
    CONST = "c"
    CONST_TREND = "ct"


# MacKinnon (2010) response-surface coefficients (tau_inf, tau_1) for the
# 1%, 5% and 10% quantiles; critical value = tau_inf + tau_1 / T.
_MACKINNON = {
    AdfRegression.CONST: ((0.01, -3.43035, -6.5393), (0.05, -2.86154, -2.8903),
                          (0.10, -2.56677, -1.5384)),
    AdfRegression.CONST_TREND: ((0.01, -3.95877, -9.0531), (0.05, -3.41049, -4.3904),
                                (0.10, -3.12705, -2.5856)),
}

# Upper-tail quantiles (0.90, 0.95, 0.975, 0.99) of the Dickey-Fuller t
# distribution by sample size (Fuller 1976), used above the 10% point.
_UPPER_T = (25, 50, 100, 250, 500, math.inf)
_UPPER_P = (0.90, 0.95, 0.975, 0.99)
_UPPER = {
    AdfRegression.CONST: (
        (-0.37, -0.40, -0.42, -0.42, -0.43, -0.44),
        (0.00, -0.03, -0.05, -0.06, -0.07, -0.07),
        (0.34, 0.29, 0.26, 0.24, 0.24, 0.23),
        (0.72, 0.66, 0.63, 0.62, 0.61, 0.60),
    ),
    AdfRegression.CONST_TREND: (
        (-1.14, -1.19, -1.22, -1.23, -1.24, -1.25),
        (-0.80, -0.87, -0.90, -0.92, -0.93, -0.94),
        (-0.50, -0.58, -0.62, -0.64, -0.65, -0.66),
        (-0.15, -0.24, -0.28, -0.31, -0.32, -0.33),
    ),
}
P_FLOOR, P_CEIL = 0.01, 0.99


def adf_critical_points(regression: AdfRegression | str, nobs: int) -> list[tuple[float, float]]:
    """``(statistic, probability)`` nodes used for p-value interpolation."""
    reg = AdfRegression(regression)
    pts = [(c0 + c1 / nobs, p) for p, c0, c1 in _MACKINNON[reg]]
    inv = [0.0 if math.isinf(t) else 1.0 / t for t in _UPPER_T]
    # table columns run from small to infinite T, i.e. decreasing 1/T
    x = inv[::-1]
    for p, row in zip(_UPPER_P, _UPPER[reg]):
        pts.append((float(np.interp(1.0 / nobs, x, row[::-1])), p))
    return pts


def adf_pvalue(statistic: float, regression: AdfRegression | str, nobs: int) -> float:
    pts = adf_critical_points(regression, nobs)
    stats_, probs = zip(*pts)
    return float(np.clip(np.interp(statistic, stats_, probs), P_FLOOR, P_CEIL))


def schwert_lags(n: int) -> int:
    return int(math.floor(4.0 * (n / 100.0) ** 0.25))


@dataclass(frozen=True)
class AdfResult:
    statistic: float
    p_value: float
    lags: int
    regression: AdfRegression
    nobs: int
    critical_values: dict[str, float] = field(default_factory=dict)


def adf_test(series, regression: AdfRegression | str = AdfRegression.CONST,
             max_lags: int | None = None) -> AdfResult:
    """Dickey-Fuller t-test on ``dy_t = a (+ b t) + g y_{t-1} + sum d_i dy_{t-i}``.

    ``max_lags`` fixes the number of lagged differences; the default is
    ``floor(4 (n/100)^(1/4))``. The p-value is interpolated between tabulated
    quantiles and clamped to [0.01, 0.99].
    """
    y = np.asarray(series, dtype=float).ravel()
    reg = AdfRegression(regression)
    n = y.size
    if n < 20:
        raise DataError(f"series too short for the ADF test ({n} < 20)")
    if not np.all(np.isfinite(y)):
        raise DataError("series contains non-finite values")
    lags = schwert_lags(n) if max_lags is None else int(max_lags)
    if lags < 0:
        raise ValueError("lags must be >= 0")
    dy = np.diff(y)
    nobs = dy.size - lags
    cols = [np.ones(nobs)]
    if reg is AdfRegression.CONST_TREND:
        cols.append(np.arange(1, nobs + 1, dtype=float))
    gamma_col = len(cols)
    cols.append(y[lags:-1])
    for i in range(1, lags + 1):
        cols.append(dy[lags - i:-i])
    Z = np.column_stack(cols)
    target = dy[lags:]
    k = Z.shape[1]
    if nobs <= k:
        raise DataError(f"too few observations ({nobs}) for {k} regressors")
    q, r = np.linalg.qr(Z)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * max(diag.max(), 1e-300):
        raise NumericalError("singular ADF regression (constant or collinear series)")
    beta = np.linalg.solve(r, q.T @ target)
    resid = target - Z @ beta
    sigma2 = float(resid @ resid) / (nobs - k)
    rinv = np.linalg.inv(r)
    var_gamma = sigma2 * float(rinv[gamma_col] @ rinv[gamma_col])
    if var_gamma <= 0:
        raise NumericalError("zero residual variance in ADF regression")
    stat = float(beta[gamma_col] / math.sqrt(var_gamma))
    crit = {f"{int(p * 100)}%": c0 + c1 / nobs for p, c0, c1 in _MACKINNON[reg]}
    return AdfResult(stat, adf_pvalue(stat, reg, nobs), lags, reg, nobs, crit)


# ---------------------------------------------------------------------------
# permutation test

ALL_FEATURES = "ALL"


@dataclass(frozen=True)
class PermutationReport:
    baseline: FitStatistics
    permuted: dict[str, FitStatistics]
    baseline_path: np.ndarray
    permuted_paths: dict[str, np.ndarray]
    observed: np.ndarray
    quarters: tuple[Quarter, ...]

    def degradation(self) -> dict[str, float]:
        """Permuted mean RMS divided by baseline mean RMS."""
        base = self.baseline.m_rms
        return {k: (v.m_rms / base if base > 0 else math.inf) for k, v in self.permuted.items()}

    def to_csv(self) -> str:
        lines = ["permuted,M_RMS,S_RMS,M_COR,M_MAE,M_MAPE,rms_ratio"]
        rows = [("none", self.baseline, 1.0)]
        ratio = self.degradation()
        rows += [(k, v, ratio[k]) for k, v in self.permuted.items()]
        for name, st, rr in rows:
            lines.append(",".join([name, *(_num(x) for x in
                                           (st.m_rms, st.s_rms, st.m_cor, st.m_mae, st.m_mape, rr))]))
        return "\n".join(lines) + "\n"

    def paths_csv(self) -> str:
        names = list(self.permuted_paths)
        lines = [",".join(["quarter", "observed", "baseline", *names])]
        for i, q in enumerate(self.quarters):
            vals = [self.observed[i], self.baseline_path[i], *(self.permuted_paths[k][i] for k in names)]
            lines.append(",".join([str(q), *(_num(v) for v in vals)]))
        return "\n".join(lines) + "\n"


def _num(v: float) -> str:
    return "NA" if not math.isfinite(v) else repr(float(v))


Permuter = Callable[[np.random.Generator, int], np.ndarray]


def _default_permuter(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.permutation(n)


def _fit_and_score(data: CountryDataset, X: np.ndarray, learner: Learner, seed: int):
    model = learner.fit(data.with_X(X), seed)
    pred = np.asarray(model.predict(X), dtype=float)
    return run_metrics(pred, data.y), pred


def permutation_test(data: CountryDataset, learner: str | Learner = "knn", runs: int = 20,
                     seed: int = 0, features: Sequence[str] | None = None,
                     include_all: bool = True, permuter: Permuter = _default_permuter) -> PermutationReport:
    """Retrain after shuffling the rows of one input column (or every column).

    Run ``r`` trains with seed ``seed + r`` and draws a fresh permutation, so
    the permuted statistics describe a distribution of shuffles. Predictions
    are made from the permuted inputs and scored against the true target.
    """
    learner = get_learner(learner)
    names = list(features) if features is not None else list(data.feature_names)
    for nm in names:
        if nm not in data.feature_names:
            raise KeyError(f"unknown feature {nm!r}")
    sets: list[tuple[str, list[int]]] = [(nm, [data.feature_names.index(nm)]) for nm in names]
    if include_all:
        sets.append((ALL_FEATURES, list(range(data.d))))

    base_runs: list[RunMetrics] = []
    base_paths = []
    perm_runs: dict[str, list[RunMetrics]] = {nm: [] for nm, _ in sets}
    perm_paths: dict[str, list[np.ndarray]] = {nm: [] for nm, _ in sets}
    for r in range(runs):
        run_seed = seed + r
        m, p = _fit_and_score(data, np.array(data.X), learner, run_seed)
        base_runs.append(m)
        base_paths.append(p)
        for s_idx, (nm, cols) in enumerate(sets):
            rng = np.random.default_rng((seed, r, s_idx))
            X = np.array(data.X)
            for j in cols:
                X[:, j] = data.X[permuter(rng, data.n), j]
            m, p = _fit_and_score(data, X, learner, run_seed)
            perm_runs[nm].append(m)
            perm_paths[nm].append(p)
    return PermutationReport(
        aggregate(base_runs),
        {nm: aggregate(v) for nm, v in perm_runs.items()},
        np.mean(base_paths, axis=0),
        {nm: np.mean(v, axis=0) for nm, v in perm_paths.items()},
        np.array(data.y),
        data.quarters,
    )


# ---------------------------------------------------------------------------
# hold-out of the last quarters

HOLDOUT_NOTE = ("statistics compare the 4 predicted points with the 4 held-out observations; "
                "the source describes comparing 8 points, read here as both 4-point sequences")


@dataclass(frozen=True)
class HoldoutReport:
    country: str
    learner: str
    runs: int
    predicted: np.ndarray
    observed: np.ndarray
    quarters: tuple[Quarter, ...]
    statistics: FitStatistics
    last_training_value: float
    note: str = HOLDOUT_NOTE

    @property
    def horizon(self) -> int:
        return self.predicted.shape[1]

    @property
    def mean_path(self) -> np.ndarray:
        return self.predicted.mean(axis=0)

    def direction(self) -> float:
        """Least-squares slope of the mean predicted path (per quarter)."""
        return path_slope(self.mean_path)

    def observed_direction(self) -> float:
        return path_slope(self.observed)

    def statistics_csv(self) -> str:
        header = "country,learner,runs," + ",".join(FitStatistics.COLUMNS) + ",note"
        row = [self.country, self.learner, str(self.runs), *(_num(v) for v in self.statistics.row()),
               '"' + self.note + '"']
        return header + "\n" + ",".join(row) + "\n"

    def path_csv(self) -> str:
        lines = ["quarter,observed,pred_mean,pred_sd,pred_min,pred_max"]
        P = self.predicted
        for i, q in enumerate(self.quarters):
            col = P[:, i]
            lines.append(",".join([str(q), *(_num(v) for v in (
                self.observed[i], col.mean(), col.std(), col.min(), col.max()))]))
        return "\n".join(lines) + "\n"


def path_slope(path) -> float:
    p = np.asarray(path, dtype=float)
    t = np.arange(p.size, dtype=float)
    t -= t.mean()
    return float((t @ (p - p.mean())) / (t @ t))


def split_holdout(data: CountryDataset, horizon: int = 4,
                  min_train: int = MIN_PANEL_ROWS) -> tuple[CountryDataset, CountryDataset]:
    if data.n < min_train + horizon:
        raise DataError(
            f"{data.country}: hold-out needs {min_train + horizon} rows, got {data.n}"
        )
    cut = data.n - horizon
    return data.rows(slice(0, cut)), data.rows(slice(cut, data.n))


def holdout_last4(data: CountryDataset, learner: str | Learner = "treebag", runs: int = 600,
                  base_seed: int = 0, horizon: int = 4,
                  min_train: int = MIN_PANEL_ROWS) -> HoldoutReport:
    """Train without the last ``horizon`` rows and predict them from their
    observed inputs. The training set physically excludes the held-out rows."""
    learner = get_learner(learner)
    train, test = split_holdout(data, horizon, min_train)
    preds = np.empty((runs, horizon))
    recs = []
    for r in range(runs):
        model = learner.fit(train, base_seed + r)
        preds[r] = model.predict(test.X)
        recs.append(run_metrics(preds[r], test.y))
    return HoldoutReport(data.country, getattr(learner, "name", ""), runs, preds,
                         np.array(test.y), test.quarters, aggregate(recs), float(train.y[-1]))
