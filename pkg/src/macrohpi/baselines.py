"""Econometric comparison methods: VAR(p), no-intercept linear inversion,
Gaussian GLM with intercept, and the method-comparison table.

Every least-squares problem is solved through a pivoted QR decomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import linalg, stats

from .dataset import CountryDataset, MIN_PANEL_ROWS, Quarter
from .diagnostics import holdout_last4, path_slope, split_holdout
from .errors import DataError, MacroHPIError, NumericalError, RankDeficiencyError

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class LstsqSolution:
    beta: np.ndarray
    residuals: np.ndarray
    xtx_inv_diag: np.ndarray
    rank: int


def qr_lstsq(Z: np.ndarray, Y: np.ndarray, names: Sequence[str]) -> LstsqSolution:
    """Least squares ``Z b = Y`` via column-pivoted QR.

    Raises ``RankDeficiencyError`` naming the columns that are linear
    combinations of the others.
    """
    Z = np.asarray(Z, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n, k = Z.shape
    if n < k:
        raise RankDeficiencyError(f"{n} rows for {k} columns", list(names))
    # unit-norm columns so the rank tolerance does not depend on units
    norms = np.linalg.norm(Z, axis=0)
    zero = [names[j] for j in np.flatnonzero(norms == 0)]
    if zero:
        raise RankDeficiencyError(f"all-zero columns: {', '.join(zero)}", zero)
    q, r, piv = linalg.qr(Z / norms, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > RANK_RTOL * max(n, k) * diag[0]))
    if rank < k:
        bad = [names[i] for i in piv[rank:]]
        raise RankDeficiencyError(f"rank-deficient design; collinear columns: {', '.join(bad)}", bad)
    b_piv = linalg.solve_triangular(r, q.T @ Y)
    beta = np.empty_like(b_piv)
    beta[piv] = b_piv
    beta = beta / (norms[:, None] if beta.ndim == 2 else norms)
    rinv = linalg.solve_triangular(r, np.eye(k))
    d = np.empty(k)
    d[piv] = np.sum(rinv ** 2, axis=1)
    d /= norms ** 2
    return LstsqSolution(beta, Y - Z @ beta, d, rank)


# ---------------------------------------------------------------------------
# linear inversion and GLM


@dataclass(frozen=True)
class LinearCoefficients:
    feature_names: tuple[str, ...]
    coef: np.ndarray
    intercept: float | None
    residual_variance: float
    se: np.ndarray | None = None
    intercept_se: float | None = None
    residuals: np.ndarray | None = field(default=None, repr=False, compare=False)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = X @ self.coef
        return out + self.intercept if self.intercept is not None else out

    def as_dict(self) -> dict[str, float]:
        d = {}
        if self.intercept is not None:
            d["(Intercept)"] = self.intercept
        d.update(zip(self.feature_names, self.coef.tolist()))
        return d

    def to_csv(self) -> str:
        lines = ["term,estimate,std_error"]
        if self.intercept is not None:
            lines.append(f"(Intercept),{self.intercept!r},{_opt(self.intercept_se)}")
        for j, nm in enumerate(self.feature_names):
            se = None if self.se is None else self.se[j]
            lines.append(f"{nm},{float(self.coef[j])!r},{_opt(se)}")
        return "\n".join(lines) + "\n"


def _opt(v) -> str:
    return "NA" if v is None or not math.isfinite(v) else repr(float(v))


def _check_rows(n: int, k: int) -> None:
    if n <= k:
        raise DataError(f"need more rows than coefficients ({n} rows, {k} coefficients)")


def linear_inversion(data: CountryDataset) -> LinearCoefficients:
    """No-intercept least squares ``y ~ X a``."""
    X, y = data.X, data.y
    _check_rows(data.n, data.d)
    sol = qr_lstsq(X, y, data.feature_names)
    rss = float(sol.residuals @ sol.residuals)
    return LinearCoefficients(data.feature_names, sol.beta, None, rss / (data.n - data.d),
                              residuals=sol.residuals)


def fit_glm(data: CountryDataset) -> LinearCoefficients:
    """Gaussian identity-link GLM, i.e. OLS with an intercept, with standard errors."""
    _check_rows(data.n, data.d + 1)
    Z = np.column_stack([np.ones(data.n), data.X])
    sol = qr_lstsq(Z, data.y, ("(Intercept)", *data.feature_names))
    dof = data.n - data.d - 1
    sigma2 = float(sol.residuals @ sol.residuals) / dof
    se = np.sqrt(sigma2 * sol.xtx_inv_diag)
    return LinearCoefficients(data.feature_names, sol.beta[1:], float(sol.beta[0]), sigma2,
                              se[1:], float(se[0]), sol.residuals)


@dataclass(frozen=True)
class PerturbedEnsemble:
    """Coefficients and fitted paths of GLMs refitted on perturbed inputs."""

    terms: tuple[str, ...]
    coefficients: np.ndarray  # runs x (1 + d), intercept first
    fitted: np.ndarray  # runs x n
    base: LinearCoefficients
    amplitude: float

    @property
    def mean(self) -> np.ndarray:
        return self.coefficients.mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        return self.coefficients.std(axis=0)

    def envelope(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-row (min, mean, max) of the fitted paths."""
        return self.fitted.min(axis=0), self.fitted.mean(axis=0), self.fitted.max(axis=0)

    def to_csv(self) -> str:
        lines = ["term,base,mean,std"]
        base = [self.base.intercept, *self.base.coef.tolist()]
        for t, b, m, s in zip(self.terms, base, self.mean, self.std):
            lines.append(f"{t},{float(b)!r},{float(m)!r},{float(s)!r}")
        return "\n".join(lines) + "\n"


def perturbation_factors(rng: np.random.Generator, shape, amplitude: float) -> np.ndarray:
    """``1 + e`` with ``e`` normal of sd ``amplitude/3`` truncated to +/- amplitude."""
    sd = amplitude / 3.0
    e = stats.truncnorm.rvs(-3.0, 3.0, loc=0.0, scale=sd, size=shape, random_state=rng)
    return 1.0 + e


def perturbed_glm_ensemble(data: CountryDataset, runs: int = 600, amplitude: float = 0.1,
                           seed: int = 0) -> PerturbedEnsemble:
    """Refit the GLM ``runs`` times with every input value multiplied by an
    independent factor ``1 + e``; run ``r`` draws from its own seed ``(seed, r)``."""
    if not 0.0 < amplitude < 1.0:
        raise ValueError("amplitude must be in (0, 1)")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    base = fit_glm(data)
    coefs = np.empty((runs, data.d + 1))
    fitted = np.empty((runs, data.n))
    for r in range(runs):
        rng = np.random.default_rng((seed, r))
        Xp = data.X * perturbation_factors(rng, data.X.shape, amplitude)
        fit = fit_glm(data.with_X(Xp))
        coefs[r, 0] = fit.intercept
        coefs[r, 1:] = fit.coef
        fitted[r] = fit.predict(Xp)
    return PerturbedEnsemble(("(Intercept)", *data.feature_names), coefs, fitted, base, amplitude)


# ---------------------------------------------------------------------------
# VAR


class Deterministic(str, Enum):
    CONST = "const"
    TREND = "trend"
    BOTH = "both"


class ForecastMode(str, Enum):
    ITERATED = "iterated"
    CONDITIONAL = "conditional"


def _det_terms(det: Deterministic) -> tuple[str, ...]:
    return {Deterministic.CONST: ("const",), Deterministic.TREND: ("trend",),
            Deterministic.BOTH: ("const", "trend")}[det]


def _det_row(det: Deterministic, t: int) -> list[float]:
    # t is the 0-based time index within the estimation panel; trend is t + 1
    return [1.0 if term == "const" else float(t + 1) for term in _det_terms(det)]


@dataclass(frozen=True)
class VarModel:
    p: int
    deterministic: Deterministic
    coefs: np.ndarray  # (p, m, m): coefs[l][i, j] is the effect of y_j at lag l + 1 on y_i
    det_coefs: np.ndarray  # (m, n_det)
    names: tuple[str, ...]
    sigma: np.ndarray  # residual covariance (m, m)
    nobs: int
    residuals: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def m(self) -> int:
        return len(self.names)

    def one_step(self, lags: np.ndarray, t: int) -> np.ndarray:
        """Mean of ``y_t`` given ``lags[l] = y_{t-1-l}``."""
        out = self.det_coefs @ np.asarray(_det_row(self.deterministic, t))
        for l in range(self.p):
            out = out + self.coefs[l] @ lags[l]
        return out

    def ma_coefficients(self, horizon: int) -> list[np.ndarray]:
        psi = [np.eye(self.m)]
        for h in range(1, horizon):
            acc = np.zeros((self.m, self.m))
            for l in range(1, min(h, self.p) + 1):
                acc += self.coefs[l - 1] @ psi[h - l]
            psi.append(acc)
        return psi


def fit_var(panel, names: Sequence[str] | None = None, p: int = 2,
            deterministic: Deterministic | str = Deterministic.BOTH) -> VarModel:
    """Equation-by-equation least squares on ``p`` lags plus deterministic terms."""
    Y = np.asarray(panel, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, m = Y.shape
    names = tuple(names) if names is not None else tuple(f"y{j + 1}" for j in range(m))
    if len(names) != m:
        raise ValueError("names do not match panel columns")
    if p < 1:
        raise ValueError("p must be >= 1")
    det = Deterministic(deterministic)
    nd = len(_det_terms(det))
    k = nd + p * m
    nobs = n - p
    if nobs <= k:
        raise DataError(f"panel too short for VAR({p}): {n} rows, {k} regressors per equation")
    Z = np.empty((nobs, k))
    for i, t in enumerate(range(p, n)):
        Z[i, :nd] = _det_row(det, t)
        for l in range(p):
            Z[i, nd + l * m:nd + (l + 1) * m] = Y[t - 1 - l]
    cols = [*_det_terms(det), *(f"{nm}.l{l + 1}" for l in range(p) for nm in names)]
    sol = qr_lstsq(Z, Y[p:], cols)
    B = sol.beta  # (k, m)
    coefs = np.stack([B[nd + l * m:nd + (l + 1) * m].T for l in range(p)])
    resid = sol.residuals
    sigma = resid.T @ resid / (nobs - k)
    return VarModel(p, det, coefs, B[:nd].T.copy(), names, sigma, nobs, resid)


@dataclass(frozen=True)
class VarForecast:
    mean: np.ndarray  # (horizon, m)
    se: np.ndarray  # (horizon, m)
    mode: ForecastMode
    target: int

    @property
    def horizon(self) -> int:
        return self.mean.shape[0]

    def target_path(self) -> tuple[np.ndarray, np.ndarray]:
        return self.mean[:, self.target], self.se[:, self.target]


def forecast_var(model: VarModel, history, horizon: int,
                 mode: ForecastMode | str = ForecastMode.ITERATED,
                 exogenous_future=None, target: int = 0,
                 start_index: int | None = None) -> VarForecast:
    """Multi-step forecasts with standard errors.

    ``history`` holds the most recent rows (at least ``p``). ``start_index`` is
    the time index of the first forecast in the estimation panel's clock; it
    defaults to ``len(history)``, right for a history that starts where the
    estimation panel started.

    ITERATED feeds every forecast back. CONDITIONAL forecasts only the
    ``target`` variable and substitutes ``exogenous_future`` (``horizon`` rows,
    either all ``m`` columns or the ``m - 1`` non-target ones) for the rest.
    """
    mode = ForecastMode(mode)
    H = np.asarray(history, dtype=float)
    if H.ndim == 1:
        H = H[:, None]
    m = model.m
    if H.shape[1] != m:
        raise ValueError(f"history has {H.shape[1]} columns, model has {m}")
    if len(H) < model.p:
        raise DataError(f"history needs at least {model.p} rows")
    t0 = len(H) if start_index is None else int(start_index)
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if horizon == 0:
        return VarForecast(np.empty((0, m)), np.empty((0, m)), mode, target)
    exo = None
    if mode is ForecastMode.CONDITIONAL:
        if exogenous_future is None:
            raise ValueError("CONDITIONAL mode requires exogenous_future")
        exo = np.asarray(exogenous_future, dtype=float)
        if exo.ndim == 1:
            exo = exo[:, None]
        if exo.shape[0] != horizon:
            raise ValueError(f"exogenous_future has {exo.shape[0]} rows, horizon is {horizon}")
        if exo.shape[1] == m - 1:
            exo = np.insert(exo, target, np.nan, axis=1)
        elif exo.shape[1] != m:
            raise ValueError(f"exogenous_future must have {m - 1} or {m} columns")
    lags = [H[-1 - l].copy() for l in range(model.p)]
    mean = np.empty((horizon, m))
    for h in range(horizon):
        step = model.one_step(np.array(lags), t0 + h)
        if exo is not None:
            row = exo[h].copy()
            row[target] = step[target]
            step = row
        mean[h] = step
        lags = [step] + lags[:-1]
    se = np.zeros((horizon, m))
    if mode is ForecastMode.ITERATED:
        psi = model.ma_coefficients(horizon)
        mse = np.zeros((m, m))
        for h in range(horizon):
            mse = mse + psi[h] @ model.sigma @ psi[h].T
            se[h] = np.sqrt(np.clip(np.diag(mse), 0.0, None))
    else:
        a = model.coefs[:, target, target]
        psi = [1.0]
        for h in range(1, horizon):
            psi.append(sum(a[l - 1] * psi[h - l] for l in range(1, min(h, model.p) + 1)))
        s2 = max(float(model.sigma[target, target]), 0.0)
        cum = 0.0
        for h in range(horizon):
            cum += psi[h] ** 2
            se[h, target] = math.sqrt(s2 * cum)
    return VarForecast(mean, se, mode, target)


# ---------------------------------------------------------------------------
# comparison table

METHOD_COLUMNS = ("VAR", "LI", "GLM", "ML_KNN", "ML_TREEBAG", "OBSERVED")


@dataclass(frozen=True)
class BenchmarkTable:
    country: str
    quarters: tuple[Quarter, ...]
    columns: dict[str, np.ndarray]
    var_se: np.ndarray
    var_iterated: np.ndarray
    notes: dict[str, str] = field(default_factory=dict)

    @property
    def observed(self) -> np.ndarray:
        return self.columns["OBSERVED"]

    def slope(self, method: str) -> float:
        col = self.columns[method]
        return path_slope(col) if np.all(np.isfinite(col)) else float("nan")

    def sign_correct(self) -> dict[str, bool | None]:
        """Whether each method's direction of change matches the observed one."""
        obs = np.sign(self.slope("OBSERVED"))
        out = {}
        for k in METHOD_COLUMNS[:-1]:
            s = self.slope(k)
            out[k] = None if math.isnan(s) else bool(np.sign(s) == obs)
        return out

    def decreasing(self, method: str, rel_tol: float = 0.01) -> bool:
        """Clear decline: negative slope larger than ``rel_tol`` of the path level per quarter."""
        s = self.slope(method)
        if math.isnan(s):
            return False
        scale = max(float(np.mean(np.abs(self.columns[method]))), 1e-12)
        return s < -rel_tol * scale

    def to_csv(self) -> str:
        head = ["quarter", "VAR", "VAR_SE", "LI", "GLM", "ML_KNN", "ML_TREEBAG", "OBSERVED",
                "VAR_ITERATED"]
        lines = [",".join(head)]
        for i, q in enumerate(self.quarters):
            vals = [self.columns["VAR"][i], self.var_se[i], self.columns["LI"][i],
                    self.columns["GLM"][i], self.columns["ML_KNN"][i],
                    self.columns["ML_TREEBAG"][i], self.columns["OBSERVED"][i],
                    self.var_iterated[i]]
            lines.append(",".join([str(q), *(_opt(v) for v in vals)]))
        sc = self.sign_correct()
        flags = [sc["VAR"], None, sc["LI"], sc["GLM"], sc["ML_KNN"], sc["ML_TREEBAG"], True, None]
        lines.append(",".join(["sign_correct", *("NA" if f is None else str(f).lower()
                                                 for f in flags)]))
        for k, v in self.notes.items():
            lines.append(f"# {k}: {v}")
        return "\n".join(lines) + "\n"


def benchmark_table(data: CountryDataset, horizon: int = 4, runs: int = 600, seed: int = 0,
                    var_p: int = 2, deterministic: Deterministic | str = Deterministic.BOTH,
                    min_train: int = MIN_PANEL_ROWS, learners: dict | None = None) -> BenchmarkTable:
    """Predict the last ``horizon`` quarters with every method, each trained on
    the panel without them.

    A method that cannot be estimated on the data (for example a rank-deficient
    design) yields a NaN column and an explanatory note instead of aborting the
    whole table.
    """
    train, test = split_holdout(data, horizon, min_train)
    nan = np.full(horizon, np.nan)
    cols: dict[str, np.ndarray] = {}
    notes: dict[str, str] = {}
    var_se, var_iter = nan.copy(), nan.copy()

    panel = np.column_stack([train.y, train.X])
    try:
        vm = fit_var(panel, ("HPI", *train.feature_names), var_p, deterministic)
        cond = forecast_var(vm, panel, horizon, ForecastMode.CONDITIONAL, test.X, target=0)
        cols["VAR"], var_se = cond.target_path()
        var_iter = forecast_var(vm, panel, horizon, ForecastMode.ITERATED).mean[:, 0]
    except (NumericalError, DataError) as exc:
        cols["VAR"] = nan.copy()
        notes["VAR"] = str(exc)
    for key, fn in (("LI", linear_inversion), ("GLM", fit_glm)):
        try:
            cols[key] = fn(train).predict(test.X)
        except (NumericalError, DataError) as exc:
            cols[key] = nan.copy()
            notes[key] = str(exc)
    learners = learners or {"ML_KNN": "knn", "ML_TREEBAG": "treebag"}
    for key in ("ML_KNN", "ML_TREEBAG"):
        try:
            rep = holdout_last4(data, learners[key], runs, seed, horizon, min_train)
            cols[key] = rep.mean_path
        except MacroHPIError as exc:
            cols[key] = nan.copy()
            notes[key] = str(exc)
    cols["OBSERVED"] = np.array(test.y)
    return BenchmarkTable(data.country, test.quarters, cols, np.asarray(var_se),
                          np.asarray(var_iter), notes)
