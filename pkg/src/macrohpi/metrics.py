"""Goodness-of-fit statistics for fitted index paths.

``mape`` follows the MLmetrics convention: no x100 factor and a signed
divisor, so negative targets yield negative values. ``mape_abs`` divides by
``|y|`` and is the one to read when targets change sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import Enum

import numpy as np
from scipy import stats

from .errors import DataError


def _pair(pred, obs) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=float).ravel()
    o = np.asarray(obs, dtype=float).ravel()
    if p.shape != o.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {o.size} observations")
    if p.size == 0:
        raise ValueError("empty input")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(o))):
        raise ValueError("non-finite input")
    return p, o


def rms(pred, obs) -> float:
    p, o = _pair(pred, obs)
    r = p - o
    return math.sqrt(float(np.mean(r * r)))


def mae(pred, obs) -> float:
    p, o = _pair(pred, obs)
    return float(np.mean(np.abs(p - o)))


def mape(pred, obs) -> float:
    """Mean of ``|pred - obs| / obs`` (signed divisor, no x100)."""
    p, o = _pair(pred, obs)
    if np.any(o == 0):
        raise ZeroDivisionError("mape undefined: an observation is zero")
    return float(np.mean(np.abs(p - o) / o))


def mape_abs(pred, obs) -> float:
    p, o = _pair(pred, obs)
    if np.any(o == 0):
        raise ZeroDivisionError("mape undefined: an observation is zero")
    return float(np.mean(np.abs(p - o) / np.abs(o)))


def residual_sd(pred, obs) -> float:
    """Population (divide by N) standard deviation of ``obs - pred``."""
    p, o = _pair(pred, obs)
    r = o - p
    return float(np.sqrt(np.mean((r - r.mean()) ** 2)))


def correlation(pred, obs) -> float:
    """Pearson correlation; NaN when either side is constant."""
    p, o = _pair(pred, obs)
    dp = p - p.mean()
    do = o - o.mean()
    denom = math.sqrt(float(dp @ dp) * float(do @ do))
    if denom == 0.0:
        return float("nan")
    return float(np.clip(float(dp @ do) / denom, -1.0, 1.0))


def chi2_pair(pred, obs, bins: int = 10) -> tuple[float, float]:
    """Two-sample Pearson chi-square between the histograms of ``pred`` and ``obs``.

    Both samples are binned on ``bins`` equal-width bins spanning their combined
    range. Returns ``(p_value, statistic / N)`` where the p-value is the upper
    tail at ``bins - 1`` degrees of freedom and ``N = len(pred)``.
    """
    p, o = _pair(pred, obs)
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if p.size < 2 * bins:
        raise ValueError(f"need at least {2 * bins} points for {bins} bins, got {p.size}")
    lo = min(p.min(), o.min())
    hi = max(p.max(), o.max())
    if not hi > lo:
        raise DataError("degenerate range: all values are equal")
    edges = np.linspace(lo, hi, bins + 1)
    cp, _ = np.histogram(p, edges)
    co, _ = np.histogram(o, edges)
    statistic = chi2_two_sample(cp, co)
    p_value = float(stats.chi2.sf(statistic, bins - 1))
    return p_value, statistic / p.size


def chi2_two_sample(counts_a, counts_b) -> float:
    """Pearson statistic of the 2 x k contingency table; empty columns skipped."""
    table = np.vstack([counts_a, counts_b]).astype(float)
    col = table.sum(axis=0)
    row = table.sum(axis=1, keepdims=True)
    keep = col > 0
    expected = row * col[keep] / table.sum()
    return float(np.sum((table[:, keep] - expected) ** 2 / expected))


class LewisCategory(str, Enum):
    HIGHLY_ACCURATE = "HIGHLY_ACCURATE"
    GOOD = "GOOD"
    REASONABLE = "REASONABLE"
    INACCURATE = "INACCURATE"


def lewis_category(mape_value: float) -> LewisCategory:
    """Forecast-quality band of a MAPE value; boundaries go to the upper band."""
    if not math.isfinite(mape_value):
        raise ValueError("mape value must be finite")
    if mape_value < 0.1:
        return LewisCategory.HIGHLY_ACCURATE
    if mape_value < 0.2:
        return LewisCategory.GOOD
    if mape_value < 0.5:
        return LewisCategory.REASONABLE
    return LewisCategory.INACCURATE


@dataclass(frozen=True)
class RunMetrics:
    """Metrics of one fitted path against the observations."""

    cor: float
    rms: float
    mae: float
    mape: float
    chip: float
    chis: float
    sd: float


def run_metrics(pred, obs, bins: int = 10) -> RunMetrics:
    """All per-run metrics; undefined ones (constant input, zero target) are NaN."""
    p, o = _pair(pred, obs)
    try:
        mp = mape(p, o)
    except ZeroDivisionError:
        mp = float("nan")
    bins = min(bins, p.size // 2)
    try:
        chip, chis = chi2_pair(p, o, bins) if bins >= 2 else (float("nan"), float("nan"))
    except DataError:
        chip, chis = float("nan"), float("nan")
    return RunMetrics(correlation(p, o), rms(p, o), mae(p, o), mp, chip, chis, residual_sd(p, o))


@dataclass(frozen=True)
class FitStatistics:
    m_cor: float
    s_cor: float
    m_rms: float
    s_rms: float
    sd: float
    m_mae: float
    m_mape: float
    m_chip: float
    m_chis: float

    COLUMNS = ("M_COR", "S_COR", "M_RMS", "S_RMS", "SD", "M_MAE", "M_MAPE", "M_CHIp", "M_CHIs")

    def row(self) -> list[float]:
        return [getattr(self, f.name) for f in fields(self)]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.COLUMNS, self.row()))

    @property
    def lewis(self) -> LewisCategory | None:
        return lewis_category(self.m_mape) if math.isfinite(self.m_mape) else None


def _mean_std(values) -> tuple[float, float]:
    a = np.asarray(values, dtype=float)
    if np.all(np.isnan(a)):
        return float("nan"), float("nan")
    a = a[~np.isnan(a)]
    # fixed left-to-right order keeps aggregates reproducible
    m = math.fsum(a.tolist()) / a.size
    s = math.sqrt(math.fsum(((a - m) ** 2).tolist()) / a.size)
    return m, s


def aggregate(runs: list[RunMetrics], final_sd: float | None = None) -> FitStatistics:
    """Means (``M_*``) and population standard deviations (``S_*``) over runs.

    ``SD`` is the residual standard deviation of the last run unless given.
    """
    if not runs:
        raise ValueError("no runs to aggregate")
    m_cor, s_cor = _mean_std([r.cor for r in runs])
    m_rms, s_rms = _mean_std([r.rms for r in runs])
    m_mae, _ = _mean_std([r.mae for r in runs])
    m_mape, _ = _mean_std([r.mape for r in runs])
    m_chip, _ = _mean_std([r.chip for r in runs])
    m_chis, _ = _mean_std([r.chis for r in runs])
    sd = runs[-1].sd if final_sd is None else final_sd
    return FitStatistics(m_cor, s_cor, m_rms, s_rms, sd, m_mae, m_mape, m_chip, m_chis)


def statistics_csv(rows: list[tuple[str, FitStatistics]]) -> str:
    lines = [",".join(("country",) + FitStatistics.COLUMNS)]
    for label, st in rows:
        lines.append(",".join([label, *(_fmt(v) for v in st.row())]))
    return "\n".join(lines) + "\n"


def _fmt(v: float) -> str:
    return "NA" if v is None or not math.isfinite(v) else repr(float(v))


__all__ = [
    "FitStatistics", "LewisCategory", "RunMetrics", "aggregate", "chi2_pair", "chi2_two_sample",
    "correlation", "lewis_category", "mae", "mape", "mape_abs", "residual_sd", "rms",
    "run_metrics", "statistics_csv",
]
