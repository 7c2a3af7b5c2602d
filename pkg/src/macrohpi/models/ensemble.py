"""Many-run fit statistics.

Run ``r`` trains with seed ``base_seed + r`` and is scored on the whole sample
(resubstitution). The learner's own out-of-sample estimate (CV RMSE for kNN,
out-of-bag RMSE for bagged trees) is kept alongside as ``cv_rms``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..dataset import CountryDataset
from ..metrics import FitStatistics, RunMetrics, aggregate, run_metrics
from .learners import Learner, Model, cv_score, get_learner

RUN_COLUMNS = ("run", "seed", "cor", "rms", "mae", "mape", "chip", "chis", "cv_rms")


@dataclass(frozen=True)
class RunRecord:
    run: int
    seed: int
    metrics: RunMetrics
    cv_rms: float

    def row(self) -> list:
        m = self.metrics
        return [self.run, self.seed, m.cor, m.rms, m.mae, m.mape, m.chip, m.chis, self.cv_rms]


@dataclass(frozen=True)
class EnsembleResult:
    statistics: FitStatistics
    records: tuple[RunRecord, ...]
    final_model: Model
    final_prediction: np.ndarray
    mean_prediction: np.ndarray
    learner: str = ""
    base_seed: int = 0

    @property
    def cv_rms(self) -> float:
        vals = [r.cv_rms for r in self.records if not math.isnan(r.cv_rms)]
        return float(np.mean(vals)) if vals else float("nan")

    def records_csv(self) -> str:
        lines = [",".join(RUN_COLUMNS)]
        for rec in self.records:
            lines.append(",".join(_cell(v) for v in rec.row()))
        return "\n".join(lines) + "\n"


def _cell(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "NA" if not math.isfinite(v) else repr(float(v))


@dataclass
class _RunTask:
    data: CountryDataset
    learner: Learner
    bins: int = 10
    keep_model: bool = field(default=False)

    def __call__(self, run_seed: tuple[int, int]):
        run, seed = run_seed
        model = self.learner.fit(self.data, seed)
        pred = np.asarray(model.predict(self.data.X), dtype=float)
        rec = RunRecord(run, seed, run_metrics(pred, self.data.y, self.bins), cv_score(model))
        return rec, pred, model


def ensemble_fit(data: CountryDataset, learner: str | Learner = "treebag", runs: int = 600,
                 base_seed: int = 0, bins: int = 10, workers: int = 1) -> EnsembleResult:
    """Train ``runs`` times and aggregate whole-sample metrics.

    Results are identical for any ``workers`` value: seeds are fixed per run and
    runs are merged back in run order.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    learner = get_learner(learner)
    task = _RunTask(data, learner, bins)
    jobs = [(r, base_seed + r) for r in range(runs)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(task, jobs, chunksize=max(1, runs // (4 * workers))))
    else:
        results = [task(j) for j in jobs]
    records = tuple(r[0] for r in results)
    preds = np.vstack([r[1] for r in results])
    final_model = results[-1][2]
    stats = aggregate([r.metrics for r in records])
    return EnsembleResult(stats, records, final_model, preds[-1], preds.mean(axis=0),
                          getattr(learner, "name", type(learner).__name__), base_seed)
