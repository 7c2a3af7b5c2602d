"""Synthetic raw files in the layouts the ingestion layer reads."""

from __future__ import annotations

import datetime as dt
from pathlib import Path

import numpy as np
import yaml

from macrohpi.dataset import Quarter

START = Quarter(1990, 1)


def _write_series(path: Path, rows) -> None:
    lines = ["DATE,VALUE"]
    for d, v in rows:
        lines.append(f"{d.isoformat()},{v}")
    path.write_text("\n".join(lines) + "\n")


def make_world(root: Path, countries=("CH", "FR"), n_quarters: int = 100, seed: int = 0,
               with_baselines: bool = True) -> Path:
    """Write a small multi-country dataset and its manifest; return the manifest path.

    HPI levels respond to treasury rates and central-bank assets so the models
    have something to learn.
    """
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    quarters = [START + i for i in range(n_quarters)]
    t = np.arange(n_quarters)
    tr = 6.0 - 4.0 * t / n_quarters + 0.4 * np.sin(t / 5.0)
    ecb = np.where(t < 60, 0.0, (t - 60) * 1.5e5)

    # treasury: business-daily-ish, with missing markers and a missing quarter
    rows = []
    for i, q in enumerate(quarters):
        if i == 30:
            continue  # whole quarter absent -> interpolated
        end = q.end_date()
        for k in (40, 20, 1):
            d = end - dt.timedelta(days=k)
            rows.append((d, f"{tr[i] + 0.01 * k / 40:.4f}"))
        if i % 7 == 0:
            rows.append((end, "."))
    _write_series(root / "dgs10.csv", rows)
    _write_series(root / "ecb.csv", [(q.end_date(), f"{v:.1f}") for q, v in zip(quarters, ecb)])

    hpi_cols = {}
    manifest_countries = {}
    for c_idx, code in enumerate(countries):
        gdp = 100.0 * np.exp(0.006 * t + 0.01 * rng.normal(size=n_quarters).cumsum() * 0.3)
        cpi = 100.0 * np.exp(0.005 * t)
        level = 80.0 * np.exp(0.004 * t) * (1.0 + 0.05 * (6.0 - tr)) + 5e-6 * ecb * (1 + c_idx)
        hpi_cols[code] = level + rng.normal(scale=0.3, size=n_quarters)
        _write_series(root / f"{code.lower()}_gdp.csv",
                      [(q.end_date(), f"{v:.4f}") for q, v in zip(quarters, gdp)])
        # monthly CPI index
        mrows = []
        for i, q in enumerate(quarters):
            for m in range(3):
                d = dt.date(q.year, 3 * (q.quarter_index - 1) + m + 1, 15)
                mrows.append((d, f"{cpi[i] * (1 + 0.001 * (m - 2)):.4f}"))
        _write_series(root / f"{code.lower()}_cpi.csv", mrows)
        manifest_countries[code] = {
            "GDP": {"path": f"{code.lower()}_gdp.csv", "units": "index"},
            "GDP_RATE": {"from": "GDP", "form": "rate_4q"},
            "CPI_RATE": {"path": f"{code.lower()}_cpi.csv", "form": "rate_4q"},
        }
    lines = [",".join(["QUARTER", *countries])]
    for i, q in enumerate(quarters):
        lines.append(",".join([str(q), *(f"{hpi_cols[c][i]:.4f}" for c in countries)]))
    (root / "hpi.csv").write_text("\n".join(lines) + "\n")

    doc = {
        "version": 1,
        "seed": 0,
        "runs": 2,
        "output": "out",
        "learner": "treebag",
        "hpi": {"path": "hpi.csv"},
        "global": {"TR10Y": {"path": "dgs10.csv", "units": "percent"},
                   "ECB_ASSETS": {"path": "ecb.csv", "units": "MEUR"}},
        "countries": manifest_countries,
        "grid": {"axes": ["GDP:-2:2:5", "CPI:-2:2:5", "ECB:5.5e6:7.5e6:4", "TR10Y:0:4:4"]},
    }
    if with_baselines:
        doc["baselines"] = {"p": 2, "deterministic": "both", "horizon": 4, "perturb_runs": 5}
    path = root / "manifest.yaml"
    path.write_text(yaml.safe_dump(doc, sort_keys=False))
    return path
