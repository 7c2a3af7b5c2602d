"""Full-factorial scenario grids pushed through a trained model.

Each grid row is one combination of input values; the model maps it to an
end-of-scenario prediction (no temporal path is simulated).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError

DEFAULT_ROW_CAP = 10_000_000
CHUNK_ROWS = 65_536
HISTOGRAM_BINS = 50
SUMMARY_QUANTILES = (5, 25, 50, 75, 95)

# latest observed 12-quarter HPI changes (percent) drawn as reference lines
REFERENCE_LINES = {"FR": 12.4, "UK": 13.2, "US": 4.3, "CH": 8.7}

# accepted alternative spellings of grid axis names
AXIS_ALIASES = {"TR": "TR10Y", "TREASURY": "TR10Y", "ECB_ASSETS": "ECB", "FED_ASSETS": "FED",
                "CPI_RATE": "CPI", "GDP_RATE": "GDP"}


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise ValueError(f"axis {self.name}: count must be >= 2")
        if not (math.isfinite(self.min) and math.isfinite(self.max)) or not self.min < self.max:
            raise ValueError(f"axis {self.name}: need finite min < max")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.count)

    @classmethod
    def parse(cls, text: str) -> Axis:
        """``name:min:max:count``."""
        parts = text.split(":")
        if len(parts) != 4:
            raise ValueError(f"axis must be name:min:max:count, got {text!r}")
        name, lo, hi, n = parts
        return cls(name.strip(), float(lo), float(hi), int(n))


def default_axes() -> tuple[Axis, ...]:
    """GDP and CPI -2..2 %, ECB assets 6.5e6 +/- 1e6 MEUR, TR10Y 0..4 %; 20 points each."""
    return (
        Axis("GDP", -2.0, 2.0, 20),
        Axis("CPI", -2.0, 2.0, 20),
        Axis("ECB", 5.5e6, 7.5e6, 20),
        Axis("TR10Y", 0.0, 4.0, 20),
    )


@dataclass(frozen=True)
class ScenarioGrid:
    """Lazy Cartesian product of the axes; the last axis varies fastest."""

    axes: tuple[Axis, ...]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.count for a in self.axes)

    def __len__(self) -> int:
        return math.prod(self.shape)

    def rows(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        stop = len(self) if stop is None else min(stop, len(self))
        flat = np.arange(start, stop)
        idx = np.unravel_index(flat, self.shape)
        return np.column_stack([a.values[i] for a, i in zip(self.axes, idx)]) \
            if self.axes else np.empty((0, 0))

    def chunks(self, size: int = CHUNK_ROWS) -> Iterator[np.ndarray]:
        for start in range(0, len(self), size):
            yield self.rows(start, start + size)

    def materialize(self) -> np.ndarray:
        return self.rows()


def build_grid(axes: Sequence[Axis], cap: int = DEFAULT_ROW_CAP) -> ScenarioGrid:
    axes = tuple(axes)
    if not axes:
        raise ValueError("no grid axes given")
    names = [a.name for a in axes]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate axis names: {names}")
    total = math.prod(a.count for a in axes)
    if total > cap:
        raise OverflowError(f"grid has {total} rows, above the cap of {cap}")
    return ScenarioGrid(axes)


def canonical_axis_name(name: str) -> str:
    key = name.strip().upper()
    return AXIS_ALIASES.get(key, key)


def resolve_columns(model_features: Sequence[str], grid_names: Sequence[str],
                    fixed: Mapping[str, float] | None = None) -> list[tuple[str, int | float]]:
    """For each model feature, either the grid column index or a fixed value.

    Raises ``ConfigError`` naming the expected features when an axis does not
    match any feature or a feature is neither gridded nor fixed.
    """
    canon_feat = {canonical_axis_name(f): f for f in model_features}
    grid_pos = {}
    for j, g in enumerate(grid_names):
        c = canonical_axis_name(g)
        if c not in canon_feat:
            raise ConfigError(f"grid axis {g!r} matches no model feature; expected one of "
                              f"{', '.join(model_features)}")
        grid_pos[canon_feat[c]] = j
    fixed_c = {canonical_axis_name(k): float(v) for k, v in (fixed or {}).items()}
    plan: list[tuple[str, int | float]] = []
    for f in model_features:
        if f in grid_pos:
            plan.append(("grid", grid_pos[f]))
        elif canonical_axis_name(f) in fixed_c:
            plan.append(("fixed", fixed_c[canonical_axis_name(f)]))
        else:
            raise ConfigError(f"model feature {f!r} is neither on the grid nor fixed; expected "
                              f"features: {', '.join(model_features)}")
    return plan


@dataclass(frozen=True)
class ScenarioReport:
    country: str
    model_id: str
    axes: tuple[Axis, ...]
    predictions: np.ndarray
    current_value: float | None = None
    provenance: dict = field(default_factory=dict)
    reference_lines: dict = field(default_factory=lambda: dict(REFERENCE_LINES))

    @property
    def size(self) -> int:
        return int(self.predictions.size)

    def summary(self) -> dict[str, float]:
        p = np.sort(self.predictions)
        out = {"n": float(p.size), "min": float(p[0]), "max": float(p[-1]),
               "mean": float(math.fsum(p.tolist()) / p.size)}
        for q in SUMMARY_QUANTILES:
            out[f"q{q}"] = float(np.quantile(p, q / 100.0))
        return out

    def summary_csv(self) -> str:
        s = self.summary()
        keys = list(s)
        head = ["country", "model", *keys, "current_value"]
        cur = "NA" if self.current_value is None else repr(float(self.current_value))
        vals = [self.country, self.model_id, str(int(s["n"])), *(repr(s[k]) for k in keys[1:]), cur]
        lines = [",".join(head), ",".join(vals)]
        for code, v in self.reference_lines.items():
            lines.append(f"# reference {code},{v}")
        return "\n".join(lines) + "\n"

    def histogram(self, bins: int = HISTOGRAM_BINS) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = float(self.predictions.min()), float(self.predictions.max())
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
        return np.histogram(self.predictions, bins=bins, range=(lo, hi))

    def histogram_csv(self, bins: int = HISTOGRAM_BINS) -> str:
        counts, edges = self.histogram(bins)
        lines = ["bin_lo,bin_hi,count,fraction"]
        for i, c in enumerate(counts):
            lines.append(f"{float(edges[i])!r},{float(edges[i + 1])!r},{int(c)},"
                         f"{float(c / self.size)!r}")
        return "\n".join(lines) + "\n"

    def predictions_csv(self, grid: ScenarioGrid) -> str:
        lines = [",".join([*grid.names, "prediction"])]
        pos = 0
        for block in grid.chunks():
            for row in block:
                lines.append(",".join([*(repr(float(v)) for v in row),
                                       repr(float(self.predictions[pos]))]))
                pos += 1
        return "\n".join(lines) + "\n"


def predict_rows(model, rows: np.ndarray, plan: list[tuple[str, int | float]]) -> np.ndarray:
    X = np.empty((len(rows), len(plan)))
    for j, (kind, v) in enumerate(plan):
        X[:, j] = rows[:, v] if kind == "grid" else v
    return np.asarray(model.predict(X), dtype=float).reshape(len(rows))


def predict_grid(model, grid: ScenarioGrid, fixed: Mapping[str, float] | None = None,
                 country: str = "", model_id: str = "", current_value: float | None = None,
                 provenance: dict | None = None, chunk: int = CHUNK_ROWS) -> ScenarioReport:
    """One prediction per grid row, in grid order.

    Grid axes are matched to the model's features by name (reordered as
    needed); features without an axis take the value given in ``fixed``.
    """
    names = tuple(getattr(model, "feature_names", ()) or ())
    if not names:
        raise DataError("model carries no feature names; cannot match grid axes")
    plan = resolve_columns(names, grid.names, fixed)
    out = np.empty(len(grid))
    pos = 0
    for block in grid.chunks(chunk):
        out[pos:pos + len(block)] = predict_rows(model, block, plan)
        pos += len(block)
    return ScenarioReport(country, model_id, grid.axes, out, current_value, dict(provenance or {}))
