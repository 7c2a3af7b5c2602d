"""Quarterly macro series: parsing, end-of-quarter alignment, transforms and
per-country feature matrices.

Raw inputs are FRED-style ``DATE,VALUE`` exports (daily, monthly or quarterly)
and a wide house-price file with one column per country. Everything is reduced
to end-of-quarter values, interior gaps are filled linearly, and the model
configurations in :data:`BUILTIN_SPECS` pick which indicators enter a panel and
in which form.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DataError,
    EmptySeriesError,
    MissingIndicatorError,
    PanelTooShortError,
    ParseError,
    ZeroValueError,
)

MIN_PANEL_ROWS = 40
MISSING_MARKERS = frozenset({"", "."})


@dataclass(frozen=True, order=True)
class Quarter:
    year: int
    quarter_index: int

    def __post_init__(self):
        if not 1 <= self.quarter_index <= 4:
            raise ValueError(f"quarter index must be in 1..4, got {self.quarter_index}")

    @property
    def ordinal(self) -> int:
        return self.year * 4 + (self.quarter_index - 1)

    @classmethod
    def from_ordinal(cls, ordinal: int) -> Quarter:
        year, q = divmod(int(ordinal), 4)
        return cls(year, q + 1)

    @classmethod
    def from_date(cls, date: dt.date) -> Quarter:
        return cls(date.year, (date.month - 1) // 3 + 1)

    @classmethod
    def parse(cls, text: str) -> Quarter:
        """Parse ``YYYY-Qn`` (also accepts ``YYYYQn``)."""
        s = text.strip().upper().replace("-", "")
        if len(s) != 6 or s[4] != "Q" or not s[:4].isdigit() or s[5] not in "1234":
            raise ValueError(f"invalid quarter {text!r}; expected YYYY-Qn")
        return cls(int(s[:4]), int(s[5]))

    def end_date(self) -> dt.date:
        month = self.quarter_index * 3
        if month == 12:
            return dt.date(self.year, 12, 31)
        return dt.date(self.year, month + 1, 1) - dt.timedelta(days=1)

    def __add__(self, n: int) -> Quarter:
        if not isinstance(n, (int, np.integer)):
            return NotImplemented
        return Quarter.from_ordinal(self.ordinal + int(n))

    def __sub__(self, other):
        if isinstance(other, Quarter):
            return self.ordinal - other.ordinal
        if isinstance(other, (int, np.integer)):
            return Quarter.from_ordinal(self.ordinal - int(other))
        return NotImplemented

    def __str__(self) -> str:
        return f"{self.year}-Q{self.quarter_index}"


class Indicator(str, Enum):
    """Known indicators. Any other string is accepted as a custom indicator."""

    HPI = "HPI"
    CPI_RATE = "CPI_RATE"
    GDP = "GDP"
    GDP_RATE = "GDP_RATE"
    TR10Y = "TR10Y"
    CB_RATE = "CB_RATE"
    FED_RATE = "FED_RATE"
    ECB_ASSETS = "ECB_ASSETS"
    FED_ASSETS = "FED_ASSETS"
    RENT_INDEX = "RENT_INDEX"
    UNEMPLOYMENT = "UNEMPLOYMENT"

    def __str__(self) -> str:
        return self.value


def indicator_key(indicator: str | Indicator) -> str:
    return indicator.value if isinstance(indicator, Indicator) else str(indicator)


class Form(str, Enum):
    NOMINAL = "NOMINAL"
    RATE_4Q = "RATE_4Q"
    RATE_12Q = "RATE_12Q"
    AS_IS = "AS_IS"


class TargetForm(str, Enum):
    HPI_NOMINAL = "HPI_NOMINAL"
    HPI_RATE_12Q = "HPI_RATE_12Q"


@dataclass(frozen=True)
class RawSeries:
    """A dated series at its native sampling frequency."""

    dates: tuple[dt.date, ...]
    values: tuple[float, ...]
    country: str = ""
    indicator: str = ""
    units: str = ""

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class QuarterlySeries:
    """One indicator for one country, at most one value per quarter.

    Quarters absent from ``quarters`` are gaps. ``synthetic`` lists quarters
    whose value was produced by interpolation.
    """

    country: str
    indicator: str
    quarters: tuple[Quarter, ...]
    values: np.ndarray
    units: str = ""
    synthetic: frozenset[Quarter] = field(default_factory=frozenset)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or len(values) != len(self.quarters):
            raise DataError("quarters and values must have equal length")
        if not np.all(np.isfinite(values)):
            raise DataError(f"{self.country}/{self.indicator}: non-finite values")
        for a, b in zip(self.quarters, self.quarters[1:]):
            if not a < b:
                raise DataError(
                    f"{self.country}/{self.indicator}: quarters not strictly increasing at {b}"
                )
        values.flags.writeable = False
        object.__setattr__(self, "indicator", indicator_key(self.indicator))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "quarters", tuple(self.quarters))
        object.__setattr__(self, "synthetic", frozenset(self.synthetic))

    @classmethod
    def from_points(cls, points: Iterable[tuple[Quarter, float]], country: str = "",
                    indicator: str = "", units: str = "") -> QuarterlySeries:
        pts = sorted(points)
        return cls(country, indicator, tuple(q for q, _ in pts),
                   np.array([v for _, v in pts], dtype=float), units)

    def __len__(self) -> int:
        return len(self.quarters)

    @property
    def points(self) -> list[tuple[Quarter, float]]:
        return list(zip(self.quarters, self.values.tolist()))

    def as_dict(self) -> dict[Quarter, float]:
        return dict(self.points)

    def gap_count(self) -> int:
        """Number of missing quarters strictly between the first and last value."""
        if len(self.quarters) < 2:
            return 0
        span = self.quarters[-1] - self.quarters[0] + 1
        return span - len(self.quarters)

    def scaled(self, factor: float) -> QuarterlySeries:
        return QuarterlySeries(self.country, self.indicator, self.quarters,
                               self.values * factor, self.units, self.synthetic)

    def replace_values(self, quarters: Sequence[Quarter], values, synthetic=frozenset()) -> QuarterlySeries:
        return QuarterlySeries(self.country, self.indicator, tuple(quarters),
                               np.asarray(values, dtype=float), self.units, synthetic)


# ---------------------------------------------------------------------------
# parsing


def _parse_number(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def parse_series_csv(path: str | Path, country: str = "", indicator: str = "",
                     units: str = "") -> RawSeries:
    """Read a ``DATE,VALUE`` file (FRED export convention).

    Rows whose value is ``.`` or empty are dropped. The result keeps the file's
    native frequency and is sorted by date; use :func:`resample_end_of_quarter`
    to move it onto quarters.
    """
    path = Path(path)
    rows: list[tuple[dt.date, float]] = []
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptySeriesError("empty file", str(path))
        names = [h.strip().upper() for h in header]
        if len(names) < 2 or names[0] != "DATE":
            raise ParseError(f"expected header DATE,VALUE, got {','.join(header)}", str(path), 1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise ParseError("expected 2 columns", str(path), lineno)
            date_s, value_s = row[0].strip(), row[1].strip()
            try:
                date = dt.date.fromisoformat(date_s)
            except ValueError:
                raise ParseError(f"invalid date {date_s!r}", str(path), lineno) from None
            if value_s in MISSING_MARKERS:
                continue
            try:
                value = _parse_number(value_s)
            except ValueError:
                raise ParseError(f"invalid number {value_s!r}", str(path), lineno) from None
            rows.append((date, value))
    if not rows:
        raise EmptySeriesError("no data rows", str(path))
    rows.sort(key=lambda r: r[0])
    return RawSeries(tuple(d for d, _ in rows), tuple(v for _, v in rows),
                     country, indicator_key(indicator), units)


def parse_wide_hpi_csv(path: str | Path, units: str = "index") -> dict[str, QuarterlySeries]:
    """Read a wide ``QUARTER,<country>,...`` file into one HPI series per country."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptySeriesError("empty file", str(path))
        if header[0].strip().upper() != "QUARTER" or len(header) < 2:
            raise ParseError("expected header QUARTER,<country>,...", str(path), 1)
        countries = [h.strip() for h in header[1:]]
        points: dict[str, list[tuple[Quarter, float]]] = {c: [] for c in countries}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                q = Quarter.parse(row[0])
            except ValueError as exc:
                raise ParseError(str(exc), str(path), lineno) from None
            for country, cell in zip(countries, row[1:]):
                cell = cell.strip()
                if cell in MISSING_MARKERS:
                    continue
                try:
                    points[country].append((q, _parse_number(cell)))
                except ValueError:
                    raise ParseError(f"invalid number {cell!r}", str(path), lineno) from None
    out = {}
    for country, pts in points.items():
        if pts:
            qs = [q for q, _ in pts]
            if len(set(qs)) != len(qs):
                raise ParseError(f"duplicate quarter for {country}", str(path))
            out[country] = QuarterlySeries.from_points(pts, country, Indicator.HPI, units)
    if not out:
        raise EmptySeriesError("no data rows", str(path))
    return out


# ---------------------------------------------------------------------------
# alignment and transforms


def resample_end_of_quarter(raw: RawSeries) -> QuarterlySeries:
    """Keep, for every quarter, the last observation dated inside it.

    Quarters without any observation are left out (gaps).
    """
    if len(raw) == 0:
        raise DataError("cannot resample an empty series")
    last: dict[Quarter, tuple[dt.date, float]] = {}
    for date, value in zip(raw.dates, raw.values):
        q = Quarter.from_date(date)
        prev = last.get(q)
        if prev is None or date >= prev[0]:
            last[q] = (date, value)
    quarters = sorted(last)
    return QuarterlySeries(raw.country, raw.indicator, tuple(quarters),
                           np.array([last[q][1] for q in quarters]), raw.units)


def fill_gaps_linear(series: QuarterlySeries) -> QuarterlySeries:
    """Linearly interpolate interior gaps; never extrapolate."""
    if len(series) < 2:
        raise DataError(
            f"{series.country}/{series.indicator}: need at least 2 present quarters to fill gaps"
        )
    if series.gap_count() == 0:
        return series
    ords = np.array([q.ordinal for q in series.quarters])
    full = np.arange(ords[0], ords[-1] + 1)
    values = np.interp(full, ords, series.values)
    present = set(ords.tolist())
    quarters = [Quarter.from_ordinal(o) for o in full]
    synthetic = set(series.synthetic)
    synthetic.update(q for q, o in zip(quarters, full) if o not in present)
    return series.replace_values(quarters, values, frozenset(synthetic))


def rate_change(series: QuarterlySeries, lag: int) -> QuarterlySeries:
    """``(v[i] - v[i-lag]) / v[i]`` wherever both quarters are present.

    The divisor is the current value, not the lagged one.
    """
    if lag < 1:
        raise ValueError("lag must be positive")
    lookup = series.as_dict()
    quarters, values = [], []
    for q, v in zip(series.quarters, series.values):
        base = lookup.get(q - lag)
        if base is None:
            continue
        if v == 0:
            raise ZeroValueError(
                f"{series.country}/{series.indicator}: zero value at {q} in {lag}-quarter rate"
            )
        quarters.append(q)
        values.append((v - base) / v)
    if not quarters:
        raise DataError(
            f"{series.country}/{series.indicator}: need at least {lag + 1} consecutive quarters"
        )
    synthetic = frozenset(q for q in quarters if q in series.synthetic or (q - lag) in series.synthetic)
    return series.replace_values(quarters, values, synthetic)


def rate_12q(series: QuarterlySeries) -> QuarterlySeries:
    return rate_change(series, 12)


def rate_4q(series: QuarterlySeries) -> QuarterlySeries:
    return rate_change(series, 4)


def apply_form(series: QuarterlySeries, form: Form | str, rate_scale: float = 1.0) -> QuarterlySeries:
    form = Form(form)
    if form in (Form.NOMINAL, Form.AS_IS):
        return series
    out = rate_4q(series) if form is Form.RATE_4Q else rate_12q(series)
    return out.scaled(rate_scale) if rate_scale != 1.0 else out


# ---------------------------------------------------------------------------
# model configurations


@dataclass(frozen=True)
class FeatureSpec:
    indicator: str
    form: Form = Form.AS_IS
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "indicator", indicator_key(self.indicator))
        object.__setattr__(self, "form", Form(self.form))
        if not self.name:
            object.__setattr__(self, "name", self.indicator)


@dataclass(frozen=True)
class ModelSpec:
    """Which indicators feed a model and in which form.

    Rate transforms (features and target) are multiplied by ``rate_scale`` so
    that they come out in percent, the unit used for rates elsewhere.
    """

    name: str
    features: tuple[FeatureSpec, ...]
    target_form: TargetForm = TargetForm.HPI_NOMINAL
    title: str = ""
    rate_scale: float = 100.0

    def __post_init__(self):
        feats = tuple(self.features)
        if not feats:
            raise ValueError(f"spec {self.name}: feature list is empty")
        keys = [(f.indicator, f.form) for f in feats]
        if len(set(keys)) != len(keys):
            raise ValueError(f"spec {self.name}: duplicate (indicator, form) pair")
        names = [f.name for f in feats]
        if len(set(names)) != len(names):
            raise ValueError(f"spec {self.name}: duplicate feature name")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "target_form", TargetForm(self.target_form))

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @property
    def indicators(self) -> tuple[str, ...]:
        return (Indicator.HPI.value,) + tuple(f.indicator for f in self.features)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "title": self.title,
            "target_form": self.target_form.value,
            "rate_scale": self.rate_scale,
            "features": [
                {"indicator": f.indicator, "form": f.form.value, "name": f.name}
                for f in self.features
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> ModelSpec:
        return cls(
            name=d["name"],
            features=tuple(FeatureSpec(f["indicator"], f.get("form", "AS_IS"), f.get("name", ""))
                           for f in d["features"]),
            target_form=d.get("target_form", TargetForm.HPI_NOMINAL),
            title=d.get("title", ""),
            rate_scale=float(d.get("rate_scale", 100.0)),
        )


_GDP = FeatureSpec(Indicator.GDP, Form.NOMINAL, "GDP")
_GDP_R = FeatureSpec(Indicator.GDP_RATE, Form.AS_IS, "GDP")
_CPI = FeatureSpec(Indicator.CPI_RATE, Form.AS_IS, "CPI")
_TR = FeatureSpec(Indicator.TR10Y, Form.AS_IS, "TR10Y")
_ECB = FeatureSpec(Indicator.ECB_ASSETS, Form.NOMINAL, "ECB")
_FED = FeatureSpec(Indicator.FED_ASSETS, Form.NOMINAL, "FED")
_FED_RATE = FeatureSpec(Indicator.FED_RATE, Form.AS_IS, "FED_RATE")
_CB = FeatureSpec(Indicator.CB_RATE, Form.AS_IS, "CB_RATE")
_UNEMP = FeatureSpec(Indicator.UNEMPLOYMENT, Form.AS_IS, "UNEMPLOYMENT")
_RENT = FeatureSpec(Indicator.RENT_INDEX, Form.AS_IS, "RENT")
_NOM = TargetForm.HPI_NOMINAL
_RATE = TargetForm.HPI_RATE_12Q

# Rows of the model table, in order. Model 1 uses GDP in level form, every
# other model uses the GDP growth rate. The LOCAL models use only domestic
# inputs (GDP, inflation, unemployment).
BUILTIN_SPECS: dict[str, ModelSpec] = {
    s.name: s
    for s in (
        ModelSpec("3-param", (_GDP, _CPI, _TR), _NOM, "3-parameter"),
        ModelSpec("3-param-1yr", (_GDP_R, _CPI, _TR), _RATE, "3-parameter 1yr"),
        ModelSpec("ir", (_GDP_R, _CPI, _TR, _FED_RATE), _NOM, "IR models (US central bank rate)"),
        ModelSpec("lir", (_GDP_R, _CPI, _TR, _CB), _NOM, "Local central bank rate"),
        ModelSpec("ecb", (_GDP_R, _CPI, _TR, _ECB), _NOM, "ECB"),
        ModelSpec("ecb-fed", (_GDP_R, _CPI, _TR, _ECB, _FED), _NOM, "ECB/FED"),
        ModelSpec("ecb-1yr", (_GDP_R, _CPI, _TR, _ECB), _RATE, "ECB 1yr"),
        ModelSpec("local", (_GDP_R, _CPI, _UNEMP), _NOM, "LOCAL"),
        ModelSpec("local-1yr", (_GDP_R, _CPI, _UNEMP), _RATE, "LOCAL 1yr"),
        ModelSpec("rents", (_GDP_R, _CPI, _TR, _RENT), _NOM, "Rents"),
        ModelSpec("rents-1yr", (_GDP_R, _CPI, _TR, _RENT), _RATE, "Rent 1yr"),
        ModelSpec("permutations", (_GDP_R, _CPI, _TR), _NOM, "Permutations"),
    )
}

SPEC_ALIASES = {
    "3-parameter": "3-param",
    "3param": "3-param",
    "3-param-1y": "3-param-1yr",
    "ecb_1y": "ecb-1yr",
    "ecb-1y": "ecb-1yr",
    "ecb_1yr": "ecb-1yr",
    "ecb/fed": "ecb-fed",
    "rent": "rents",
    "rent-1yr": "rents-1yr",
}


def get_spec(name: str) -> ModelSpec:
    key = name.strip().lower()
    key = SPEC_ALIASES.get(key, key)
    try:
        return BUILTIN_SPECS[key]
    except KeyError:
        raise KeyError(
            f"unknown spec {name!r}; valid specs: {', '.join(BUILTIN_SPECS)}"
        ) from None


# ---------------------------------------------------------------------------
# panels


@dataclass(frozen=True)
class CountryDataset:
    country: str
    spec: ModelSpec
    quarters: tuple[Quarter, ...]
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DataError(f"inconsistent shapes X{X.shape} y{y.shape}")
        if X.shape[1] != len(self.feature_names):
            raise DataError("feature_names do not match X columns")
        if len(self.quarters) != len(y):
            raise DataError("quarters do not match rows")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "quarters", tuple(self.quarters))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.feature_names.index(name)]

    def rows(self, index) -> CountryDataset:
        """Subset of rows (slice or index array); no length check."""
        q = np.asarray(self.quarters, dtype=object)[index]
        return CountryDataset(self.country, self.spec, tuple(q), self.X[index], self.y[index],
                              self.feature_names)

    def with_X(self, X: np.ndarray) -> CountryDataset:
        return CountryDataset(self.country, self.spec, self.quarters, X, self.y, self.feature_names)

    def with_y(self, y: np.ndarray) -> CountryDataset:
        return CountryDataset(self.country, self.spec, self.quarters, self.X, y, self.feature_names)


def from_arrays(X, y, feature_names: Sequence[str] | None = None, country: str = "SYN",
                start: Quarter = Quarter(1980, 1), spec: ModelSpec | None = None) -> CountryDataset:
    """Wrap plain arrays (synthetic data, tests) into a :class:`CountryDataset`."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if feature_names is None:
        feature_names = [f"x{j + 1}" for j in range(X.shape[1])]
    if spec is None:
        spec = ModelSpec("custom", tuple(FeatureSpec(n, Form.AS_IS, n) for n in feature_names))
    quarters = tuple(start + i for i in range(X.shape[0]))
    return CountryDataset(country, spec, quarters, X, np.asarray(y, dtype=float),
                          tuple(feature_names))


def transformed_target(spec: ModelSpec, hpi: QuarterlySeries) -> QuarterlySeries:
    if spec.target_form is TargetForm.HPI_RATE_12Q:
        return rate_12q(hpi).scaled(spec.rate_scale)
    return hpi


def transformed_features(spec: ModelSpec, bundle: Mapping[str, QuarterlySeries]) -> list[QuarterlySeries]:
    return [apply_form(bundle[f.indicator], f.form, spec.rate_scale) for f in spec.features]


def assemble_dataset(spec: ModelSpec, series_bundle: Mapping[str, QuarterlySeries],
                     country: str, min_rows: int = MIN_PANEL_ROWS) -> CountryDataset:
    """Build the panel for ``spec``: transform each input, then keep only the
    quarters where the target and every feature are present."""
    bundle = {indicator_key(k): v for k, v in series_bundle.items()}
    for key in spec.indicators:
        if key not in bundle:
            raise MissingIndicatorError(key)
    target = transformed_target(spec, bundle[Indicator.HPI.value])
    features = transformed_features(spec, bundle)
    maps = [s.as_dict() for s in features]
    common = set(target.quarters)
    for m in maps:
        common.intersection_update(m)
    quarters = sorted(common)
    if len(quarters) < min_rows:
        raise PanelTooShortError(
            f"{country}/{spec.name}: panel too short ({len(quarters)} aligned quarters, "
            f"need {min_rows})"
        )
    tmap = target.as_dict()
    X = np.array([[m[q] for m in maps] for q in quarters], dtype=float).reshape(len(quarters), -1)
    y = np.array([tmap[q] for q in quarters], dtype=float)
    return CountryDataset(country, spec, tuple(quarters), X, y, spec.feature_names)


def dump_dataset_csv(data: CountryDataset) -> str:
    """Canonical audit dump: ``quarter,y,<feature...>``."""
    lines = [",".join(["quarter", "y", *data.feature_names])]
    for q, yv, row in zip(data.quarters, data.y, data.X):
        lines.append(",".join([str(q), repr(float(yv)), *(repr(float(v)) for v in row)]))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class CorrelationMatrix:
    countries: tuple[str, ...]
    corr: np.ndarray
    overlap: np.ndarray

    def to_csv(self) -> str:
        head = ",".join(["country", "nobs", *self.countries])
        lines = [head]
        for i, c in enumerate(self.countries):
            cells = ["" if np.isnan(v) else f"{v:.4f}" for v in self.corr[i]]
            lines.append(",".join([c, str(int(self.overlap[i, i])), *cells]))
        return "\n".join(lines) + "\n"


def hpi_correlation_matrix(hpi_by_country: Mapping[str, QuarterlySeries],
                           min_overlap: int = 8) -> CorrelationMatrix:
    """Pairwise Pearson correlation of HPI levels on overlapping quarters.

    Pairs with fewer than ``min_overlap`` common quarters are NaN.
    """
    countries = tuple(hpi_by_country)
    if len(countries) < 2:
        raise DataError("need at least two countries")
    k = len(countries)
    corr = np.full((k, k), np.nan)
    overlap = np.zeros((k, k), dtype=int)
    maps = [hpi_by_country[c].as_dict() for c in countries]
    for i in range(k):
        overlap[i, i] = len(maps[i])
        corr[i, i] = 1.0
        for j in range(i + 1, k):
            common = sorted(set(maps[i]) & set(maps[j]))
            overlap[i, j] = overlap[j, i] = len(common)
            if len(common) < min_overlap:
                continue
            a = np.array([maps[i][q] for q in common])
            b = np.array([maps[j][q] for q in common])
            r = _pearson(a, b)
            corr[i, j] = corr[j, i] = r
    return CorrelationMatrix(countries, corr, overlap)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    denom = math.sqrt(float(da @ da) * float(db @ db))
    if denom == 0:
        return float("nan")
    return float(np.clip((da @ db) / denom, -1.0, 1.0))
