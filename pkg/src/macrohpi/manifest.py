"""Run manifest: which files feed which (country, indicator), plus run settings.

Example (YAML; paths are relative to the manifest file)::

    version: 1
    seed: 0
    runs: 600
    output: out
    learner: treebag
    hpi: {path: hpi_wide.csv}              # QUARTER,<country>,... layout
    global:                                # shared by every country
      TR10Y: {path: dgs10.csv, units: percent}
      ECB_ASSETS: {path: ecb_assets.csv, units: MEUR}
    countries:
      CH:
        CPI_RATE: {path: ch_cpi_index.csv, form: rate_4q}
        GDP: {path: ch_gdp.csv}
        GDP_RATE: {from: GDP, form: rate_4q}
    grid:
      axes: ["GDP:-2:2:20", "CPI:-2:2:20", "ECB:5.5e6:7.5e6:20", "TR10Y:0:4:20"]
    baselines: {p: 2, deterministic: both, horizon: 4}
    holdout: {horizon: 4}

Series entries accept ``path`` (a ``DATE,VALUE`` file) or ``from`` (another
indicator of the same country). ``form`` is applied at ingestion
(``as_is``, ``rate_4q``, ``rate_12q``); rate forms are expressed in percent
unless ``scale`` says otherwise. A per-country ``HPI`` entry overrides the wide
HPI file.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .dataset import (
    Form, Indicator, QuarterlySeries, apply_form, fill_gaps_linear, indicator_key,
    parse_series_csv, parse_wide_hpi_csv, resample_end_of_quarter,
)
from .errors import ConfigError
from .scenario import Axis, default_axes

MANIFEST_ENV = "MACROHPI_MANIFEST"
SERIES_KEYS = {"path", "from", "form", "units", "scale"}


@dataclass(frozen=True)
class SeriesSource:
    indicator: str
    path: Path | None = None
    derive_from: str | None = None
    form: Form = Form.AS_IS
    units: str = ""
    scale: float | None = None

    @property
    def effective_scale(self) -> float:
        if self.scale is not None:
            return self.scale
        return 100.0 if self.form in (Form.RATE_4Q, Form.RATE_12Q) else 1.0


@dataclass(frozen=True)
class RunManifest:
    base_dir: Path
    countries: dict[str, dict[str, SeriesSource]]
    hpi_path: Path | None = None
    global_series: dict[str, SeriesSource] = field(default_factory=dict)
    seed: int = 0
    runs: int = 600
    output: Path = Path("out")
    learner: str = "treebag"
    specs: tuple[str, ...] = ()
    axes: tuple[Axis, ...] = ()
    fixed: dict[str, float] = field(default_factory=dict)
    baselines: dict[str, Any] | None = None
    holdout: dict[str, Any] | None = None
    source: Path | None = None

    def sources_for(self, country: str) -> dict[str, SeriesSource]:
        if country not in self.countries:
            raise ConfigError(f"country {country!r} not in manifest; configured: "
                              f"{', '.join(self.countries) or 'none'}")
        merged = dict(self.global_series)
        merged.update(self.countries[country])
        return merged


def _series(indicator: str, entry: Any, base: Path) -> SeriesSource:
    if isinstance(entry, str):
        entry = {"path": entry}
    if not isinstance(entry, Mapping):
        raise ConfigError(f"{indicator}: series entry must be a mapping or a path")
    unknown = set(entry) - SERIES_KEYS
    if unknown:
        raise ConfigError(f"{indicator}: unknown keys {sorted(unknown)}")
    if ("path" in entry) == ("from" in entry):
        raise ConfigError(f"{indicator}: give exactly one of 'path' or 'from'")
    try:
        form = Form(str(entry.get("form", "as_is")).upper())
    except ValueError:
        raise ConfigError(f"{indicator}: unknown form {entry.get('form')!r}") from None
    path = base / entry["path"] if "path" in entry else None
    scale = entry.get("scale")
    return SeriesSource(indicator_key(indicator), path,
                        indicator_key(entry["from"]) if "from" in entry else None,
                        form, str(entry.get("units", "")),
                        None if scale is None else float(scale))


def _axes(spec: Any) -> tuple[Axis, ...]:
    out = []
    for a in spec or ():
        try:
            out.append(Axis.parse(a) if isinstance(a, str) else
                       Axis(str(a["name"]), float(a["min"]), float(a["max"]), int(a["count"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad grid axis {a!r}: {exc}") from None
    return tuple(out)


def parse_manifest(doc: Mapping[str, Any], base_dir: Path, source: Path | None = None,
                   check_paths: bool = True) -> RunManifest:
    if not isinstance(doc, Mapping):
        raise ConfigError("manifest must be a mapping")
    countries_doc = doc.get("countries") or {}
    if not countries_doc:
        raise ConfigError("no countries configured")
    countries = {}
    for code, entries in countries_doc.items():
        entries = entries or {}
        if not isinstance(entries, Mapping):
            raise ConfigError(f"country {code}: expected a mapping of indicators")
        countries[str(code)] = {indicator_key(k): _series(k, v, base_dir) for k, v in entries.items()}
    global_series = {indicator_key(k): _series(k, v, base_dir)
                     for k, v in (doc.get("global") or {}).items()}
    hpi = doc.get("hpi")
    hpi_path = None
    if hpi:
        hpi_path = base_dir / (hpi["path"] if isinstance(hpi, Mapping) else hpi)
    grid = doc.get("grid") or {}
    out = Path(doc.get("output", "out"))
    man = RunManifest(
        base_dir=base_dir,
        countries=countries,
        hpi_path=hpi_path,
        global_series=global_series,
        seed=int(doc.get("seed", 0)),
        runs=int(doc.get("runs", 600)),
        output=out if out.is_absolute() else base_dir / out,
        learner=str(doc.get("learner", "treebag")),
        specs=tuple(doc.get("specs", ()) or ()),
        axes=_axes(grid.get("axes")) if grid.get("axes") else (default_axes() if grid else ()),
        fixed={str(k): float(v) for k, v in (grid.get("fixed") or {}).items()},
        baselines=dict(doc["baselines"]) if doc.get("baselines") else None,
        holdout=dict(doc["holdout"]) if isinstance(doc.get("holdout"), Mapping)
        else ({} if doc.get("holdout") else None),
        source=source,
    )
    if check_paths:
        missing = [p for p in _all_paths(man) if not p.is_file()]
        if missing:
            raise ConfigError(f"missing data file: {missing[0]}")
    return man


def _all_paths(man: RunManifest) -> list[Path]:
    paths = [man.hpi_path] if man.hpi_path else []
    for src in man.global_series.values():
        paths += [src.path] if src.path else []
    for entries in man.countries.values():
        paths += [s.path for s in entries.values() if s.path]
    return paths


def load_manifest(path: str | Path | None = None, check_paths: bool = True) -> RunManifest:
    """Load a YAML manifest; ``None`` falls back to ``$MACROHPI_MANIFEST``."""
    if path is None:
        path = os.environ.get(MANIFEST_ENV)
    if not path:
        raise ConfigError(f"no manifest given (use --manifest or ${MANIFEST_ENV})")
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"manifest not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if doc is None:
        raise ConfigError("no countries configured")
    return parse_manifest(doc, path.resolve().parent, path, check_paths)


# ---------------------------------------------------------------------------
# ingestion


@dataclass(frozen=True)
class Coverage:
    country: str
    indicator: str
    first: str
    last: str
    points: int
    gaps: int
    interpolated: int

    COLUMNS = ("country", "indicator", "first", "last", "points", "gaps", "interpolated")

    def row(self) -> list[str]:
        return [self.country, self.indicator, self.first, self.last, str(self.points),
                str(self.gaps), str(self.interpolated)]


def _prepare(series: QuarterlySeries, src: SeriesSource) -> QuarterlySeries:
    filled = fill_gaps_linear(series) if len(series) >= 2 else series
    return apply_form(filled, src.form, src.effective_scale)


def ingest_country(man: RunManifest, country: str,
                   hpi_cache: dict[str, QuarterlySeries] | None = None
                   ) -> tuple[dict[str, QuarterlySeries], list[Coverage]]:
    """Parse, align to quarters, fill interior gaps and apply form hints for
    every series of ``country``. Returns the bundle and a coverage report."""
    sources = man.sources_for(country)
    bundle: dict[str, QuarterlySeries] = {}
    coverage: list[Coverage] = []

    def record(ind: str, before: QuarterlySeries, after: QuarterlySeries):
        coverage.append(Coverage(country, ind, str(after.quarters[0]), str(after.quarters[-1]),
                                 len(after), before.gap_count(), len(after.synthetic)))

    if Indicator.HPI.value not in sources:
        if man.hpi_path is None:
            raise ConfigError(f"{country}: no HPI source (set 'hpi' or a per-country HPI entry)")
        wide = hpi_cache if hpi_cache is not None else parse_wide_hpi_csv(man.hpi_path)
        if country not in wide:
            raise ConfigError(f"{country}: not a column of {man.hpi_path}")
        raw_q = wide[country]
        bundle[Indicator.HPI.value] = _prepare(raw_q, SeriesSource(Indicator.HPI.value))
        record(Indicator.HPI.value, raw_q, bundle[Indicator.HPI.value])

    pending = dict(sources)
    quarterly: dict[str, QuarterlySeries] = {}
    for ind, src in list(pending.items()):
        if src.path is not None:
            raw = parse_series_csv(src.path, country, ind, src.units)
            q = resample_end_of_quarter(raw)
            quarterly[ind] = fill_gaps_linear(q) if len(q) >= 2 else q
            bundle[ind] = apply_form(quarterly[ind], src.form, src.effective_scale)
            record(ind, q, bundle[ind])
            del pending[ind]
    # derived entries, possibly chained
    while pending:
        progressed = False
        for ind, src in list(pending.items()):
            if src.derive_from in quarterly:
                base = quarterly[src.derive_from]
                q = QuarterlySeries(country, ind, base.quarters, base.values, src.units or base.units,
                                    base.synthetic)
                quarterly[ind] = q
                bundle[ind] = apply_form(q, src.form, src.effective_scale)
                record(ind, q, bundle[ind])
                del pending[ind]
                progressed = True
        if not progressed:
            raise ConfigError(f"{country}: cannot derive {', '.join(pending)} "
                              f"(unknown or circular 'from')")
    return bundle, coverage
