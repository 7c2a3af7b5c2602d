"""Command-line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .baselines import Deterministic, benchmark_table, fit_glm, linear_inversion, perturbed_glm_ensemble
from .dataset import (
    BUILTIN_SPECS, CountryDataset, MIN_PANEL_ROWS, ModelSpec, TargetForm, assemble_dataset,
    dump_dataset_csv, get_spec, hpi_correlation_matrix, parse_wide_hpi_csv,
)
from .diagnostics import AdfRegression, adf_test, holdout_last4, permutation_test, split_holdout
from .errors import ConfigError, DataError, MacroHPIError, MissingIndicatorError, NumericalError, \
    PanelTooShortError
from .manifest import RunManifest, ingest_country, load_manifest
from .metrics import statistics_csv
from .models import ensemble_fit, get_learner, variable_importance
from .models.io import dumps
from .scenario import Axis, build_grid, default_axes, predict_grid

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


# ---------------------------------------------------------------------------
# helpers


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:10]


def data_fingerprint(data: CountryDataset) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(data.X).tobytes())
    h.update(np.ascontiguousarray(data.y).tobytes())
    h.update(",".join(map(str, data.quarters)).encode())
    return h.hexdigest()[:16]


def spec_slug(spec: ModelSpec) -> str:
    return spec.name.replace("-", "").replace("/", "")


def run_dir(out: Path, kind: str, data: CountryDataset, learner: str, config: dict) -> Path:
    config = dict(config, country=data.country, spec=data.spec.to_dict(), learner=learner,
                  data=data_fingerprint(data))
    name = f"{data.country.lower()}_{spec_slug(data.spec)}_{learner}_{config_hash(config)}"
    return out / kind / name


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "NA" if v is None or not math.isfinite(v) else repr(float(v))


def _spec(name: str) -> ModelSpec:
    try:
        return get_spec(name)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None


class Context:
    """Resolved settings: command-line flags override manifest values."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self._manifest: RunManifest | None = None

    @property
    def manifest(self) -> RunManifest:
        if self._manifest is None:
            self._manifest = load_manifest(getattr(self.args, "manifest", None))
        return self._manifest

    @property
    def seed(self) -> int:
        s = getattr(self.args, "seed", None)
        return self.manifest.seed if s is None else s

    @property
    def runs(self) -> int:
        r = getattr(self.args, "runs", None)
        r = self.manifest.runs if r is None else r
        if r < 1:
            raise ConfigError("--runs must be >= 1")
        return r

    @property
    def out(self) -> Path:
        o = getattr(self.args, "out", None)
        return Path(o) if o else self.manifest.output

    @property
    def learner_name(self) -> str:
        name = getattr(self.args, "learner", None) or self.manifest.learner
        try:
            return get_learner(name).name
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from None

    def spec(self, default: str) -> ModelSpec:
        name = getattr(self.args, "spec", None) or (self.manifest.specs[0] if self.manifest.specs
                                                    else default)
        return _spec(name)

    def countries(self) -> list[str]:
        c = getattr(self.args, "country", None)
        if c:
            self.manifest.sources_for(c)
            return [c]
        return list(self.manifest.countries)

    def country(self) -> str:
        c = getattr(self.args, "country", None)
        if c:
            self.manifest.sources_for(c)
            return c
        if len(self.manifest.countries) == 1:
            return next(iter(self.manifest.countries))
        raise ConfigError("--country is required when the manifest lists several countries")

    def dataset(self, country: str, spec: ModelSpec) -> CountryDataset:
        bundle, _ = ingest_country(self.manifest, country)
        return assemble_dataset(spec, bundle, country)


def say(msg: str) -> None:
    print(msg, flush=True)


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(ctx: Context) -> int:
    # an explicitly chosen spec must assemble; otherwise unavailable specs are skipped
    explicit = getattr(ctx.args, "spec", None)
    if explicit:
        specs = [ctx.spec("3-param")]
    elif ctx.manifest.specs:
        specs = [_spec(s) for s in ctx.manifest.specs]
    else:
        specs = list(BUILTIN_SPECS.values())
    out = ctx.out / "datasets"
    cov_lines = ["country,indicator,first,last,points,gaps,interpolated"]
    for country in ctx.countries():
        bundle, coverage = ingest_country(ctx.manifest, country)
        for c in coverage:
            cov_lines.append(",".join(c.row()))
            say(f"{c.country} {c.indicator}: {c.first}..{c.last} n={c.points} gaps={c.gaps} "
                f"interpolated={c.interpolated}")
        for spec in specs:
            try:
                data = assemble_dataset(spec, bundle, country)
            except (MissingIndicatorError, PanelTooShortError) as exc:
                if explicit:
                    raise
                say(f"{country} {spec.name}: skipped ({exc})")
                continue
            path = out / f"{country.lower()}_{spec_slug(spec)}.csv"
            write_atomic(path, dump_dataset_csv(data))
            say(f"{country} {spec.name}: {data.n} rows x {data.d} features -> {path}")
    write_atomic(out / "coverage.csv", "\n".join(cov_lines) + "\n")
    return EXIT_OK


def cmd_fit(ctx: Context) -> int:
    country = ctx.country()
    spec = ctx.spec("3-param")
    learner = ctx.learner_name
    data = ctx.dataset(country, spec)
    runs, seed = ctx.runs, ctx.seed
    res = ensemble_fit(data, learner, runs, seed, workers=getattr(ctx.args, "workers", 1) or 1)
    d = run_dir(ctx.out, "fit", data, learner, {"runs": runs, "seed": seed})
    write_atomic(d / "statistics.csv", statistics_csv([(country, res.statistics)]))
    write_atomic(d / "runs.csv", res.records_csv())
    write_atomic(d / "model.json", dumps(res.final_model, spec, country) + "\n")
    write_atomic(d / "importance.csv", variable_importance(res.final_model).to_csv())
    lines = ["quarter,observed,fitted,residual"]
    for q, o, p in zip(data.quarters, data.y, res.final_prediction):
        lines.append(f"{q},{_fmt(o)},{_fmt(p)},{_fmt(o - p)}")
    write_atomic(d / "residuals.csv", "\n".join(lines) + "\n")
    write_atomic(d / "config.json", json.dumps(
        {"country": country, "spec": spec.to_dict(), "learner": learner, "runs": runs,
         "seed": seed, "rows": data.n, "first": str(data.quarters[0]),
         "last": str(data.quarters[-1]), "version": __version__}, sort_keys=True, indent=2) + "\n")
    st = res.statistics
    say(f"{country} {spec.name} {learner}: runs={runs} M_RMS={_fmt(st.m_rms)} "
        f"M_MAPE={_fmt(st.m_mape)} M_COR={_fmt(st.m_cor)} -> {d}")
    return EXIT_OK


def cmd_diagnose(ctx: Context) -> int:
    which = ctx.args.which
    if which == "adf":
        return _diagnose_adf(ctx)
    country = ctx.country()
    learner = ctx.learner_name
    if which == "permute":
        spec = ctx.spec("3-param")
        data = ctx.dataset(country, spec)
        rep = permutation_test(data, learner, ctx.runs, ctx.seed)
        d = run_dir(ctx.out, "diagnose/permute", data, learner, {"runs": ctx.runs, "seed": ctx.seed})
        write_atomic(d / "permute.csv", rep.to_csv())
        write_atomic(d / "permute_paths.csv", rep.paths_csv())
        for k, v in rep.degradation().items():
            say(f"{country} permute {k}: RMS ratio {v:.3f}")
        say(f"-> {d}")
        return EXIT_OK
    spec = ctx.spec("ecb-1yr")
    data = ctx.dataset(country, spec)
    horizon = int((ctx.manifest.holdout or {}).get("horizon", 4))
    rep = holdout_last4(data, learner, ctx.runs, ctx.seed, horizon)
    d = run_dir(ctx.out, "diagnose/holdout", data, learner,
                {"runs": ctx.runs, "seed": ctx.seed, "horizon": horizon})
    write_atomic(d / "holdout_statistics.csv", rep.statistics_csv())
    write_atomic(d / "holdout_path.csv", rep.path_csv())
    say(f"{country} holdout {learner}: mean path "
        f"{', '.join(f'{v:.2f}' for v in rep.mean_path)} vs observed "
        f"{', '.join(f'{v:.2f}' for v in rep.observed)} -> {d}")
    return EXIT_OK


def _diagnose_adf(ctx: Context) -> int:
    fit_root = ctx.out / "fit"
    found = sorted(fit_root.glob("*/residuals.csv")) if fit_root.is_dir() else []
    if not found:
        raise ConfigError(f"no fitted models found under {fit_root}; run 'fit' first")
    reg = AdfRegression(ctx.args.regression)
    lines = ["country,model,learner,statistic,p_value,lags,nobs,run"]
    for path in found:
        cfg = json.loads((path.parent / "config.json").read_text())
        resid = np.loadtxt(path, delimiter=",", skiprows=1, usecols=3, ndmin=1)
        res = adf_test(resid, reg, ctx.args.lags)
        lines.append(",".join([cfg["country"], cfg["spec"]["name"], cfg["learner"],
                               _fmt(res.statistic), _fmt(res.p_value), str(res.lags),
                               str(res.nobs), path.parent.name]))
        say(f"{cfg['country']} {cfg['spec']['name']} {cfg['learner']}: "
            f"ADF {res.statistic:.3f} p={res.p_value:.3f}")
    dest = ctx.out / "diagnose" / "adf.csv"
    write_atomic(dest, "\n".join(lines) + "\n")
    say(f"-> {dest}")
    return EXIT_OK


def cmd_predict_grid(ctx: Context) -> int:
    country = ctx.country()
    spec = ctx.spec("ecb-1yr")
    learner = ctx.learner_name
    data = ctx.dataset(country, spec)
    axes = tuple(ctx.args.axis) if ctx.args.axis else (ctx.manifest.axes or None)
    if axes is None:
        axes = default_axes()
    try:
        grid = build_grid(axes)
    except (ValueError, OverflowError) as exc:
        raise ConfigError(str(exc)) from None
    # features without an axis stay at their latest observed value
    fixed = {nm: float(data.X[-1, j]) for j, nm in enumerate(data.feature_names)}
    fixed.update(ctx.manifest.fixed)
    model = get_learner(learner).fit(data, ctx.seed)
    current = float(data.y[-1]) if spec.target_form is TargetForm.HPI_RATE_12Q else None
    prov = {"spec": spec.name, "learner": learner, "seed": ctx.seed,
            "train_last": str(data.quarters[-1])}
    rep = predict_grid(model, grid, fixed, country, f"{spec.name}/{learner}", current, prov)
    d = run_dir(ctx.out, "scenario", data, learner,
                {"seed": ctx.seed, "axes": [a.__dict__ for a in grid.axes], "fixed": fixed})
    write_atomic(d / "summary.csv", rep.summary_csv())
    write_atomic(d / "histogram.csv", rep.histogram_csv())
    if ctx.args.full:
        write_atomic(d / "predictions.csv", rep.predictions_csv(grid))
    s = rep.summary()
    say(f"{country} {spec.name} {learner}: {rep.size} evaluations, median {s['q50']:.3f} "
        f"[{s['min']:.3f}, {s['max']:.3f}] -> {d}")
    return EXIT_OK


def cmd_benchmark(ctx: Context) -> int:
    cfg = ctx.manifest.baselines
    if cfg is None:
        raise ConfigError("manifest has no 'baselines' section")
    country = ctx.country()
    spec = ctx.spec("ecb-1yr")
    data = ctx.dataset(country, spec)
    horizon = int(cfg.get("horizon", 4))
    p = int(cfg.get("p", 2))
    try:
        det = Deterministic(str(cfg.get("deterministic", "both")).lower())
    except ValueError:
        raise ConfigError(f"bad deterministic option {cfg.get('deterministic')!r}") from None
    table = benchmark_table(data, horizon, ctx.runs, ctx.seed, p, det)
    train, _ = split_holdout(data, horizon, MIN_PANEL_ROWS)
    d = run_dir(ctx.out, "benchmark", data, "all",
                {"runs": ctx.runs, "seed": ctx.seed, "baselines": cfg})
    write_atomic(d / "benchmark.csv", table.to_csv())
    write_atomic(d / "linear_inversion.csv", linear_inversion(train).to_csv())
    write_atomic(d / "glm.csv", fit_glm(train).to_csv())
    amp = float(cfg.get("amplitude", 0.1))
    ens = perturbed_glm_ensemble(train, int(cfg.get("perturb_runs", ctx.runs)), amp, ctx.seed)
    write_atomic(d / "glm_perturbed.csv", ens.to_csv())
    for k, v in table.notes.items():
        say(f"note {k}: {v}")
    say(f"{country} benchmark: {len(table.quarters)} quarters -> {d}")
    return EXIT_OK


def cmd_correlate(ctx: Context) -> int:
    man = ctx.manifest
    hpi = {}
    wide = parse_wide_hpi_csv(man.hpi_path) if man.hpi_path else {}
    for country in man.countries:
        bundle, _ = ingest_country(man, country, wide or None)
        hpi[country] = bundle["HPI"]
    mat = hpi_correlation_matrix(hpi)
    dest = ctx.out / "correlation.csv"
    write_atomic(dest, mat.to_csv())
    say(f"{len(hpi)} countries -> {dest}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _axis(text: str) -> Axis:
    try:
        return Axis.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _common() -> argparse.ArgumentParser:
    # defaults are suppressed so flags may appear before or after the subcommand
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--manifest", help="run manifest (YAML); default $MACROHPI_MANIFEST")
    p.add_argument("--out", help="output directory (overrides the manifest)")
    p.add_argument("--seed", type=int, help="base seed (overrides the manifest)")
    p.add_argument("--runs", type=int, help="ensemble runs (overrides the manifest)")
    p.add_argument("--country", help="country code")
    p.add_argument("--spec", help=f"model spec: {', '.join(BUILTIN_SPECS)}")
    p.add_argument("--learner", help="knn, treebag or mean")
    p.add_argument("--workers", type=int, help="worker processes for ensembles")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="macrohpi", parents=[common],
                                     description="Macro-factor house-price models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="ingest series and dump aligned datasets")
    sub.add_parser("fit", parents=[common], help="ensemble fit with statistics and importance")
    dg = sub.add_parser("diagnose", parents=[common], help="permutation, ADF or hold-out tests")
    dg.add_argument("which", choices=("permute", "adf", "holdout"))
    dg.add_argument("--regression", choices=("c", "ct"), default="c",
                    help="ADF deterministic terms")
    dg.add_argument("--lags", type=int, default=None, help="ADF lag count (default Schwert rule)")
    pg = sub.add_parser("predict-grid", parents=[common], help="evaluate a scenario grid")
    pg.add_argument("--axis", action="append", type=_axis, metavar="NAME:MIN:MAX:COUNT",
                    help="grid axis (repeatable); default from the manifest or the built-in grid")
    pg.add_argument("--full", action="store_true", help="also write every grid prediction")
    sub.add_parser("benchmark", parents=[common], help="compare VAR, LI, GLM and ML predictions")
    sub.add_parser("correlate", parents=[common], help="cross-country HPI correlation matrix")
    return parser


COMMANDS = {
    "ingest": cmd_ingest, "fit": cmd_fit, "diagnose": cmd_diagnose,
    "predict-grid": cmd_predict_grid, "benchmark": cmd_benchmark, "correlate": cmd_correlate,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    ctx = Context(args)
    try:
        return COMMANDS[args.command](ctx)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MacroHPIError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
