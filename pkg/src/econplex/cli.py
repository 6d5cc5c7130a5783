"""Command-line pipeline: filter -> compute -> correlate / regress -> predict, plus rank.

Every stage reads the config file (with flag overrides), reads the previous
stage's files from the output directory and writes its own files there.
All outputs carry the sha256 of the resolved configuration.

Exit codes: 0 success, 1 usage or configuration error, 2 data or domain error.
"""
from __future__ import annotations

import argparse
import io
import logging
import sys
from collections.abc import Sequence
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import _io
from . import config as config_mod
from .complexity import ComplexityDomainError, MetricVector, compute_metrics, correlate
from .config import ConfigError, RunConfig
from .econometrics import (
    EstimationError,
    PanelError,
    build_panel,
    feature_rows,
    fit,
    format_table,
    predict_table,
)
from .trade_data import (
    DegenerateSampleError,
    FilterReport,
    TradeDataError,
    apply_static_filters,
    apply_yearly_filters,
    build_matrix,
    load_covariates_csv,
    load_trade_csv,
    merge_governance,
    meta_for_year,
    read_matrix_csv,
    world_gdp_share,
)

log = logging.getLogger("econplex")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
ITERATIVE = {"fitness", "q", "eci_plus", "pci_plus"}
PRODUCT_METRICS = {"ubiquity", "pci", "q", "pci_plus"}


class DataError(RuntimeError):
    """Missing or inconsistent data (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# layout
# ---------------------------------------------------------------------------

def filtered_path(cfg: RunConfig, year: int) -> Path:
    return cfg.output_dir / "filtered" / f"{year}.csv"


def metric_path(cfg: RunConfig, metric: str, year: int) -> Path:
    return cfg.output_dir / "metrics" / f"{metric}_{year}.csv"


def _years_on_disk(cfg: RunConfig) -> list[int]:
    folder = cfg.output_dir / "filtered"
    if not folder.is_dir():
        return []
    return sorted(int(p.stem) for p in folder.glob("*.csv") if p.stem.isdigit())


def _selected_years(cfg: RunConfig, available: Sequence[int]) -> list[int]:
    if cfg.years is None:
        return sorted(available)
    missing = sorted(set(cfg.years) - set(available))
    if missing:
        raise DataError(f"no data for years {missing}; available: {sorted(available)[:5]}...")
    return list(cfg.years)


def _load_meta(cfg: RunConfig):
    path = cfg.path(cfg.inputs.covariates)
    if path is None:
        raise ConfigError("[inputs] covariates path is required for this command")
    meta = load_covariates_csv(path, cfg.inputs.covariate_columns, cfg.inputs.population_scale)
    gov = cfg.path(cfg.inputs.governance)
    if gov is not None:
        meta = merge_governance(meta, load_covariates_csv(gov, cfg.inputs.covariate_columns))
    return meta


def read_metric(cfg: RunConfig, metric: str, year: int) -> MetricVector:
    path = metric_path(cfg, metric, year)
    if not path.is_file():
        raise DataError(f"{path} not found; run `econplex compute` for {metric} {year} first")
    labels, values = [], []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.startswith("#") or line == "label,value":
            continue
        label, value = line.rsplit(",", 1)
        labels.append(label)
        values.append(float(value))
    axis = "product" if metric in PRODUCT_METRICS else "country"
    return MetricVector(axis, tuple(labels), np.array(values), metric, year=year)


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def cmd_filter(cfg: RunConfig) -> int:
    """Static then yearly filters for each configured year."""
    trade = cfg.path(cfg.inputs.trade)
    if trade is None:
        raise ConfigError("[inputs] trade path is required")
    meta = _load_meta(cfg)
    loaded = load_trade_csv(trade, cfg.inputs.scheme, cfg.inputs.trade_columns, cfg.inputs.max_rejected)
    available = sorted({r.year for r in loaded.records})
    years = _selected_years(cfg, available)

    ref_year = cfg.filter.exports_reference_year
    reference_exports = None
    if ref_year in available:
        ref = build_matrix(loaded.records, ref_year)
        reference_exports = {c: ref.usd(t) for c, t in zip(ref.countries, ref.row_totals())}
    else:
        log.warning("exports reference year %d not in trade data; using each year's own totals", ref_year)
    static_meta = meta_for_year(meta, cfg.filter.population_reference_year)

    for year in years:
        raw = build_matrix(loaded.records, year)
        static, static_report = apply_static_filters(raw, static_meta, cfg.filter, reference_exports)
        if static.shape[0] == 0:
            raise DegenerateSampleError(f"year {year}: static filters removed every country")
        clean, yearly_report = apply_yearly_filters(static, cfg.filter)
        buf = io.StringIO()
        clean.write_csv(buf)
        _io.write_csv(filtered_path(cfg, year), buf.getvalue(), cfg.sha256)
        _io.write_json(cfg.output_dir / "filtered" / f"{year}_report.json",
                       _filter_summary(raw, clean, static_report, yearly_report, meta_for_year(meta, year)),
                       cfg.sha256)
        log.info("filter %d: %d countries x %d products retained", year, *clean.shape)
    return EXIT_OK


def _filter_summary(raw, clean, static_report: FilterReport, yearly_report: FilterReport, meta_year) -> dict:
    raw_total = raw.total()
    retained = clean.total()
    return {
        "year": raw.year,
        "countries_in": raw.shape[0],
        "products_in": raw.shape[1],
        "countries_retained": clean.shape[0],
        "products_retained": clean.shape[1],
        "world_trade_share": float(retained / raw_total) if raw_total else None,
        "world_gdp_share": world_gdp_share(clean.countries, meta_year),
        "static": static_report.to_dict(),
        "yearly": yearly_report.to_dict(),
    }


def cmd_compute(cfg: RunConfig) -> int:
    years = _selected_years(cfg, _years_on_disk(cfg))
    if not years:
        raise DataError(f"no filtered matrices in {cfg.output_dir / 'filtered'}; run `econplex filter` first")
    for year in years:
        matrix = read_matrix_csv(filtered_path(cfg, year), year)
        try:
            results = compute_metrics(matrix, cfg.metrics, cfg.tol, cfg.max_iter)
        except (ComplexityDomainError, ValueError) as exc:
            raise ComplexityDomainError(f"year {year}: {exc}") from exc
        for name, vec in results.items():
            vec.year = year
            buf = io.StringIO()
            vec.write_csv(buf)
            _io.write_csv(metric_path(cfg, name, year), buf.getvalue(), cfg.sha256)
            if name in ITERATIVE:
                diag = metric_path(cfg, name, year).with_suffix(".diagnostics.json")
                _io.write_json(diag, {"metric": name, "year": year, "axis": vec.axis, **vec.diagnostics.to_dict()},
                               cfg.sha256)
            if not vec.diagnostics.converged:
                log.warning("%s %d did not converge (residual %.3g)", name, year, vec.diagnostics.final_residual)
        log.info("compute %d: %s", year, ", ".join(results))
    return EXIT_OK


def cmd_correlate(cfg: RunConfig) -> int:
    years = _selected_years(cfg, _years_on_disk(cfg))
    for year in years:
        lines = ["metric_a,metric_b,n,pearson_r,r2,spearman_rho"]
        for a, b in cfg.correlate_pairs:
            rep = correlate(read_metric(cfg, a, year), read_metric(cfg, b, year))
            lines.append(f"{a},{b},{rep.n},{rep.pearson_r!r},{rep.r2!r},{rep.spearman_rho!r}")
            log.info("%d %s vs %s: r2=%.3f (n=%d)", year, a, b, rep.r2, rep.n)
        _io.write_csv(cfg.output_dir / "correlations" / f"{year}.csv", "\n".join(lines) + "\n", cfg.sha256)
    return EXIT_OK


def _metrics_for(cfg: RunConfig, metric: str, years) -> dict[int, MetricVector]:
    return {t: read_metric(cfg, metric, t) for t in years}


def cmd_regress(cfg: RunConfig) -> int:
    if not cfg.panels:
        raise ConfigError("no [[panels]] configured")
    meta = _load_meta(cfg)
    for pc in cfg.panels:
        results = []
        exclusions = {}
        for metric in pc.metrics:
            spec = _spec_for(pc.spec, metric)
            panel = build_panel(_metrics_for(cfg, metric, spec.periods), meta, spec)
            exclusions[metric] = panel.excluded
            for est in cfg.estimators:
                if est == "fixed_effects" and len(spec.periods) < 2:
                    log.info("skipping fixed effects for a single-period panel (h=%d)", spec.horizon)
                    continue
                results.append(fit(panel, cfg.formula, est))
        stem = f"h{pc.spec.horizon}_{pc.spec.start_year}-{pc.spec.end_year}"
        title = f"Annualized {pc.spec.horizon} year growth ({pc.spec.start_year}-{pc.spec.end_year})"
        _io.write_text(cfg.output_dir / "regressions" / f"{stem}.txt", format_table(results, title), cfg.sha256)
        _io.write_json(cfg.output_dir / "regressions" / f"{stem}.json",
                       {"models": [r.to_dict() for r in results], "excluded": exclusions}, cfg.sha256)
    return EXIT_OK


def _spec_for(spec, metric):
    return replace(spec, metric_name=metric)


def cmd_predict(cfg: RunConfig) -> int:
    panels = [p for p in cfg.panels if p.spec.horizon == cfg.predict_horizon]
    if not panels:
        raise ConfigError(f"no [[panels]] entry with horizon {cfg.predict_horizon} to fit the prediction model")
    base = panels[0].spec
    year = cfg.predict_year if cfg.predict_year is not None else base.end_year
    meta = _load_meta(cfg)
    for metric in cfg.predict_metrics:
        spec = _spec_for(base, metric)
        model = fit(build_panel(_metrics_for(cfg, metric, spec.periods), meta, spec), cfg.formula, "pooled_ols")
        rows, skipped = feature_rows(read_metric(cfg, metric, year), meta, spec, year)
        for country, why in sorted(skipped.items()):
            log.warning("predict %s: skipping %s (%s)", metric, country, why)
        table = predict_table(model, rows, cfg.year_effect)
        body = table.to_csv(index=False, lineterminator="\n", float_format="%.17g")
        _io.write_csv(cfg.output_dir / "predictions" / f"{metric}_h{cfg.predict_horizon}_{year}.csv", body, cfg.sha256)
    return EXIT_OK


def cmd_rank(cfg: RunConfig) -> int:
    """Side-by-side country ranks for each configured country metric."""
    years = _selected_years(cfg, _years_on_disk(cfg))
    for year in years:
        names = [m for m in cfg.metrics if m not in PRODUCT_METRICS]
        ranks = {}
        for m in names:
            vec = read_metric(cfg, m, year)
            order = sorted(zip(vec.labels, vec.values.tolist()), key=lambda kv: (-kv[1], kv[0]))
            ranks[m] = {label: i + 1 for i, (label, _) in enumerate(order)}
        countries = sorted(set().union(*[set(r) for r in ranks.values()])) if ranks else []
        lines = [",".join(["country"] + [f"rank_{m}" for m in names])]
        for c in countries:
            lines.append(",".join([c] + [str(ranks[m].get(c, "")) for m in names]))
        _io.write_csv(cfg.output_dir / "ranks" / f"{year}.csv", "\n".join(lines) + "\n", cfg.sha256)
    return EXIT_OK


COMMANDS = {
    "filter": cmd_filter,
    "compute": cmd_compute,
    "correlate": cmd_correlate,
    "regress": cmd_regress,
    "predict": cmd_predict,
    "rank": cmd_rank,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="econplex", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or name).splitlines()[0])
        p.add_argument("--config", type=Path, help="TOML run configuration")
        p.add_argument("--year", type=int, help="restrict to one year (also the prediction feature year)")
        p.add_argument("--metric", action="append", help="metric name; repeatable")
        p.add_argument("--horizon", type=int, help="keep only panels with this horizon")
        p.add_argument("--out", type=Path, help="output directory")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_mod.load(args.config, year=args.year, metrics=args.metric, horizon=args.horizon, out=args.out)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"econplex: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, TradeDataError, DegenerateSampleError, ComplexityDomainError, PanelError,
            EstimationError, FileNotFoundError) as exc:
        code = getattr(exc, "code", "data")
        print(f"econplex: {code} error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
