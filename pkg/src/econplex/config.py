"""Run configuration: a single TOML file plus command-line overrides."""
from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .complexity import DEFAULT_MAX_ITER, DEFAULT_TOL, METRICS
from .econometrics import DEFAULT_CONTROLS, DEFAULT_REGRESSORS, YEAR_EFFECTS, Formula, PanelSpec
from .trade_data import FilterConfig

DEFAULT_METRICS = ("eci", "pci", "fitness", "q", "eci_plus", "pci_plus")
COUNTRY_METRICS = ("eci", "fitness", "eci_plus", "diversity")
ESTIMATORS = ("pooled_ols", "fixed_effects")

_SECTIONS = {"inputs", "filter", "metrics", "panels", "regression", "predict", "correlate", "output_dir", "seed"}


class ConfigError(ValueError):
    """Invalid or unreadable configuration (exit code 1)."""


@dataclass(frozen=True)
class Inputs:
    trade: str | None = None
    covariates: str | None = None
    governance: str | None = None
    scheme: str = "sitc4"
    trade_columns: Mapping[str, str] = field(default_factory=dict)
    covariate_columns: Mapping[str, str] = field(default_factory=dict)
    population_scale: float = 1.0
    max_rejected: int = 100


@dataclass(frozen=True)
class PanelConfig:
    spec: PanelSpec
    metrics: tuple[str, ...]


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; ``raw`` is the resolved dictionary that gets hashed."""

    raw: dict
    base_dir: Path
    inputs: Inputs
    filter: FilterConfig
    metrics: tuple[str, ...]
    years: tuple[int, ...] | None
    tol: float
    max_iter: int
    panels: tuple[PanelConfig, ...]
    formula: Formula
    estimators: tuple[str, ...]
    predict_horizon: int
    predict_year: int | None
    predict_metrics: tuple[str, ...]
    year_effect: str
    correlate_pairs: tuple[tuple[str, str], ...]
    output_dir: Path
    seed: int

    @property
    def sha256(self) -> str:
        return config_hash(self.raw)

    def path(self, value: str | None) -> Path | None:
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p


def config_hash(raw: Mapping) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def load_raw(path) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc


def apply_overrides(raw: dict, year=None, metrics=None, horizon=None, out=None) -> dict:
    """Return a copy of ``raw`` with command-line values taking precedence."""
    raw = copy.deepcopy(raw)
    if year is not None:
        raw.setdefault("metrics", {})["years"] = [int(year)]
        raw.setdefault("predict", {})["year"] = int(year)
    if metrics:
        metrics = list(metrics)
        raw.setdefault("metrics", {})["names"] = metrics
        country = [m for m in metrics if m in COUNTRY_METRICS]
        if country:
            for panel in raw.get("panels", []):
                panel["metrics"] = country
            raw.setdefault("predict", {})["metrics"] = country
    if horizon is not None:
        raw["panels"] = [p for p in raw.get("panels", []) if int(p.get("horizon", 0)) == int(horizon)]
        raw.setdefault("predict", {})["horizon"] = int(horizon)
    if out is not None:
        raw["output_dir"] = str(out)
    return raw


def _get(section: Mapping, key: str, default, kind):
    value = section.get(key, default)
    if value is None:
        return None
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}") from exc


def _check_keys(section: Mapping, allowed, where: str):
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"[{where}] unknown keys: {sorted(unknown)}")


def build(raw: Mapping[str, Any], base_dir=".") -> RunConfig:
    """Validate a raw configuration dictionary."""
    raw = dict(raw)
    _check_keys(raw, _SECTIONS, "top level")
    try:
        inp = dict(raw.get("inputs", {}))
        _check_keys(inp, Inputs.__dataclass_fields__, "inputs")
        inputs = Inputs(**inp)

        filt = dict(raw.get("filter", {}))
        _check_keys(filt, FilterConfig.__dataclass_fields__, "filter")
        if "excluded_countries" in filt:
            filt["excluded_countries"] = frozenset(filt["excluded_countries"])
        filter_cfg = FilterConfig(**filt)

        met = dict(raw.get("metrics", {}))
        _check_keys(met, {"names", "years", "tol", "max_iter"}, "metrics")
        names = tuple(met.get("names", DEFAULT_METRICS))
        bad = set(names) - set(METRICS)
        if bad:
            raise ConfigError(f"[metrics] unknown names {sorted(bad)}; choose from {METRICS}")
        years = met.get("years")
        years = tuple(sorted({int(y) for y in years})) if years is not None else None

        panels = []
        for i, p in enumerate(raw.get("panels", [])):
            p = dict(p)
            _check_keys(p, set(PanelSpec.__dataclass_fields__) | {"metrics"}, f"panels.{i}")
            metrics = tuple(p.pop("metrics", ["eci_plus"]))
            bad = set(metrics) - set(COUNTRY_METRICS)
            if bad:
                raise ConfigError(f"[panels.{i}] metrics must be country metrics, got {sorted(bad)}")
            p.pop("metric_name", None)
            if "controls" in p:
                p["controls"] = tuple(p["controls"])
            panels.append(PanelConfig(PanelSpec(metric_name=metrics[0], **p), metrics))

        reg = dict(raw.get("regression", {}))
        _check_keys(reg, {"regressors", "year_effects", "estimators"}, "regression")
        regressors = reg.get("regressors", list(DEFAULT_REGRESSORS))
        if isinstance(regressors, str):
            formula = Formula.parse(regressors, bool(reg.get("year_effects", True)))
        else:
            formula = Formula(tuple(regressors), bool(reg.get("year_effects", True)))
        estimators = tuple(reg.get("estimators", ESTIMATORS))
        if set(estimators) - set(ESTIMATORS):
            raise ConfigError(f"[regression] estimators must be among {ESTIMATORS}")

        pred = dict(raw.get("predict", {}))
        _check_keys(pred, {"horizon", "year", "metrics", "year_effect"}, "predict")
        year_effect = pred.get("year_effect", "last")
        if year_effect not in YEAR_EFFECTS:
            raise ConfigError(f"[predict] year_effect must be one of {YEAR_EFFECTS}")

        cor = dict(raw.get("correlate", {}))
        _check_keys(cor, {"pairs"}, "correlate")
        pairs = tuple(tuple(p) for p in cor.get("pairs", [["eci_plus", "eci"], ["fitness", "eci"], ["fitness", "eci_plus"]]))
        if any(len(p) != 2 for p in pairs):
            raise ConfigError("[correlate] pairs must have two entries each")

        cfg = RunConfig(
            raw=raw,
            base_dir=Path(base_dir),
            inputs=inputs,
            filter=filter_cfg,
            metrics=names,
            years=years,
            tol=_get(met, "tol", DEFAULT_TOL, float),
            max_iter=_get(met, "max_iter", DEFAULT_MAX_ITER, int),
            panels=tuple(panels),
            formula=formula,
            estimators=estimators,
            predict_horizon=_get(pred, "horizon", 20, int),
            predict_year=_get(pred, "year", None, int),
            predict_metrics=tuple(pred.get("metrics", ["eci_plus", "eci", "fitness"])),
            year_effect=year_effect,
            correlate_pairs=pairs,
            output_dir=Path(str(raw.get("output_dir", "out"))),
            seed=_get(raw, "seed", 0, int),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if not cfg.output_dir.is_absolute():
        object.__setattr__(cfg, "output_dir", cfg.base_dir / cfg.output_dir)
    return cfg


def load(path=None, **overrides) -> RunConfig:
    """Read ``path`` (if given), apply overrides, validate."""
    raw = load_raw(path) if path is not None else {}
    base = Path(path).resolve().parent if path is not None else Path.cwd()
    return build(apply_overrides(raw, **overrides), base)


__all__ = [
    "ConfigError", "Inputs", "PanelConfig", "RunConfig", "DEFAULT_CONTROLS", "build", "load", "load_raw",
    "apply_overrides", "config_hash",
]
