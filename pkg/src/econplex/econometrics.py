"""Growth panels, pooled OLS / within estimators with country-clustered SEs, predictions."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from .complexity import MetricVector
from .trade_data import GOVERNANCE_FIELDS, CountryMeta

log = logging.getLogger(__name__)

DEFAULT_REGRESSORS = (
    "initial_metric",
    "interaction",
    "initial_log_gdp_pc",
    "initial_human_capital",
    "initial_population",
    "initial_capital_per_worker",
)
FEATURES = DEFAULT_REGRESSORS + GOVERNANCE_FIELDS
DEFAULT_CONTROLS = ("human_capital", "population", "capital_per_worker")
YEAR_EFFECTS = ("last", "reference", "mean")


class EstimationError(ValueError):
    code = "estimation"


class CollinearityError(EstimationError):
    code = "collinear"


class AbsorbedRegressorError(EstimationError):
    code = "absorbed_by_fixed_effects"


class PanelError(ValueError):
    code = "panel"


def cagr(gdp_start: float, gdp_end: float, years: int) -> float:
    """Compound annualized growth rate."""
    if not gdp_start > 0 or not gdp_end > 0:
        raise ValueError(f"GDP must be positive, got {gdp_start} and {gdp_end}")
    if years < 1:
        raise ValueError(f"years must be >= 1, got {years}")
    return (gdp_end / gdp_start) ** (1.0 / years) - 1.0


def standardize(values: MetricVector) -> MetricVector:
    """Z-score with the population standard deviation."""
    v = values.values
    if len(np.unique(v)) < 2:
        raise ValueError(f"cannot standardize {values.metric_name}: zero variance")
    z = (v - v.mean()) / v.std()
    return replace(values, values=z)


# ---------------------------------------------------------------------------
# panels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PanelObservation:
    country: str
    period_start: int
    horizon: int
    growth: float | None
    initial_log_gdp_pc: float
    initial_metric: float
    interaction: float
    initial_human_capital: float | None = None
    initial_population: float | None = None
    initial_capital_per_worker: float | None = None
    governance: Mapping[str, float] = field(default_factory=dict)
    metric_name: str = ""

    def features(self) -> dict[str, float]:
        out = {
            "initial_metric": self.initial_metric,
            "interaction": self.interaction,
            "initial_log_gdp_pc": self.initial_log_gdp_pc,
        }
        for name in ("initial_human_capital", "initial_population", "initial_capital_per_worker"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        out.update(self.governance)
        return out


@dataclass(frozen=True)
class PanelSpec:
    start_year: int
    end_year: int
    horizon: int
    metric_name: str = "eci_plus"
    balanced: bool = True
    controls: tuple[str, ...] = DEFAULT_CONTROLS
    standardize_metric: bool = False
    log_gdp: bool = True
    log_capital: bool = True
    population_unit: float = 1e6

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.end_year - self.start_year < self.horizon:
            raise ValueError(f"window {self.start_year}-{self.end_year} shorter than horizon {self.horizon}")
        if self.balanced and (self.end_year - self.start_year) % self.horizon:
            raise ValueError(
                f"balanced panel needs (end_year - start_year) divisible by horizon, got "
                f"{self.end_year - self.start_year} and {self.horizon}"
            )
        unknown = set(self.controls) - set(DEFAULT_CONTROLS) - set(GOVERNANCE_FIELDS)
        if unknown:
            raise ValueError(f"unknown controls: {sorted(unknown)}")

    @property
    def periods(self) -> tuple[int, ...]:
        return tuple(range(self.start_year, self.end_year - self.horizon + 1, self.horizon))


@dataclass
class Panel:
    """Panel rows plus the countries left out and why."""

    observations: list[PanelObservation]
    spec: PanelSpec
    excluded: dict[str, str] = field(default_factory=dict)

    def __iter__(self):
        return iter(self.observations)

    def __len__(self):
        return len(self.observations)

    def __getitem__(self, i):
        return self.observations[i]

    @property
    def countries(self) -> tuple[str, ...]:
        return tuple(sorted({o.country for o in self.observations}))


def _row(country, t, spec: PanelSpec, metric: Mapping[str, float] | None, meta,
         with_growth: bool = True) -> tuple[PanelObservation | None, str]:
    start = meta.get((country, t))
    end = meta.get((country, t + spec.horizon))
    if metric is None or country not in metric:
        return None, f"missing {spec.metric_name} in {t}"
    if start is None or start.gdp_pc is None:
        return None, f"missing gdp_pc in {t}"
    if with_growth and (end is None or end.gdp_pc is None):
        return None, f"missing gdp_pc in {t + spec.horizon}"
    kw = {}
    if "human_capital" in spec.controls:
        if start.human_capital is None:
            return None, f"missing human_capital in {t}"
        kw["initial_human_capital"] = start.human_capital
    if "population" in spec.controls:
        if start.population is None:
            return None, f"missing population in {t}"
        kw["initial_population"] = start.population / spec.population_unit
    if "capital_per_worker" in spec.controls:
        k = start.capital_per_worker
        if k is None or (spec.log_capital and not k > 0):
            return None, f"missing capital_per_worker in {t}"
        kw["initial_capital_per_worker"] = math.log(k) if spec.log_capital else k
    gov = {}
    for name in spec.controls:
        if name in GOVERNANCE_FIELDS:
            if name not in start.governance:
                return None, f"missing {name} in {t}"
            gov[name] = start.governance[name]
    gdp = math.log(start.gdp_pc) if spec.log_gdp else start.gdp_pc
    value = float(metric[country])
    obs = PanelObservation(
        country=country,
        period_start=t,
        horizon=spec.horizon,
        growth=cagr(start.gdp_pc, end.gdp_pc, spec.horizon) if with_growth else None,
        initial_log_gdp_pc=gdp,
        initial_metric=value,
        interaction=gdp * value,
        governance=gov,
        metric_name=spec.metric_name,
        **kw,
    )
    return obs, ""


def build_panel(
    metrics: Mapping[int, MetricVector],
    meta: Iterable[CountryMeta],
    spec: PanelSpec,
) -> Panel:
    """Country-period growth observations.

    Periods start at ``spec.start_year`` and step by ``spec.horizon`` while
    the growth window ``[t, t + horizon]`` ends no later than
    ``spec.end_year``.  Growth is the CAGR of GDP per capita over the
    window; covariates are taken at ``t``.  In balanced mode a country
    missing any input in any period is dropped everywhere and listed in
    ``Panel.excluded``.

    Raises
    ------
    PanelError
        When no observation survives.
    """
    index = {(m.country, m.year): m for m in meta}
    by_year = {int(y): v.as_dict() for y, v in metrics.items()}
    periods = spec.periods
    countries = sorted({c for (c, _) in index} | {c for v in by_year.values() for c in v})

    rows: dict[str, list[PanelObservation]] = {}
    excluded: dict[str, str] = {}
    for country in countries:
        got = []
        for t in periods:
            obs, why = _row(country, t, spec, by_year.get(t), index)
            if obs is None:
                if spec.balanced:
                    excluded[country] = why
                    got = []
                    break
                continue
            got.append(obs)
        if got:
            rows[country] = got
        elif country not in excluded:
            excluded[country] = "no complete period"
    obs_list = [o for c in sorted(rows) for o in rows[c]]
    if not obs_list:
        raise PanelError(
            f"empty panel for {spec.metric_name}, horizon {spec.horizon}, periods {periods}; "
            f"{len(excluded)} countries excluded"
        )
    if spec.balanced and excluded:
        log.info("balanced panel (h=%d) excludes %d countries: %s", spec.horizon, len(excluded),
                 ", ".join(f"{c} ({r})" for c, r in sorted(excluded.items())))

    if spec.standardize_metric:
        out = []
        for t in periods:
            chunk = [o for o in obs_list if o.period_start == t]
            if not chunk:
                continue
            v = np.array([o.initial_metric for o in chunk])
            if v.std() == 0:
                raise PanelError(f"metric has zero variance in {t}")
            z = (v - v.mean()) / v.std()
            out += [replace(o, initial_metric=float(zi), interaction=o.initial_log_gdp_pc * float(zi))
                    for o, zi in zip(chunk, z)]
        obs_list = sorted(out, key=lambda o: (o.country, o.period_start))
    return Panel(obs_list, spec, excluded)


def feature_rows(
    metric: MetricVector | Mapping[str, float],
    meta: Iterable[CountryMeta],
    spec: PanelSpec,
    year: int,
) -> tuple[list[PanelObservation], dict[str, str]]:
    """Out-of-sample feature rows (no growth) at ``year``, transformed like ``build_panel``.

    Candidates are the countries scored by ``metric``.  Returns the rows and
    the countries skipped for missing covariates, with the reason.
    """
    values = metric.as_dict() if isinstance(metric, MetricVector) else dict(metric)
    index = {(m.country, m.year): m for m in meta}
    rows, skipped = [], {}
    for country in sorted(values):
        obs, why = _row(country, year, spec, values, index, with_growth=False)
        if obs is None:
            skipped[country] = why
        else:
            rows.append(obs)
    if spec.standardize_metric and rows:
        v = np.array([o.initial_metric for o in rows])
        if v.std() == 0:
            raise PanelError(f"metric has zero variance in {year}")
        z = (v - v.mean()) / v.std()
        rows = [replace(o, initial_metric=float(zi), interaction=o.initial_log_gdp_pc * float(zi))
                for o, zi in zip(rows, z)]
    return rows, skipped


# ---------------------------------------------------------------------------
# estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Formula:
    regressors: tuple[str, ...] = DEFAULT_REGRESSORS
    year_effects: bool = True

    def __post_init__(self):
        unknown = set(self.regressors) - set(FEATURES)
        if unknown:
            raise ValueError(f"unknown regressors {sorted(unknown)}; choose from {FEATURES}")
        if len(set(self.regressors)) != len(self.regressors):
            raise ValueError("duplicate regressors")

    @classmethod
    def parse(cls, text: str, year_effects: bool = True) -> "Formula":
        """``"initial_metric + interaction + initial_log_gdp_pc"`` (an optional ``growth ~`` prefix is ignored)."""
        rhs = text.split("~", 1)[-1]
        names = tuple(t.strip() for t in rhs.split("+") if t.strip())
        return cls(names, year_effects)


@dataclass
class RegressionResult:
    estimator: str
    coefficients: dict[str, float]
    se: dict[str, float]
    cov: np.ndarray
    n_obs: int
    n_clusters: int
    rmse: float
    residuals: np.ndarray
    fitted: np.ndarray
    year_dummies: tuple[int, ...]
    reference_period: int | None
    r2: float
    r2_adjusted: float
    r2_within: float | None = None
    r2_between: float | None = None
    r2_overall: float | None = None
    metric_name: str = ""
    horizon: int | None = None
    formula: Formula = Formula()
    countries: tuple[str, ...] = ()
    periods: tuple[int, ...] = ()
    effects: dict[str, float] = field(default_factory=dict)
    dropped_singletons: tuple[str, ...] = ()

    @property
    def names(self) -> list[str]:
        return list(self.coefficients)

    def pvalues(self) -> dict[str, float]:
        out = {}
        for k, b in self.coefficients.items():
            s = self.se[k]
            out[k] = float(2 * stats.norm.sf(abs(b) / s)) if s > 0 else (0.0 if b != 0 else 1.0)
        return out

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "metric": self.metric_name,
            "horizon": self.horizon,
            "regressors": list(self.formula.regressors),
            "coefficients": self.coefficients,
            "se": self.se,
            "pvalues": self.pvalues(),
            "n_obs": self.n_obs,
            "n_clusters": self.n_clusters,
            "r2": self.r2,
            "r2_adjusted": self.r2_adjusted,
            "r2_within": self.r2_within,
            "r2_between": self.r2_between,
            "r2_overall": self.r2_overall,
            "rmse": self.rmse,
            "year_dummies": list(self.year_dummies),
            "reference_period": self.reference_period,
            "dropped_singletons": list(self.dropped_singletons),
        }


def _dummy_name(year: int) -> str:
    return f"year_{year}"


def _design(panel, formula: Formula):
    obs = list(panel)
    if not obs:
        raise EstimationError("empty panel")
    feats = [o.features() for o in obs]
    for name in formula.regressors:
        missing = [o.country for o, f in zip(obs, feats) if name not in f]
        if missing:
            raise EstimationError(f"regressor {name!r} missing for {sorted(set(missing))[:10]}")
    X = np.array([[f[n] for n in formula.regressors] for f in feats], dtype=float).reshape(len(obs), -1)
    names = list(formula.regressors)
    periods = sorted({o.period_start for o in obs})
    dummies = tuple(periods[1:]) if formula.year_effects else ()
    if dummies:
        t = np.array([o.period_start for o in obs])
        D = np.column_stack([(t == p).astype(float) for p in dummies])
        X = np.column_stack([X, D])
        names += [_dummy_name(p) for p in dummies]
    y = np.array([o.growth for o in obs], dtype=float)
    if np.isnan(y).any():
        raise EstimationError("growth missing for some observations")
    clusters = np.array([o.country for o in obs])
    return y, X, names, clusters, tuple(periods), dummies, obs


def _collinear(X: np.ndarray, names: Sequence[str]) -> list[str]:
    """Columns that add no rank beyond the columns before them."""
    bad, kept = [], []
    scale = np.abs(X).max(axis=0)
    scale[scale == 0] = 1
    Xs = X / scale
    for j in range(X.shape[1]):
        trial = Xs[:, kept + [j]]
        if np.linalg.matrix_rank(trial, tol=1e-10 * max(trial.shape) * max(1.0, np.abs(trial).max())) == len(kept) + 1:
            kept.append(j)
        else:
            bad.append(names[j])
    return bad


def _check_rank(X, names):
    n, k = X.shape
    if n <= k:
        raise EstimationError(f"{n} observations for {k} parameters")
    scale = np.abs(X).max(axis=0)
    scale[scale == 0] = 1
    if np.linalg.matrix_rank(X / scale) < k:
        raise CollinearityError(f"rank-deficient design; collinear columns: {_collinear(X, names)}")


def cluster_robust_cov(X: np.ndarray, resid: np.ndarray, clusters: np.ndarray, df_k: int | None = None) -> np.ndarray:
    """Country-clustered sandwich covariance with the G/(G-1)(N-1)/(N-K) factor."""
    n, k = X.shape
    df_k = k if df_k is None else df_k
    labels, inverse = np.unique(clusters, return_inverse=True)
    g = len(labels)
    if g < 2:
        raise EstimationError("cluster-robust covariance needs at least 2 clusters")
    scores = np.zeros((g, k))
    np.add.at(scores, inverse, X * resid[:, None])
    bread = np.linalg.inv(X.T @ X)
    meat = scores.T @ scores
    factor = g / (g - 1) * (n - 1) / (n - df_k)
    V = factor * bread @ meat @ bread
    return (V + V.T) / 2


def _finish(estimator, beta, V, names, y, fitted, resid, k_df, clusters, formula, panel, periods, dummies, **extra):
    n = len(y)
    ssr = float(resid @ resid)
    se = np.sqrt(np.clip(np.diag(V), 0, None))
    meta = panel.spec if isinstance(panel, Panel) else None
    return RegressionResult(
        estimator=estimator,
        coefficients=dict(zip(names, beta.tolist())),
        se=dict(zip(names, se.tolist())),
        cov=V,
        n_obs=n,
        n_clusters=len(set(clusters.tolist())),
        rmse=math.sqrt(ssr / (n - k_df)) if n > k_df else float("nan"),
        residuals=resid,
        fitted=fitted,
        year_dummies=dummies,
        reference_period=periods[0] if periods else None,
        metric_name=meta.metric_name if meta else "",
        horizon=meta.horizon if meta else None,
        formula=formula,
        countries=tuple(sorted(set(clusters.tolist()))),
        periods=periods,
        **extra,
    )


def pooled_ols(panel, formula: Formula = Formula()) -> RegressionResult:
    """Pooled OLS with period dummies (first period is the reference) and a constant."""
    y, X, names, clusters, periods, dummies, _ = _design(panel, formula)
    X = np.column_stack([X, np.ones(len(y))])
    names.append("const")
    _check_rank(X, names)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    fitted = X @ beta
    resid = y - fitted
    n, k = X.shape
    V = cluster_robust_cov(X, resid, clusters)
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1 - float(resid @ resid) / sst if sst > 0 else 1.0
    r2_adj = 1 - (1 - r2) * (n - 1) / (n - k)
    return _finish("pooled_ols", beta, V, names, y, fitted, resid, k, clusters, formula, panel, periods, dummies,
                   r2=r2, r2_adjusted=r2_adj)


def _group_means(values: np.ndarray, inverse: np.ndarray, g: int) -> np.ndarray:
    counts = np.bincount(inverse, minlength=g).astype(float)
    if values.ndim == 1:
        return np.bincount(inverse, weights=values, minlength=g) / counts
    sums = np.zeros((g, values.shape[1]))
    np.add.at(sums, inverse, values)
    return sums / counts[:, None]


def fixed_effects(panel, formula: Formula = Formula()) -> RegressionResult:
    """Within (country-demeaned) estimator with period dummies and clustered SEs.

    As in Stata's ``xtreg, fe`` the grand means are added back before the
    regression, which yields a constant equal to the average country
    effect; the cluster correction counts the slopes plus that constant.
    ``r2_within`` is the R2 of the demeaned regression, ``r2_between`` and
    ``r2_overall`` are squared correlations of country means and raw values
    with their linear predictions.  ``rmse`` divides by ``N - G - slopes``.
    """
    obs = list(panel)
    counts: dict[str, int] = {}
    for o in obs:
        counts[o.country] = counts.get(o.country, 0) + 1
    singletons = tuple(sorted(c for c, n in counts.items() if n < 2))
    if singletons:
        log.warning("fixed effects: dropping %d countries observed once: %s", len(singletons), ", ".join(singletons))
        obs = [o for o in obs if counts[o.country] >= 2]
    if not obs:
        raise EstimationError("fixed effects need countries observed in at least 2 periods")

    y, X, names, clusters, periods, dummies, _ = _design(obs, formula)
    labels, inverse = np.unique(clusters, return_inverse=True)
    g = len(labels)
    xbar_i = _group_means(X, inverse, g)
    ybar_i = _group_means(y, inverse, g)
    Xd = X - xbar_i[inverse]
    yd = y - ybar_i[inverse]

    scale = np.maximum(np.abs(X).max(axis=0), 1e-300)
    absorbed = np.abs(Xd).max(axis=0) <= 1e-12 * scale
    n_reg = len(formula.regressors)
    bad = [names[j] for j in range(n_reg) if absorbed[j]]
    if bad:
        raise AbsorbedRegressorError(f"absorbed_by_fixed_effects: {bad} constant within every country")
    keep = ~absorbed
    if not keep.all():
        log.info("fixed effects: dropping absorbed year dummies %s", [n for n, k in zip(names, keep) if not k])
        dummies = tuple(p for p in dummies if keep[names.index(_dummy_name(p))])
        X, Xd, xbar_i = X[:, keep], Xd[:, keep], xbar_i[:, keep]
        names = [n for n, k in zip(names, keep) if k]

    Xw = np.column_stack([Xd + X.mean(axis=0), np.ones(len(y))])
    yw = yd + y.mean()
    wnames = names + ["const"]
    _check_rank(Xw, wnames)
    beta, *_ = np.linalg.lstsq(Xw, yw, rcond=None)
    resid = yw - Xw @ beta
    n, k = Xw.shape
    V = cluster_robust_cov(Xw, resid, clusters, df_k=k)

    slopes = beta[:-1]
    effects = ybar_i - xbar_i @ slopes
    fitted = effects[inverse] + X @ slopes
    sst_w = float(yd @ yd)
    r2_w = 1 - float(resid @ resid) / sst_w if sst_w > 0 else 1.0
    xb = X @ slopes
    r2_o = float(np.corrcoef(y, xb)[0, 1] ** 2) if xb.std() > 0 else 0.0
    xb_i = xbar_i @ slopes
    r2_b = float(np.corrcoef(ybar_i, xb_i)[0, 1] ** 2) if g > 2 and xb_i.std() > 0 else float("nan")
    return _finish(
        "fixed_effects", beta, V, wnames, y, fitted, resid, g + k - 1, clusters, formula, panel, periods, dummies,
        r2=r2_w, r2_adjusted=1 - (1 - r2_w) * (n - 1) / (n - k), r2_within=r2_w, r2_between=r2_b,
        r2_overall=r2_o, effects=dict(zip(labels.tolist(), effects.tolist())), dropped_singletons=singletons,
    )


def fit(panel, formula: Formula = Formula(), estimator: str = "pooled_ols") -> RegressionResult:
    if estimator == "pooled_ols":
        return pooled_ols(panel, formula)
    if estimator == "fixed_effects":
        return fixed_effects(panel, formula)
    raise ValueError(f"unknown estimator {estimator!r}")


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------

def _period_effect(model: RegressionResult, period: int | None, year_effect: str) -> float:
    if year_effect not in YEAR_EFFECTS:
        raise ValueError(f"year_effect must be one of {YEAR_EFFECTS}")
    if not model.year_dummies:
        return 0.0
    if period is not None:
        if period == model.reference_period:
            return 0.0
        if period in model.year_dummies:
            return model.coefficients[_dummy_name(period)]
    if year_effect == "reference":
        return 0.0
    if year_effect == "last":
        return model.coefficients[_dummy_name(model.year_dummies[-1])]
    effects = [0.0] + [model.coefficients[_dummy_name(p)] for p in model.year_dummies]
    return float(np.mean(effects))


def predict_growth(model: RegressionResult, features, year_effect: str = "last") -> float:
    """Linear prediction of annualized growth.

    ``features`` is a :class:`PanelObservation` (its growth is ignored) or a
    mapping of regressor names.  A period seen in estimation uses its own
    dummy; otherwise ``year_effect`` picks the last period's dummy, the
    reference period (zero) or the mean period effect.  Fixed-effects models
    add the country's estimated effect when the country was in the sample
    and the average effect otherwise.
    """
    period = country = None
    if isinstance(features, PanelObservation):
        period, country = features.period_start, features.country
        values = features.features()
    else:
        values = dict(features)
        period = values.pop("period_start", None)
        country = values.pop("country", None)
    missing = [n for n in model.formula.regressors if n not in values]
    if missing:
        raise KeyError(f"missing features {missing}")
    pred = sum(model.coefficients[n] * float(values[n]) for n in model.formula.regressors)
    pred += _period_effect(model, period, year_effect)
    if model.estimator == "fixed_effects" and country in model.effects:
        pred += model.effects[country]
    else:
        pred += model.coefficients["const"]
    return float(pred)


def predict_table(model: RegressionResult, rows: Iterable, year_effect: str = "last") -> pd.DataFrame:
    """Ranked predictions, descending; ties are broken by country code."""
    out = []
    for row in rows:
        country = row.country if isinstance(row, PanelObservation) else row.get("country")
        try:
            out.append((country, predict_growth(model, row, year_effect)))
        except KeyError as exc:
            log.warning("skipping %s: %s", country, exc)
    out.sort(key=lambda r: (-r[1], r[0]))
    df = pd.DataFrame(out, columns=["country", "predicted_growth"])
    df["rank"] = np.arange(1, len(df) + 1)
    return df


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

LABELS = {
    "initial_metric": "Initial {metric}",
    "interaction": "Ini GDPpc * {metric}",
    "initial_log_gdp_pc": "Initial GDPpc",
    "initial_human_capital": "Initial Human Capital",
    "initial_population": "Initial Pop",
    "initial_capital_per_worker": "Initial Capital",
    "rule_of_law": "Law",
    "voice_accountability": "Voice and accountability",
    "control_of_corruption": "Control of corruption",
    "regulatory_quality": "Regulatory Quality",
    "government_effectiveness": "Government effectiveness",
    "political_stability": "Political Stability",
    "const": "Constant",
}
METRIC_LABELS = {"eci_plus": "ECI+", "eci": "ECI", "fitness": "F"}


def stars(p: float) -> str:
    return "***" if p < 0.01 else "**" if p < 0.05 else "*" if p < 0.10 else ""


def format_table(results: Sequence[RegressionResult], title: str = "") -> str:
    """Aligned text table: coefficient with stars, clustered SE in parentheses.

    Metric-specific rows are kept apart per metric; year dummies are
    summarized in a footer line.
    """
    rows: list[tuple[str, str, str | None]] = []  # (label, key, metric or None)
    seen = set()
    for res in results:
        metric = METRIC_LABELS.get(res.metric_name, res.metric_name)
        for name in res.formula.regressors:
            key = (name, metric if name in ("initial_metric", "interaction") else None)
            if key not in seen:
                seen.add(key)
                rows.append((LABELS.get(name, name).format(metric=metric), name, key[1]))
    rows.append(("Constant", "const", None))

    header = [""] + [f"({i + 1}) {'OLS' if r.estimator == 'pooled_ols' else 'FE'}" for i, r in enumerate(results)]
    sub = [""] + [METRIC_LABELS.get(r.metric_name, r.metric_name) for r in results]
    body = []
    for label, name, metric in rows:
        line = [label]
        for res in results:
            m = METRIC_LABELS.get(res.metric_name, res.metric_name)
            if name in res.coefficients and (metric is None or metric == m):
                p = res.pvalues()[name]
                line.append(f"{res.coefficients[name]:.3g}{stars(p)} ({res.se[name]:.3f})")
            else:
                line.append("")
        body.append(line)

    def stat(label, fn):
        body.append([label] + [fn(r) for r in results])

    def num(x):
        return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.3g}"

    stat("N", lambda r: str(r.n_obs))
    stat("R2 within", lambda r: num(r.r2_within))
    stat("R2 between", lambda r: num(r.r2_between))
    stat("R2 overall", lambda r: num(r.r2_overall))
    stat("R2 adjusted", lambda r: num(r.r2_adjusted))
    stat("RMSE", lambda r: num(r.rmse))
    stat("N_clust", lambda r: str(r.n_clusters))
    stat("Year FE", lambda r: "yes" if r.year_dummies else "no")

    table = [header, sub] + body
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = [title] if title else []
    for row in table:
        lines.append("  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths))))
    lines += ["Standard errors in parentheses", "Robust-clustered standard errors",
              "* p < 0.10, ** p < 0.05, *** p < 0.01"]
    return "\n".join(line.rstrip() for line in lines) + "\n"
