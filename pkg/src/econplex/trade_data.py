"""Trade-record ingestion, matrix construction and sample filters.

Monetary values are parsed as exact decimals.  A :class:`TradeMatrix` stores
them as int64 counts of ``10**-scale`` USD so that every filter and every
conservation total is computed exactly; floats only appear once a matrix is
handed to the complexity routines via :meth:`TradeMatrix.to_float`.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

log = logging.getLogger(__name__)

TRADE_COLUMNS = ("year", "country", "product", "value")
GOVERNANCE_FIELDS = (
    "rule_of_law",
    "voice_accountability",
    "control_of_corruption",
    "regulatory_quality",
    "government_effectiveness",
    "political_stability",
)
YEARLY_FILTER_ORDER = ("cell_min", "global_min", "product_zero_share", "country_zero_share")
_INT64_SAFE = 2**62


class TradeDataError(ValueError):
    """Raised for malformed input files or impossible filter requests."""

    code = "trade_data"


class DegenerateSampleError(TradeDataError):
    """The filter cascade removed every country or every product."""

    code = "degenerate_sample"


@dataclass(frozen=True, slots=True)
class TradeRecord:
    year: int
    country: str
    product: str
    value: Decimal
    scheme: str = "sitc4"

    def __post_init__(self):
        if self.value < 0:
            raise ValueError(f"negative export value {self.value} for {self.country}/{self.product}")


@dataclass
class LoadResult:
    """Records accepted from a CSV file plus per-line rejection diagnostics."""

    records: list[TradeRecord]
    accepted: int
    rejected: int
    diagnostics: list[str] = field(default_factory=list)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


@dataclass(frozen=True)
class CountryMeta:
    country: str
    year: int
    gdp_pc: float | None = None
    population: float | None = None
    human_capital: float | None = None
    capital_per_worker: float | None = None
    governance: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.gdp_pc is not None and not self.gdp_pc > 0:
            raise ValueError(f"{self.country} {self.year}: gdp_pc must be positive, got {self.gdp_pc}")
        if self.population is not None and not self.population > 0:
            raise ValueError(f"{self.country} {self.year}: population must be positive, got {self.population}")
        unknown = set(self.governance) - set(GOVERNANCE_FIELDS)
        if unknown:
            raise ValueError(f"unknown governance indicators: {sorted(unknown)}")


@dataclass(frozen=True)
class FilterConfig:
    min_population: float = 1_250_000
    population_reference_year: int = 2008
    min_total_exports: Decimal = Decimal("1e9")
    exports_reference_year: int = 2008
    excluded_countries: frozenset[str] = frozenset({"TCD", "IRQ", "AFG"})
    product_zero_share_max: float = 0.80
    country_zero_share_max: float = 0.95
    min_product_global_exports: Decimal = Decimal("1e7")
    min_cell_value: Decimal = Decimal("5000")
    iterate_to_fixed_point: bool = False

    def __post_init__(self):
        for name in ("min_population", "min_total_exports", "min_product_global_exports", "min_cell_value"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("product_zero_share_max", "country_zero_share_max"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        # accept floats/strings from config files without losing exactness
        for name in ("min_total_exports", "min_product_global_exports", "min_cell_value"):
            object.__setattr__(self, name, Decimal(str(getattr(self, name))))
        object.__setattr__(self, "excluded_countries", frozenset(c.upper() for c in self.excluded_countries))

    def to_dict(self) -> dict:
        return {
            "min_population": self.min_population,
            "population_reference_year": self.population_reference_year,
            "min_total_exports": str(self.min_total_exports),
            "exports_reference_year": self.exports_reference_year,
            "excluded_countries": sorted(self.excluded_countries),
            "product_zero_share_max": self.product_zero_share_max,
            "country_zero_share_max": self.country_zero_share_max,
            "min_product_global_exports": str(self.min_product_global_exports),
            "min_cell_value": str(self.min_cell_value),
            "iterate_to_fixed_point": self.iterate_to_fixed_point,
        }


@dataclass(frozen=True)
class Dropped:
    label: str
    reason: str
    value: Decimal


@dataclass
class FilterReport:
    year: int
    stage: str
    countries_dropped: list[Dropped] = field(default_factory=list)
    products_dropped: list[Dropped] = field(default_factory=list)
    cells_zeroed: int = 0
    input_value: Decimal = Decimal(0)
    retained_value: Decimal = Decimal(0)
    zeroed_value: Decimal = Decimal(0)
    dropped_value: Decimal = Decimal(0)
    coverage_stats: dict = field(default_factory=dict)
    filter_order: tuple[str, ...] = ()
    passes: int = 1
    second_pass_changes: bool | None = None

    def to_dict(self) -> dict:
        def rows(items):
            return [{"label": d.label, "reason": d.reason, "value": str(d.value)} for d in items]

        return {
            "year": self.year,
            "stage": self.stage,
            "filter_order": list(self.filter_order),
            "passes": self.passes,
            "second_pass_changes": self.second_pass_changes,
            "countries_dropped": rows(self.countries_dropped),
            "products_dropped": rows(self.products_dropped),
            "cells_zeroed": self.cells_zeroed,
            "input_value": str(self.input_value),
            "retained_value": str(self.retained_value),
            "zeroed_value": str(self.zeroed_value),
            "dropped_value": str(self.dropped_value),
            "coverage_stats": self.coverage_stats,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def _parse_value(raw: str) -> Decimal:
    value = Decimal(raw.strip())
    if not value.is_finite():
        raise InvalidOperation
    return value


def load_trade_csv(
    path,
    scheme: str = "sitc4",
    columns: Mapping[str, str] | None = None,
    max_rejected: int = 100,
    years: Iterable[int] | None = None,
) -> LoadResult:
    """Read ``year,country,product,value`` rows from a CSV file.

    Parameters
    ----------
    path : path-like
        UTF-8, comma separated file with a header row.
    scheme : str
        Classification tag stored on each record (``sitc4``, ``hs4`` ...).
    columns : mapping, optional
        Maps the logical names ``year``, ``country``, ``product`` and
        ``value`` to header names in the file.
    max_rejected : int
        Error budget.  Rows with negative or non-numeric values are
        rejected with a line diagnostic; exceeding the budget raises
        :class:`TradeDataError` listing the offending lines.
    years : iterable of int, optional
        Keep only these years.

    Returns
    -------
    LoadResult
        Records with duplicate ``(year, country, product)`` keys summed,
        sorted by that key.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"trade file not found: {path}")
    mapping = {name: name for name in TRADE_COLUMNS}
    mapping.update(columns or {})
    wanted = None if years is None else {int(y) for y in years}

    totals: dict[tuple[int, str, str], Decimal] = {}
    accepted = 0
    problems: list[str] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise TradeDataError(f"{path}: missing header row")
        header = [h.strip() for h in header]
        missing = [mapping[k] for k in TRADE_COLUMNS if mapping[k] not in header]
        if missing:
            raise TradeDataError(f"{path}: malformed header, missing columns {missing}; found {header}")
        iy, ic, ip, iv = (header.index(mapping[k]) for k in TRADE_COLUMNS)
        width = len(header)

        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < width:
                problems.append(f"line {lineno}: expected {width} fields, got {len(row)}")
                continue
            try:
                year = int(row[iy])
            except ValueError:
                problems.append(f"line {lineno}: non-integer year {row[iy]!r}")
                continue
            if wanted is not None and year not in wanted:
                continue
            try:
                value = _parse_value(row[iv])
            except (InvalidOperation, ValueError):
                problems.append(f"line {lineno}: non-numeric value {row[iv]!r}")
                continue
            if value < 0:
                problems.append(f"line {lineno}: negative value {row[iv].strip()}")
                continue
            country = row[ic].strip().upper()
            product = row[ip].strip()
            if not country or not product:
                problems.append(f"line {lineno}: empty country or product code")
                continue
            key = (year, country, product)
            totals[key] = totals.get(key, Decimal(0)) + value
            accepted += 1

    if len(problems) > max_rejected:
        shown = "\n  ".join(problems[:50])
        raise TradeDataError(
            f"{path}: {len(problems)} rejected rows exceed the error budget of {max_rejected}:\n  {shown}"
        )
    for msg in problems:
        log.warning("%s: %s", path.name, msg)
    records = [TradeRecord(y, c, p, v, scheme) for (y, c, p), v in sorted(totals.items())]
    return LoadResult(records, accepted, len(problems), problems)


def _float_or_none(raw: str | None, scale: float = 1.0) -> float | None:
    if raw is None:
        return None
    raw = raw.strip()
    if raw == "" or raw.lower() in {"na", "nan", "null", "."}:
        return None
    return float(raw) * scale


def load_covariates_csv(
    path,
    columns: Mapping[str, str] | None = None,
    population_scale: float = 1.0,
) -> list[CountryMeta]:
    """Read per-country, per-year covariates.

    Required columns are ``country`` and ``year``; ``gdp_pc``,
    ``population``, ``human_capital``, ``capital_per_worker`` and the six
    governance indicators are optional and may be blank.  ``population_scale``
    converts the file's population unit to persons (1e6 for PWT).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"covariates file not found: {path}")
    fields = ("country", "year", "gdp_pc", "population", "human_capital", "capital_per_worker") + GOVERNANCE_FIELDS
    mapping = {name: name for name in fields}
    mapping.update(columns or {})
    out = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for key in ("country", "year"):
            if mapping[key] not in header:
                raise TradeDataError(f"{path}: malformed header, missing column {mapping[key]!r}")
        for lineno, row in enumerate(reader, start=2):
            get = lambda name, s=1.0: _float_or_none(row.get(mapping[name]), s)  # noqa: E731
            try:
                gov = {g: v for g in GOVERNANCE_FIELDS if (v := get(g)) is not None}
                out.append(CountryMeta(
                    country=row[mapping["country"]].strip().upper(),
                    year=int(row[mapping["year"]]),
                    gdp_pc=get("gdp_pc"),
                    population=get("population", population_scale),
                    human_capital=get("human_capital"),
                    capital_per_worker=get("capital_per_worker"),
                    governance=gov,
                ))
            except ValueError as exc:
                raise TradeDataError(f"{path}: line {lineno}: {exc}") from exc
    out.sort(key=lambda m: (m.country, m.year))
    return out


def merge_governance(meta: Sequence[CountryMeta], governance: Sequence[CountryMeta]) -> list[CountryMeta]:
    """Attach governance scores from a second covariate table to ``meta``."""
    gov = {(g.country, g.year): g.governance for g in governance}
    merged = []
    for m in meta:
        extra = gov.get((m.country, m.year))
        if extra:
            m = CountryMeta(m.country, m.year, m.gdp_pc, m.population, m.human_capital,
                            m.capital_per_worker, {**m.governance, **extra})
        merged.append(m)
    return merged


def meta_for_year(meta: Iterable[CountryMeta], year: int) -> dict[str, CountryMeta]:
    return {m.country: m for m in meta if m.year == year}


# ---------------------------------------------------------------------------
# matrices
# ---------------------------------------------------------------------------

def _decimal_places(value: Decimal) -> int:
    return max(0, -value.as_tuple().exponent)


def _to_units(value: Decimal, scale: int) -> int:
    sign, digits, exponent = value.as_tuple()
    n = int("".join(map(str, digits)) or "0") * 10 ** (exponent + scale)
    return -n if sign else n


@dataclass(frozen=True, eq=False)
class TradeMatrix:
    """Country x product export values for one year.

    ``values`` is a CSR array holding int64 counts of ``10**-scale`` USD.
    When input precision cannot be held exactly in int64, ``scale`` is
    ``None`` and ``values`` holds float64 USD.
    """

    year: int
    countries: tuple[str, ...]
    products: tuple[str, ...]
    values: sparse.csr_array
    scale: int | None = 0

    def __post_init__(self):
        if len(set(self.countries)) != len(self.countries):
            raise ValueError("duplicate country labels")
        if len(set(self.products)) != len(self.products):
            raise ValueError("duplicate product labels")
        if self.values.shape != (len(self.countries), len(self.products)):
            raise ValueError(f"values shape {self.values.shape} does not match labels")

    @classmethod
    def from_dense(cls, values, countries=None, products=None, year: int = 0) -> "TradeMatrix":
        arr = np.asarray(values)
        if arr.ndim != 2:
            raise ValueError("expected a 2-d array")
        if (arr < 0).any():
            raise ValueError("export values must be nonnegative")
        countries = tuple(countries) if countries is not None else tuple(f"c{i}" for i in range(arr.shape[0]))
        products = tuple(products) if products is not None else tuple(f"p{j}" for j in range(arr.shape[1]))
        if np.issubdtype(arr.dtype, np.integer):
            data, scale = arr.astype(np.int64), 0
        else:
            data, scale = arr.astype(np.float64), None
        return cls(year, countries, products, sparse.csr_array(data), scale)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def exact(self) -> bool:
        return self.scale is not None

    def to_float(self) -> sparse.csr_array:
        """Values in USD as float64."""
        out = self.values.astype(np.float64)
        if self.scale:
            out = out / 10.0**self.scale
        return sparse.csr_array(out)

    def to_dense(self) -> np.ndarray:
        return self.to_float().toarray()

    def usd(self, units) -> Decimal:
        """Convert a native-unit amount (int or float) to a Decimal of USD."""
        if self.scale is None:
            return Decimal(repr(float(units)))
        return Decimal(int(units)).scaleb(-self.scale)

    def units_threshold(self, usd: Decimal):
        """Smallest native-unit amount that is ``>= usd``."""
        if self.scale is None:
            return float(usd)
        return math.ceil(usd.scaleb(self.scale))

    def row_totals(self) -> np.ndarray:
        return np.asarray(self.values.sum(axis=1)).ravel()

    def col_totals(self) -> np.ndarray:
        return np.asarray(self.values.sum(axis=0)).ravel()

    def total(self) -> Decimal:
        if self.scale is None:
            return Decimal(repr(math.fsum(self.values.data)))
        return self.usd(sum(int(x) for x in self.values.data))

    def select(self, rows=None, cols=None) -> "TradeMatrix":
        """Sub-matrix keeping boolean-masked rows/columns."""
        rows = np.ones(self.shape[0], bool) if rows is None else np.asarray(rows, bool)
        cols = np.ones(self.shape[1], bool) if cols is None else np.asarray(cols, bool)
        vals = self.values[np.flatnonzero(rows)][:, np.flatnonzero(cols)]
        return TradeMatrix(
            self.year,
            tuple(c for c, keep in zip(self.countries, rows) if keep),
            tuple(p for p, keep in zip(self.products, cols) if keep),
            sparse.csr_array(vals),
            self.scale,
        )

    def equals(self, other: "TradeMatrix") -> bool:
        return (
            self.year == other.year
            and self.countries == other.countries
            and self.products == other.products
            and self.scale == other.scale
            and self.values.shape == other.values.shape
            and (self.values != other.values).nnz == 0
        )

    def triplets(self) -> Iterable[tuple[str, str, Decimal]]:
        coo = sparse.coo_array(self.values)
        order = np.lexsort((coo.col, coo.row))
        for k in order:
            yield self.countries[coo.row[k]], self.products[coo.col[k]], self.usd(coo.data[k])

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["country", "product", "value"])
        for c, p, v in self.triplets():
            writer.writerow([c, p, format(v, "f")])


def build_matrix(records: Iterable[TradeRecord], year: int) -> TradeMatrix:
    """Materialize the export matrix of ``year`` with lexicographic labels."""
    rows = [r for r in records if r.year == year]
    if not rows:
        raise TradeDataError(f"no trade records for year {year}")
    countries = tuple(sorted({r.country for r in rows}))
    products = tuple(sorted({r.product for r in rows}))
    ci = {c: i for i, c in enumerate(countries)}
    pi = {p: j for j, p in enumerate(products)}
    r_idx = np.fromiter((ci[r.country] for r in rows), np.int64, len(rows))
    c_idx = np.fromiter((pi[r.product] for r in rows), np.int64, len(rows))

    scale = max(_decimal_places(r.value) for r in rows)
    units = [_to_units(r.value, scale) for r in rows]
    if sum(units) < _INT64_SAFE:
        data = np.array(units, dtype=np.int64)
    else:
        log.warning("year %d: totals exceed exact int64 range, falling back to float64", year)
        data, scale = np.array([float(r.value) for r in rows]), None
    mat = sparse.coo_array((data, (r_idx, c_idx)), shape=(len(countries), len(products))).tocsr()
    mat.eliminate_zeros()
    mat.sort_indices()
    return TradeMatrix(year, countries, products, sparse.csr_array(mat), scale)


def read_matrix_csv(path, year: int) -> TradeMatrix:
    """Read a ``country,product,value`` triplet file written by :meth:`TradeMatrix.write_csv`."""
    result = load_trade_csv_triplets(path, year)
    return build_matrix(result, year)


def load_trade_csv_triplets(path, year: int) -> list[TradeRecord]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"matrix file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        lines = (line for line in fh if not line.startswith("#"))
        reader = csv.reader(lines)
        header = next(reader, None)
        if header != ["country", "product", "value"]:
            raise TradeDataError(f"{path}: expected header country,product,value, got {header}")
        return [TradeRecord(year, c, p, Decimal(v)) for c, p, v in reader]


# ---------------------------------------------------------------------------
# filters
# ---------------------------------------------------------------------------

def _exceeds_share(count: np.ndarray, total: int, share: float) -> np.ndarray:
    """Exact ``count / total > share`` for integer counts."""
    limit = Fraction(str(share)) * total
    return np.array([Fraction(int(c)) > limit for c in count], dtype=bool)


def _at_least_share(count: np.ndarray, total: int, share: float) -> np.ndarray:
    limit = Fraction(str(share)) * total
    return np.array([Fraction(int(c)) >= limit for c in count], dtype=bool)


def _drop_empty(matrix: TradeMatrix, report: FilterReport) -> TradeMatrix:
    rows = matrix.row_totals() > 0
    cols = matrix.col_totals() > 0
    for i in np.flatnonzero(~rows):
        report.countries_dropped.append(Dropped(matrix.countries[i], "empty", Decimal(0)))
    for j in np.flatnonzero(~cols):
        report.products_dropped.append(Dropped(matrix.products[j], "empty", Decimal(0)))
    if rows.all() and cols.all():
        return matrix
    return matrix.select(rows, cols)


def _finish(matrix: TradeMatrix, report: FilterReport) -> TradeMatrix:
    if matrix.shape[0] == 0 or matrix.shape[1] == 0:
        raise DegenerateSampleError(
            f"year {report.year}: {report.stage} filters left a {matrix.shape[0]}x{matrix.shape[1]} "
            "matrix (degenerate_sample)"
        )
    report.retained_value = matrix.total()
    report.dropped_value = sum((d.value for d in report.countries_dropped + report.products_dropped), Decimal(0))
    if report.input_value:
        report.coverage_stats["trade_share"] = float(report.retained_value / report.input_value)
    report.coverage_stats["countries"] = matrix.shape[0]
    report.coverage_stats["products"] = matrix.shape[1]
    return matrix


def apply_static_filters(
    matrix: TradeMatrix,
    meta: Mapping[str, CountryMeta] | Iterable[CountryMeta],
    cfg: FilterConfig = FilterConfig(),
    reference_exports: Mapping[str, Decimal] | None = None,
) -> tuple[TradeMatrix, FilterReport]:
    """Remove explicitly excluded, small, or covariate-less countries.

    ``meta`` holds covariates at ``cfg.population_reference_year`` (a
    mapping by country, or any iterable of :class:`CountryMeta` from which
    that year is selected).  ``reference_exports`` gives raw total exports in
    ``cfg.exports_reference_year``; when omitted the row totals of
    ``matrix`` itself are used.  Each dropped country gets one reason code:
    ``excluded_list``, ``no_meta``, ``population`` or ``exports``, tested in
    that order.  Products left without exports are dropped as ``empty``.
    """
    if not isinstance(meta, Mapping):
        meta = meta_for_year(meta, cfg.population_reference_year)
    report = FilterReport(matrix.year, "static", input_value=matrix.total(),
                          filter_order=("excluded_list", "no_meta", "population", "exports"))
    if reference_exports is None:
        totals = matrix.row_totals()
        reference_exports = {c: matrix.usd(t) for c, t in zip(matrix.countries, totals)}
    row_value = matrix.row_totals()

    keep = np.ones(matrix.shape[0], bool)
    for i, country in enumerate(matrix.countries):
        m = meta.get(country)
        if country in cfg.excluded_countries:
            reason = "excluded_list"
        elif m is None or m.population is None:
            reason = "no_meta"
        elif not m.population > cfg.min_population:
            reason = "population"
        elif not Decimal(reference_exports.get(country, 0)) > cfg.min_total_exports:
            reason = "exports"
        else:
            continue
        keep[i] = False
        report.countries_dropped.append(Dropped(country, reason, matrix.usd(row_value[i])))

    out = matrix.select(keep, None)
    cols = out.col_totals() > 0
    for j in np.flatnonzero(~cols):
        report.products_dropped.append(Dropped(out.products[j], "empty", Decimal(0)))
    out = out.select(None, cols)
    report.passes = 1
    return _finish(out, report), report


def _yearly_pass(matrix: TradeMatrix, cfg: FilterConfig, report: FilterReport) -> TradeMatrix:
    # (1) round small cells to zero
    vals = matrix.values.copy()
    small = vals.data < matrix.units_threshold(cfg.min_cell_value)
    small &= vals.data > 0
    report.cells_zeroed += int(small.sum())
    if small.any():
        if matrix.scale is None:
            report.zeroed_value += Decimal(repr(math.fsum(vals.data[small])))
        else:
            report.zeroed_value += matrix.usd(sum(int(x) for x in vals.data[small]))
        vals.data[small] = 0
        vals.eliminate_zeros()
    matrix = TradeMatrix(matrix.year, matrix.countries, matrix.products, sparse.csr_array(vals), matrix.scale)

    # (2) products with small world exports
    col_tot = matrix.col_totals()
    low = col_tot < matrix.units_threshold(cfg.min_product_global_exports)
    for j in np.flatnonzero(low):
        report.products_dropped.append(Dropped(matrix.products[j], "global_min", matrix.usd(col_tot[j])))
    matrix = matrix.select(None, ~low)

    # (3) products absent from too many countries
    n_countries = matrix.shape[0]
    nonzero = np.diff(sparse.csc_array(matrix.values).indptr)
    sparse_products = _exceeds_share(n_countries - nonzero, n_countries, cfg.product_zero_share_max)
    col_tot = matrix.col_totals()
    for j in np.flatnonzero(sparse_products):
        report.products_dropped.append(Dropped(matrix.products[j], "zero_share", matrix.usd(col_tot[j])))
    matrix = matrix.select(None, ~sparse_products)

    # (4) countries absent from too many products
    n_products = matrix.shape[1]
    nonzero = np.diff(matrix.values.indptr)
    sparse_countries = _at_least_share(n_products - nonzero, n_products, cfg.country_zero_share_max)
    row_tot = matrix.row_totals()
    for i in np.flatnonzero(sparse_countries):
        report.countries_dropped.append(Dropped(matrix.countries[i], "zero_share", matrix.usd(row_tot[i])))
    matrix = matrix.select(~sparse_countries, None)
    return _drop_empty(matrix, report)


def apply_yearly_filters(matrix: TradeMatrix, cfg: FilterConfig = FilterConfig()) -> tuple[TradeMatrix, FilterReport]:
    """Run the four time-dependent filters in their fixed order.

    Order: cell rounding (``< min_cell_value`` set to zero), products with
    world exports ``< min_product_global_exports``, products zero for more
    than ``product_zero_share_max`` of countries, countries zero for at
    least ``country_zero_share_max`` of the remaining products; all-zero
    rows/columns are removed last.  A single pass is made unless
    ``cfg.iterate_to_fixed_point``; the report says whether another pass
    would change the sample.

    Raises
    ------
    DegenerateSampleError
        If nothing survives.
    """
    if matrix.shape[0] == 0 or matrix.shape[1] == 0 or matrix.values.nnz == 0:
        raise TradeDataError(f"year {matrix.year}: empty matrix")
    report = FilterReport(matrix.year, "yearly", input_value=matrix.total(), filter_order=YEARLY_FILTER_ORDER)
    out = _yearly_pass(matrix, cfg, report)
    _finish(out, report)
    while True:
        probe = FilterReport(matrix.year, "yearly")
        try:
            again = _yearly_pass(out, cfg, probe)
        except DegenerateSampleError:
            again = None
        changed = again is None or again.shape[0] == 0 or again.shape[1] == 0 or not again.equals(out)
        if not changed or not cfg.iterate_to_fixed_point:
            report.second_pass_changes = changed
            break
        out = _yearly_pass(out, cfg, report)
        report.passes += 1
        _finish(out, report)
    return _finish(out, report), report


def world_gdp_share(countries: Iterable[str], meta: Mapping[str, CountryMeta]) -> float | None:
    """Share of total GDP (gdp_pc x population over ``meta``) held by ``countries``."""
    gdp = {c: m.gdp_pc * m.population for c, m in meta.items() if m.gdp_pc and m.population}
    world = math.fsum(gdp.values())
    if not world:
        return None
    return math.fsum(gdp.get(c, 0.0) for c in countries) / world
