import io
import random
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from econplex.trade_data import (
    CountryMeta,
    DegenerateSampleError,
    FilterConfig,
    TradeDataError,
    TradeMatrix,
    TradeRecord,
    apply_static_filters,
    apply_yearly_filters,
    build_matrix,
    load_covariates_csv,
    load_trade_csv,
    read_matrix_csv,
    world_gdp_share,
)

BIG = 50_000_000  # comfortably above every default threshold


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def total_accounted(report):
    return report.retained_value + report.zeroed_value + report.dropped_value


# ---------------------------------------------------------------------------
# load_trade_csv
# ---------------------------------------------------------------------------

def test_duplicates_are_summed(tmp_path):
    path = write(tmp_path, "t.csv", "year,country,product,value\n2010,SAU,7810,100\n2010,SAU,7810,50\n")
    res = load_trade_csv(path)
    assert res.records == [TradeRecord(2010, "SAU", "7810", Decimal(150))]
    assert res.accepted == 2 and res.rejected == 0


def test_empty_file_with_header(tmp_path):
    res = load_trade_csv(write(tmp_path, "t.csv", "year,country,product,value\n"))
    assert list(res) == [] and len(res) == 0


def test_negative_value_rejected_with_line(tmp_path):
    path = write(tmp_path, "t.csv", "year,country,product,value\n2010,SAU,7810,1\n2010,SAU,7811,-5\n")
    res = load_trade_csv(path)
    assert len(res) == 1 and res.rejected == 1
    assert res.diagnostics[0].startswith("line 3") and "-5" in res.diagnostics[0]


def test_non_numeric_rows_and_error_budget(tmp_path):
    body = "year,country,product,value\n" + "".join(f"2010,AAA,{i},abc\n" for i in range(3))
    path = write(tmp_path, "t.csv", body)
    assert load_trade_csv(path, max_rejected=3).rejected == 3
    with pytest.raises(TradeDataError, match="line 2"):
        load_trade_csv(path, max_rejected=2)


def test_missing_file_and_bad_header(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_trade_csv(tmp_path / "nope.csv")
    with pytest.raises(TradeDataError, match="malformed header"):
        load_trade_csv(write(tmp_path, "t.csv", "yr,country,product,value\n"))
    with pytest.raises(TradeDataError, match="missing header"):
        load_trade_csv(write(tmp_path, "e.csv", ""))


def test_column_mapping_and_scheme(tmp_path):
    path = write(tmp_path, "t.csv", "t,exporter,hs,usd\n2001,fra,0101,2.5\n")
    res = load_trade_csv(path, scheme="hs4", columns={"year": "t", "country": "exporter", "product": "hs", "value": "usd"})
    assert res.records == [TradeRecord(2001, "FRA", "0101", Decimal("2.5"), "hs4")]


def test_year_selection(tmp_path):
    path = write(tmp_path, "t.csv", "year,country,product,value\n2009,A,p,1\n2010,A,p,2\n")
    assert [r.year for r in load_trade_csv(path, years=[2010])] == [2010]


def test_covariates_blank_fields_and_scale(tmp_path):
    path = write(tmp_path, "c.csv", "country,year,gdp_pc,population,rule_of_law\nusa,1990,30000,250,\nusa,2000,,280,1.5\n")
    meta = load_covariates_csv(path, population_scale=1e6)
    assert meta[0].population == 250e6 and meta[0].governance == {}
    assert meta[1].gdp_pc is None and meta[1].governance == {"rule_of_law": 1.5}
    with pytest.raises(TradeDataError):
        load_covariates_csv(write(tmp_path, "d.csv", "iso,year\n"))
    with pytest.raises(TradeDataError, match="line 2"):
        load_covariates_csv(write(tmp_path, "n.csv", "country,year,population\nX,2000,-1\n"))


# ---------------------------------------------------------------------------
# build_matrix
# ---------------------------------------------------------------------------

def test_build_direct_construction():
    m = build_matrix([TradeRecord(2010, "A", "p1", Decimal(10)), TradeRecord(2010, "B", "p2", Decimal(20))], 2010)
    assert m.countries == ("A", "B") and m.products == ("p1", "p2")
    np.testing.assert_array_equal(m.to_dense(), [[10, 0], [0, 20]])


def test_build_missing_year():
    with pytest.raises(TradeDataError):
        build_matrix([TradeRecord(2009, "A", "p", Decimal(1))], 2010)


def test_build_single_row():
    recs = [TradeRecord(2010, "A", p, Decimal(1)) for p in ("x", "y", "z")]
    assert build_matrix(recs, 2010).shape == (1, 3)


def test_build_is_order_independent():
    recs = [TradeRecord(2010, c, p, Decimal(f"{i}.25")) for i, (c, p) in enumerate(
        (c, p) for c in "DBCA" for p in ("9", "1", "5"))]
    a = build_matrix(recs, 2010)
    shuffled = recs[:]
    random.Random(3).shuffle(shuffled)
    b = build_matrix(shuffled, 2010)
    assert a.equals(b) and a.countries == ("A", "B", "C", "D") and a.scale == 2


def test_matrix_csv_roundtrip(tmp_path):
    m = build_matrix([TradeRecord(2010, "A", "p", Decimal("1.5")), TradeRecord(2010, "B", "q", Decimal(7))], 2010)
    buf = io.StringIO()
    m.write_csv(buf)
    path = write(tmp_path, "m.csv", "# header comment\n" + buf.getvalue())
    assert read_matrix_csv(path, 2010).equals(m)


def test_duplicate_labels_rejected():
    with pytest.raises(ValueError):
        TradeMatrix.from_dense([[1, 2]], countries=["A"], products=["p", "p"])


# ---------------------------------------------------------------------------
# static filters
# ---------------------------------------------------------------------------

def _meta(pop):
    return {c: CountryMeta(c, 2008, gdp_pc=1000.0, population=p) for c, p in pop.items()}


def test_static_population_exclusion_and_retention():
    m = TradeMatrix.from_dense(
        [[5_000_000_000, 0], [3_000_000_000, 1], [2_000_000_000, 2], [0, 4_000_000_000]],
        countries=["SMA", "TCD", "BIG", "NOM"],
        year=2008,
    )
    meta = _meta({"SMA": 1.0e6, "TCD": 10e6, "BIG": 10e6})
    out, rep = apply_static_filters(m, meta)
    reasons = {d.label: d.reason for d in rep.countries_dropped}
    assert reasons == {"SMA": "population", "TCD": "excluded_list", "NOM": "no_meta"}
    assert out.countries == ("BIG",)
    assert total_accounted(rep) == rep.input_value


def test_static_population_threshold_is_strict():
    m = TradeMatrix.from_dense([[2 * 10**9], [2 * 10**9]], countries=["A", "B"], year=2008)
    out, rep = apply_static_filters(m, _meta({"A": 1_250_000, "B": 1_250_001}))
    assert out.countries == ("B",)
    assert rep.countries_dropped[0].reason == "population"


def test_static_exports_threshold_uses_reference_exports():
    m = TradeMatrix.from_dense([[10**9], [5 * 10**9]], countries=["A", "B"], year=2010)
    meta = _meta({"A": 10e6, "B": 10e6})
    out, rep = apply_static_filters(m, meta)
    assert out.countries == ("B",) and rep.countries_dropped[0].reason == "exports"
    out, _ = apply_static_filters(m, meta, reference_exports={"A": Decimal("2e9"), "B": Decimal("2e9")})
    assert out.countries == ("A", "B")


def test_static_meta_from_iterable_selects_reference_year():
    m = TradeMatrix.from_dense([[5 * 10**9]], countries=["A"], year=2010)
    meta = [CountryMeta("A", 2008, population=1e6), CountryMeta("A", 2010, population=50e6)]
    with pytest.raises(DegenerateSampleError):
        apply_static_filters(m, meta)


# ---------------------------------------------------------------------------
# yearly filters
# ---------------------------------------------------------------------------

def test_cell_boundary():
    m = TradeMatrix.from_dense([[4_999, BIG], [5_000, BIG]], year=2010)
    cfg = FilterConfig(min_product_global_exports=0, product_zero_share_max=1.0, country_zero_share_max=1.0)
    out, rep = apply_yearly_filters(m, cfg)
    np.testing.assert_array_equal(out.to_dense(), [[0, BIG], [5_000, BIG]])
    assert rep.cells_zeroed == 1 and rep.zeroed_value == 4_999


def test_cell_boundary_decimal_cents():
    recs = [TradeRecord(2010, "A", "p", Decimal("4999.99")), TradeRecord(2010, "B", "p", Decimal("5000.00")),
            TradeRecord(2010, "A", "q", Decimal(BIG)), TradeRecord(2010, "B", "q", Decimal(BIG))]
    cfg = FilterConfig(min_product_global_exports=0, product_zero_share_max=1.0, country_zero_share_max=1.0)
    out, rep = apply_yearly_filters(build_matrix(recs, 2010), cfg)
    assert rep.zeroed_value == Decimal("4999.99") and rep.cells_zeroed == 1
    assert out.to_dense()[1, 0] == 5000


def test_global_min_boundary():
    m = TradeMatrix.from_dense([[9_999_999, 10_000_000, BIG], [0, 0, BIG]], products=["low", "ok", "big"], year=2010)
    cfg = FilterConfig(product_zero_share_max=1.0, country_zero_share_max=1.0)
    out, rep = apply_yearly_filters(m, cfg)
    assert [(d.label, d.reason) for d in rep.products_dropped] == [("low", "global_min")]
    assert out.products == ("ok", "big")


def test_product_zero_share_rule():
    # ten countries, "rare" exported by one of them only: zero share 0.9 > 0.8
    X = np.full((10, 2), BIG)
    X[1:, 1] = 0
    m = TradeMatrix.from_dense(X, products=["common", "rare"], year=2010)
    out, rep = apply_yearly_filters(m, FilterConfig(country_zero_share_max=1.0))
    assert [(d.label, d.reason) for d in rep.products_dropped] == [("rare", "zero_share")]
    assert out.products == ("common",)


def test_product_zero_share_exactly_at_limit_kept():
    X = np.full((10, 2), BIG)
    X[2:, 1] = 0  # zero share 0.8 is not more than 0.8
    out, _ = apply_yearly_filters(TradeMatrix.from_dense(X, year=2010), FilterConfig(country_zero_share_max=1.0))
    assert out.shape == (10, 2)


def test_country_zero_share_is_inclusive():
    # 20 products; "thin" exports one of them, so its zero share is exactly 0.95
    X = np.full((3, 20), BIG)
    X[2, 1:] = 0
    m = TradeMatrix.from_dense(X, countries=["a", "b", "thin"], year=2010)
    out, rep = apply_yearly_filters(m, FilterConfig(product_zero_share_max=1.0))
    assert [(d.label, d.reason) for d in rep.countries_dropped] == [("thin", "zero_share")]
    assert out.countries == ("a", "b")


def test_degenerate_sample():
    m = TradeMatrix.from_dense([[10, 20], [30, 40]], year=2010)
    with pytest.raises(DegenerateSampleError, match="degenerate_sample"):
        apply_yearly_filters(m)
    with pytest.raises(TradeDataError):
        apply_yearly_filters(TradeMatrix.from_dense(np.zeros((2, 2), int), year=2010))


def test_report_records_order_and_json():
    m = TradeMatrix.from_dense(np.full((3, 3), BIG), year=2010)
    _, rep = apply_yearly_filters(m)
    d = rep.to_dict()
    assert d["filter_order"] == ["cell_min", "global_min", "product_zero_share", "country_zero_share"]
    assert d["passes"] == 1 and d["second_pass_changes"] is False
    assert d["coverage_stats"]["trade_share"] == 1.0
    assert '"stage": "yearly"' in rep.to_json()


def test_world_gdp_share():
    meta = {"A": CountryMeta("A", 2010, gdp_pc=2.0, population=3.0), "B": CountryMeta("B", 2010, gdp_pc=1.0, population=2.0)}
    assert world_gdp_share(["A"], meta) == pytest.approx(0.75)
    assert world_gdp_share(["A"], {}) is None


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

CELL_VALUES = [0, 0, 0, 1, 4_999, 5_000, 60_000, 3_000_000, 9_999_999, 10_000_000, 40_000_000]


@st.composite
def trade_matrices(draw, decimals=False):
    n = draw(st.integers(2, 9))
    k = draw(st.integers(2, 9))
    if decimals:
        cells = st.decimals(min_value=0, max_value=50_000_000, places=2, allow_nan=False, allow_infinity=False)
        vals = [[draw(cells) for _ in range(k)] for _ in range(n)]
        recs = [TradeRecord(2000, f"c{i}", f"p{j}", v) for i, row in enumerate(vals) for j, v in enumerate(row) if v > 0]
        if not recs:
            recs = [TradeRecord(2000, "c0", "p0", Decimal(1))]
        return build_matrix(recs, 2000)
    X = np.array([[draw(st.sampled_from(CELL_VALUES)) for _ in range(k)] for _ in range(n)], dtype=np.int64)
    X[0, 0] = max(X[0, 0], 1)
    return TradeMatrix.from_dense(X, year=2000)


def _filter(m, cfg):
    try:
        return apply_yearly_filters(m, cfg)
    except DegenerateSampleError:
        return None, None


@settings(max_examples=150, deadline=None)
@given(trade_matrices(), st.sampled_from([0.5, 0.8, 1.0]), st.sampled_from([0.5, 0.95, 1.0]))
def test_fixed_point_mode_is_idempotent(m, ps, cs):
    cfg = FilterConfig(product_zero_share_max=ps, country_zero_share_max=cs, iterate_to_fixed_point=True)
    once, rep = _filter(m, cfg)
    if once is None:
        return
    twice, rep2 = apply_yearly_filters(once, cfg)
    assert twice.equals(once)
    assert rep.second_pass_changes is False and rep2.cells_zeroed == 0


@settings(max_examples=150, deadline=None)
@given(trade_matrices(), st.sampled_from([0.5, 0.8]), st.sampled_from([0.5, 0.95]))
def test_single_pass_reports_second_pass_effect(m, ps, cs):
    cfg = FilterConfig(product_zero_share_max=ps, country_zero_share_max=cs)
    once, rep = _filter(m, cfg)
    if once is None:
        return
    assert rep.passes == 1
    try:
        twice, _ = apply_yearly_filters(once, cfg)
        changed = not twice.equals(once)
    except DegenerateSampleError:
        changed = True
    assert rep.second_pass_changes is changed


@settings(max_examples=150, deadline=None)
@given(st.one_of(trade_matrices(), trade_matrices(decimals=True)), st.booleans())
def test_conservation_is_exact(m, fixed_point):
    cfg = FilterConfig(iterate_to_fixed_point=fixed_point, min_product_global_exports=Decimal("1e6"))
    out, rep = _filter(m, cfg)
    if out is None:
        return
    assert rep.input_value == m.total()
    assert total_accounted(rep) == rep.input_value
    assert rep.retained_value == out.total()


@settings(max_examples=150, deadline=None)
@given(trade_matrices(decimals=True))
def test_no_empty_rows_or_columns(m):
    out, rep = _filter(m, FilterConfig(min_product_global_exports=Decimal("1e5")))
    if out is None:
        return
    assert (out.row_totals() > 0).all() and (out.col_totals() > 0).all()
    dropped = [d.label for d in rep.countries_dropped]
    assert len(dropped) == len(set(dropped))


@settings(max_examples=60, deadline=None)
@given(trade_matrices())
def test_filters_are_deterministic(m):
    a, _ = _filter(m, FilterConfig())
    b, _ = _filter(m, FilterConfig())
    assert (a is None and b is None) or a.equals(b)
