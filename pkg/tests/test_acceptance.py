"""Acceptance criteria, one test (or pair of tests) per criterion.

Each criterion records a PASS/FAIL/SKIP line; the lines are printed in a
block at the end of the module (visible with or without ``-s``).

Criterion 7 needs the real public datasets.  Point ``ECONPLEX_REAL_DATA`` at
a run configuration (TOML) whose inputs cover 1973-2013 trade, covariates
for 1973, 2010 and 2013, and the 2008 reference year; the test is skipped
otherwise.
"""
import os
import shutil
import time
from collections import OrderedDict

import numpy as np
import pytest

import econplex.complexity as cx
from econplex.econometrics import Formula, PanelObservation, fixed_effects, pooled_ols
from oracles import cluster_sandwich_loops, eci_oracle, eci_plus_mp, fitness_loop, lsdv, pci_plus_mp, rca_exact
from synthetic import PIPELINE, trade_matrix, tree_bytes, write_world

RESULTS: "OrderedDict[str, list[tuple[bool | None, str]]]" = OrderedDict(
    (f"c{i}", []) for i in range(1, 9)
)
TITLES = {
    "c1": "oracle equivalence on random positive matrices",
    "c2": "golden instance M=[[1,1],[0,1]]",
    "c3": "scale invariance under X -> lambda X",
    "c4": "normalization invariants every iteration",
    "c5": "estimator correctness",
    "c6": "performance 250x986 and 52-year batch",
    "c7": "real-data reproduction (data-gated)",
    "c8": "determinism of the full pipeline",
}


def record(criterion, ok, detail):
    RESULTS[criterion].append((None if ok is None else bool(ok), detail))


@pytest.fixture(scope="module", autouse=True)
def summary(request):
    yield
    lines = ["", "ACCEPTANCE SUMMARY"]
    for key, items in RESULTS.items():
        if not items:
            status = "NOT RUN"
        elif any(ok is False for ok, _ in items):
            status = "FAIL"
        elif all(ok is None for ok, _ in items):
            status = "SKIP"
        else:
            status = "PASS"
        details = "; ".join(d for _, d in items)
        lines.append(f"  {key} {status:<7} {TITLES[key]}: {details}")
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    for line in lines:
        if reporter is not None:
            reporter.write_line(line)
        else:  # pragma: no cover
            print(line)


def random_positive(n, seed=20240501):
    rng = np.random.default_rng(seed)
    return [rng.lognormal(0, 1.5, (rng.integers(3, 9), rng.integers(3, 13))) for _ in range(n)]


# ---------------------------------------------------------------------------
# 1. oracle equivalence
# ---------------------------------------------------------------------------

def test_c1_oracle_equivalence():
    mats = random_positive(120)
    t0 = time.perf_counter()
    lib = []
    for X in mats:
        R = cx.rca(X)
        M = cx.binarize(R)
        e, p = cx.eci_pci(M)
        # the plain map is what the element-wise oracle iterates; support
        # reduction is checked separately in the unit tests
        F, Q = cx.fitness(M, resolve_degenerate=False)
        lib.append((R, M, e, p, F, Q, cx.eci_plus(X, tol=1e-12), cx.pci_plus(X, tol=1e-12)))
    runtime = time.perf_counter() - t0

    worst = dict.fromkeys(("RCA", "ECI", "PCI", "Fitness", "Q", "ECI+", "PCI+"), 0.0)
    degenerate_agree = degenerate = unconverged = 0
    for X, (R, M, e, p, F, Q, ep, pp) in zip(mats, lib):
        exact = np.array([[float(v) for v in row] for row in rca_exact(X)])
        worst["RCA"] = max(worst["RCA"], np.abs(R.values - exact).max())
        eo, po, _ = eci_oracle(M.values)
        if eo is None:
            degenerate += 1
            degenerate_agree += "degenerate_spectrum" in e.diagnostics.flags
        else:
            worst["ECI"] = max(worst["ECI"], np.abs(e.values - eo).max())
            worst["PCI"] = max(worst["PCI"], np.abs(p.values - po).max())
        Fo, Qo, _ = fitness_loop(M.values)
        worst["Fitness"] = max(worst["Fitness"], np.abs(F.values - Fo).max())
        worst["Q"] = max(worst["Q"], np.abs(Q.values - Qo).max())
        (eo, ok_e), (po, ok_p) = eci_plus_mp(X), pci_plus_mp(X)
        unconverged += not (ok_e and ok_p and ep.diagnostics.converged and pp.diagnostics.converged)
        worst["ECI+"] = max(worst["ECI+"], np.abs(ep.values - eo).max())
        worst["PCI+"] = max(worst["PCI+"], np.abs(pp.values - po).max())

    ok = (max(worst.values()) <= 1e-9 and runtime < 10 and degenerate_agree == degenerate and unconverged == 0)
    record("c1", ok, f"{len(mats)} matrices, max |diff| " +
           ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) +
           f"; {degenerate} degenerate spectra flagged {degenerate_agree}; library {runtime:.2f}s")
    assert ok


# ---------------------------------------------------------------------------
# 2. golden instance
# ---------------------------------------------------------------------------

def test_c2_golden_instance():
    G = np.array([[1, 1], [0, 1]])
    eci, _ = cx.eci_pci(G)
    F, _ = cx.fitness(G)
    ok_eci = np.allclose(eci.values, [1, -1], atol=1e-12, rtol=0)
    ok_f = (abs(F.values[0] - 2) <= 1e-12 and F.values[1] <= cx.FITNESS_FLOOR
            and "degenerate" in F.diagnostics.flags and F.diagnostics.converged)
    record("c2", ok_eci and ok_f, f"ECI={eci.values.round(12).tolist()}, F={F.values.tolist()}, "
           f"flags={list(F.diagnostics.flags)}")
    assert ok_eci and ok_f


# ---------------------------------------------------------------------------
# 3. scale invariance
# ---------------------------------------------------------------------------

def _scaled_deviation(metric, X, lam):
    a = metric(X, tol=1e-13, max_iter=20_000)
    b = metric(lam * X, tol=1e-13, max_iter=20_000)
    return np.abs(a.values - b.values).max()


def test_c3_eci_plus_and_fitness_ranking():
    worst, rank_changes = 0.0, 0
    for X in random_positive(40, seed=3):
        for lam in (1e-3, 1e3):
            worst = max(worst, _scaled_deviation(cx.eci_plus, X, lam))
            a, _ = cx.fitness(cx.binarize(cx.rca(X)))
            b, _ = cx.fitness(cx.binarize(cx.rca(lam * X)))
            rank_changes += not np.array_equal(np.argsort(-a.values, kind="stable"), np.argsort(-b.values, kind="stable"))
            worst = max(worst, np.abs(a.values - b.values).max())
    ok = worst <= 1e-8 and rank_changes == 0
    record("c3", ok, f"ECI+ and Fitness max dev {worst:.1e}, ranking changes {rank_changes}")
    assert ok


def test_c3_pci_plus():
    # PCI+ = log(total product trade) - log(normalized fixed point); the first
    # term moves by log(lambda) under X -> lambda X while the second is invariant
    worst, shift_err = 0.0, 0.0
    for X in random_positive(40, seed=3):
        for lam in (1e-3, 1e3):
            a = cx.pci_plus(X, tol=1e-13, max_iter=20_000).values
            b = cx.pci_plus(lam * X, tol=1e-13, max_iter=20_000).values
            worst = max(worst, np.abs(a - b).max())
            shift_err = max(shift_err, np.abs(b - a - np.log(lam)).max())
    ok = worst <= 1e-8
    record("c3", ok, f"PCI+ max dev {worst:.2f} (= |log lambda|; values minus log lambda agree to {shift_err:.1e})")
    assert ok, "PCI+ is shifted by log(lambda); see the decisions ledger"


# ---------------------------------------------------------------------------
# 4. normalization invariants
# ---------------------------------------------------------------------------

def test_c4_normalization_every_iteration():
    worst_f = worst_g = worst_z = 0.0
    steps = 0

    def on_fitness(n, F, Q):
        nonlocal worst_f, steps
        worst_f = max(worst_f, abs(F.mean() - 1), abs(Q.mean() - 1))
        steps += 1

    def on_plus(n, x):
        nonlocal worst_g, steps
        worst_g = max(worst_g, abs(np.log(x).mean()))
        steps += 1

    for X in random_positive(60, seed=4):
        M = cx.binarize(cx.rca(X))
        cx.fitness(M, callback=on_fitness)
        cx.eci_plus(X, callback=on_plus)
        cx.pci_plus(X, callback=on_plus)
        eci, _ = cx.eci_pci(M)
        if "degenerate_spectrum" not in eci.diagnostics.flags:
            worst_z = max(worst_z, abs(eci.values.mean()), abs(eci.values.std() - 1))
    ok = worst_f <= 1e-12 and worst_g <= 1e-10 and worst_z <= 1e-12
    record("c4", ok, f"{steps} iterates; |mean F,Q - 1| {worst_f:.1e}, |log geo-mean| {worst_g:.1e}, "
           f"ECI mean/SD error {worst_z:.1e}")
    assert ok


# ---------------------------------------------------------------------------
# 5. estimators
# ---------------------------------------------------------------------------

def _panel(rng, n=8, periods=(2000, 2005, 2010)):
    rows = []
    effects = rng.normal(scale=2, size=n)
    for i in range(n):
        for j, t in enumerate(periods):
            m, g = rng.normal(), rng.normal(8, 1)
            y = effects[i] + 0.3 * m - 0.04 * g * m + 0.05 * g + 0.01 * j + 0.1 * rng.normal()
            rows.append(PanelObservation(f"C{i}", t, 5, y, g, m, g * m))
    return rows


def test_c5_estimators():
    rng = np.random.default_rng(5)
    formula = Formula(("initial_metric", "interaction", "initial_log_gdp_pc"), year_effects=True)
    fe_err = cov_err = 0.0
    for _ in range(20):
        rows = _panel(rng)
        X = np.array([[o.initial_metric, o.interaction, o.initial_log_gdp_pc] for o in rows])
        y = [o.growth for o in rows]
        fe = fixed_effects(rows, formula)
        ref = lsdv(y, X, [o.country for o in rows], [o.period_start for o in rows])
        fe_err = max(fe_err, np.abs(np.array([fe.coefficients[k] for k in formula.regressors]) - ref).max())

        ols = pooled_ols(rows, formula)
        D = np.column_stack([X] + [[float(o.period_start == t) for o in rows] for t in (2005, 2010)] + [np.ones(len(rows))])
        oracle = cluster_sandwich_loops(D, ols.residuals, [o.country for o in rows])
        cov_err = max(cov_err, np.abs(ols.cov - oracle).max() / np.abs(oracle).max())

    x = np.linspace(-1, 2, 12)
    exact = [PanelObservation(f"E{i}", 2000, 5, 0.5 + 2 * v - 0.25 * (7 + v * v), 7 + v * v, v, v * (7 + v * v))
             for i, v in enumerate(x)]
    fit = pooled_ols(exact, Formula(("initial_metric", "initial_log_gdp_pc"), year_effects=False))
    truth = {"initial_metric": 2.0, "initial_log_gdp_pc": -0.25, "const": 0.5}
    exact_err = max(abs(fit.coefficients[k] - v) for k, v in truth.items())

    ok = fe_err <= 1e-10 and cov_err <= 1e-10 and exact_err <= 1e-13
    record("c5", ok, f"FE vs LSDV {fe_err:.1e}, sandwich vs oracle (rel) {cov_err:.1e}, exact-fit OLS {exact_err:.1e}")
    assert ok


# ---------------------------------------------------------------------------
# 6. performance
# ---------------------------------------------------------------------------

def _realistic(seed):
    X, _ = trade_matrix(np.random.default_rng(seed), 250, 986)
    return X


def test_c6_performance():
    X = _realistic(0)
    per_metric = {}
    for name in cx.METRICS:
        t0 = time.perf_counter()
        cx.compute_metrics(X, [name])
        per_metric[name] = time.perf_counter() - t0
    mats = [_realistic(s) for s in range(52)]
    t0 = time.perf_counter()
    for M in mats:
        cx.compute_metrics(M, cx.METRICS)
    batch = time.perf_counter() - t0
    slowest = max(per_metric, key=per_metric.get)
    ok = max(per_metric.values()) < 1.0 and batch < 30.0
    record("c6", ok, f"slowest metric {slowest} {per_metric[slowest]:.3f}s per year; "
           f"52-year batch of all {len(cx.METRICS)} metrics {batch:.1f}s")
    assert ok


# ---------------------------------------------------------------------------
# 7. real data (gated)
# ---------------------------------------------------------------------------

REAL = os.environ.get("ECONPLEX_REAL_DATA")


@pytest.mark.skipif(not REAL, reason="ECONPLEX_REAL_DATA not set (real datasets are user supplied)")
def test_c7_real_data(tmp_path):
    import json

    from econplex import cli, config
    from econplex.econometrics import DEFAULT_REGRESSORS, PanelSpec, build_panel

    raw = config.load_raw(REAL)
    raw = config.apply_overrides(raw, out=tmp_path)
    raw.setdefault("metrics", {})["years"] = [1973, 2010]
    raw["metrics"]["names"] = ["eci", "pci", "fitness", "q", "eci_plus", "pci_plus"]
    cfg = config.build(raw, os.path.dirname(os.path.abspath(REAL)))
    assert cli.cmd_filter(cfg) == 0 and cli.cmd_compute(cfg) == 0

    report = json.loads((cfg.output_dir / "filtered" / "2010_report.json").read_text())
    n = report["countries_retained"]
    checks = [(abs(n - 121) <= 2, f"2010 countries {n} (121+-2)")]
    targets = {("eci_plus", "eci"): 0.85, ("fitness", "eci"): 0.48, ("fitness", "eci_plus"): 0.43}
    for (a, b), want in targets.items():
        r2 = cx.correlate(cli.read_metric(cfg, a, 2010), cli.read_metric(cfg, b, 2010)).r2
        checks.append((abs(r2 - want) <= 0.05, f"r2({a},{b})={r2:.3f} ({want}+-0.05)"))

    meta = cli._load_meta(cfg)
    spec = PanelSpec(1973, 2013, 40, metric_name="eci_plus")
    panel = build_panel({1973: cli.read_metric(cfg, "eci_plus", 1973)}, meta, spec)
    res = pooled_ols(panel, Formula(DEFAULT_REGRESSORS, year_effects=False))
    c = res.coefficients
    signs = (c["initial_metric"] > 0 and c["interaction"] < 0 and c["initial_log_gdp_pc"] < 0
             and c["initial_human_capital"] > 0)
    checks.append((signs, "40-year cross-section sign pattern " + ("matches" if signs else f"differs: {c}")))
    checks.append((abs(res.r2_adjusted - 0.485) <= 0.10, f"adj R2 {res.r2_adjusted:.3f} (0.485+-0.10)"))
    ok = all(k for k, _ in checks)
    record("c7", ok, "; ".join(d for _, d in checks))
    assert ok, checks


def test_c7_marker():
    if not REAL:
        record("c7", None, "ECONPLEX_REAL_DATA not set; real datasets are not bundled")


# ---------------------------------------------------------------------------
# 8. determinism
# ---------------------------------------------------------------------------

def test_c8_determinism(tmp_path):
    from econplex.cli import main

    first = write_world(tmp_path / "a", n_countries=14, n_products=25, years=range(1990, 2011), seed=8)
    second = tmp_path / "b"
    second.mkdir()
    for name in ("trade.csv", "covariates.csv", "config.toml"):
        shutil.copy(first.parent / name, second / name)
    for root in (first.parent, second):
        for cmd in PIPELINE:
            assert main([cmd, "--config", str(root / "config.toml")]) == 0
    a, b = tree_bytes(first.parent / "out"), tree_bytes(second / "out")
    ok = a == b and len(a) > 0
    record("c8", ok, f"{len(a)} output files, byte-identical across two runs: {ok}")
    assert ok
