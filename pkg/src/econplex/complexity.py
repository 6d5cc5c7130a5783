"""Economic complexity metrics on country x product export matrices.

Three families are provided:

* ECI/PCI from the spectrum of the country-country matrix built on the
  binary specialization matrix ``M``;
* Fitness/Q, the nonlinear mean-normalized fixed-point map on ``M``;
* ECI+/PCI+, a fixed-point map on raw export values normalized by the
  geometric mean at every step.

All routines take either a :class:`~econplex.trade_data.TradeMatrix`, one of
the labelled matrices defined here, or a plain 2-d array.
"""
from __future__ import annotations

import json
import logging
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import pandas as pd
from scipy import sparse, stats
from scipy.sparse import csgraph

from .trade_data import TradeMatrix

log = logging.getLogger(__name__)

METRICS = ("diversity", "ubiquity", "eci", "pci", "fitness", "q", "eci_plus", "pci_plus")
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 1000
FITNESS_FLOOR = 1e-13
# entities whose fitness shrank below this fraction between the two last
# snapshots are treated as flowing to zero
_VANISHING_RATIO = 0.75
_SPECTRAL_GAP_TOL = 1e-10


class ComplexityDomainError(ValueError):
    """Input matrix violates a metric's preconditions."""


@dataclass
class IterationDiagnostics:
    iterations: int = 0
    final_residual: float = 0.0
    converged: bool = True
    tolerance: float = 0.0
    degenerate_entities: tuple[str, ...] = ()
    dropped: tuple[str, ...] = ()
    flags: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "converged": self.converged,
            "tolerance": self.tolerance,
            "degenerate_entities": list(self.degenerate_entities),
            "dropped": list(self.dropped),
            "flags": list(self.flags),
            "extra": self.extra,
        }


@dataclass
class MetricVector:
    axis: str
    labels: tuple[str, ...]
    values: np.ndarray
    metric_name: str
    diagnostics: IterationDiagnostics = field(default_factory=IterationDiagnostics)
    year: int | None = None

    def __post_init__(self):
        self.labels = tuple(self.labels)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.axis not in ("country", "product"):
            raise ValueError(f"axis must be 'country' or 'product', got {self.axis!r}")
        if self.values.shape != (len(self.labels),):
            raise ValueError("values and labels differ in length")

    def __len__(self):
        return len(self.labels)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.labels, self.values.tolist()))

    def to_series(self) -> pd.Series:
        return pd.Series(self.values, index=pd.Index(self.labels, name="label"), name=self.metric_name)

    def write_csv(self, fh) -> None:
        fh.write("label,value\n")
        for label, value in zip(self.labels, self.values.tolist()):
            fh.write(f"{label},{value!r}\n")

    def diagnostics_json(self) -> str:
        payload = {"metric": self.metric_name, "axis": self.axis, "year": self.year, **self.diagnostics.to_dict()}
        return json.dumps(payload, indent=2, sort_keys=True)


@dataclass(eq=False)
class _LabelledMatrix:
    countries: tuple[str, ...]
    products: tuple[str, ...]
    values: np.ndarray
    year: int | None = None

    @property
    def shape(self):
        return self.values.shape


class RcaMatrix(_LabelledMatrix):
    """Revealed comparative advantage ratios, same labels as the source."""


class BinaryMatrix(_LabelledMatrix):
    """0/1 specialization matrix (``RCA >= 1``)."""

    def empty_rows(self) -> tuple[str, ...]:
        return tuple(c for c, k in zip(self.countries, self.values.sum(axis=1)) if k == 0)

    def empty_columns(self) -> tuple[str, ...]:
        return tuple(p for p, k in zip(self.products, self.values.sum(axis=0)) if k == 0)


def _parts(matrix):
    """(dense float array, countries, products, year) for any accepted input."""
    if isinstance(matrix, TradeMatrix):
        return matrix.to_dense(), matrix.countries, matrix.products, matrix.year
    if isinstance(matrix, _LabelledMatrix):
        return np.asarray(matrix.values, dtype=np.float64), matrix.countries, matrix.products, matrix.year
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2:
        raise ComplexityDomainError("expected a 2-d matrix")
    return (arr, tuple(f"c{i}" for i in range(arr.shape[0])),
            tuple(f"p{j}" for j in range(arr.shape[1])), None)


def _require_nonempty(X, countries, products):
    rows = np.flatnonzero(~(X > 0).any(axis=1))
    if rows.size:
        raise ComplexityDomainError(f"country {countries[rows[0]]!r} has no positive exports")
    cols = np.flatnonzero(~(X > 0).any(axis=0))
    if cols.size:
        raise ComplexityDomainError(f"product {products[cols[0]]!r} has no positive exports")


def _as_binary(m) -> BinaryMatrix:
    if isinstance(m, BinaryMatrix):
        return m
    X, countries, products, year = _parts(m)
    if not np.isin(X, (0, 1)).all():
        raise ComplexityDomainError("binary matrix expected (entries in {0, 1})")
    return BinaryMatrix(countries, products, X.astype(np.int8), year)


def _drop_empty(m: BinaryMatrix):
    """Remove all-zero rows/columns, returning (float array, countries, products, dropped labels)."""
    M = m.values.astype(np.float64)
    rows = M.sum(axis=1) > 0
    cols = M.sum(axis=0) > 0
    dropped = tuple(c for c, keep in zip(m.countries, rows) if not keep)
    dropped += tuple(p for p, keep in zip(m.products, cols) if not keep)
    countries = tuple(c for c, keep in zip(m.countries, rows) if keep)
    products = tuple(p for p, keep in zip(m.products, cols) if keep)
    return M[rows][:, cols], countries, products, dropped


def _zscore(v: np.ndarray) -> np.ndarray | None:
    sd = v.std()
    if not np.isfinite(sd) or sd <= 1e-12 * np.abs(v).max():
        return None
    z = (v - v.mean()) / sd
    # second pass removes the rounding left by the first one
    return (z - z.mean()) / z.std()


# ---------------------------------------------------------------------------
# RCA, M, diversity, ubiquity
# ---------------------------------------------------------------------------

def _exact_values(matrix, X):
    """Entries as exact Python numbers (ints for exact TradeMatrix units, Fractions otherwise)."""
    if isinstance(matrix, TradeMatrix) and matrix.exact:
        return matrix.values.toarray().astype(object)  # the unit scale cancels in RCA
    return np.vectorize(Fraction, otypes=[object])(X)


def _settle_unit_ratios(R, matrix, X):
    """Put entries within rounding of 1 on the side of 1 given by exact arithmetic.

    The specialization threshold is inclusive, so an RCA that is exactly 1
    must not come out as 0.9999999999999999.
    """
    near = np.argwhere((np.abs(R - 1.0) <= 1e-9) & (X > 0))
    if not len(near):
        return R
    E = _exact_values(matrix, X)
    total = sum(E.ravel().tolist())
    rows, cols = {}, {}
    R = R.copy()
    for i, j in near:
        if i not in rows:
            rows[i] = sum(E[i].tolist())
        if j not in cols:
            cols[j] = sum(E[:, j].tolist())
        lhs, rhs = E[i, j] * total, rows[i] * cols[j]
        if lhs == rhs:
            R[i, j] = 1.0
        elif lhs > rhs and R[i, j] <= 1.0:
            R[i, j] = np.nextafter(1.0, 2.0)
        elif lhs < rhs and R[i, j] >= 1.0:
            R[i, j] = np.nextafter(1.0, 0.0)
    return R


def rca(matrix) -> RcaMatrix:
    """Ratio of observed exports to the exports expected from country and product size.

    Entries whose floating-point value lies within 1e-9 of 1 are re-decided
    in exact arithmetic, so ``binarize`` agrees with the exact ``R >= 1``.
    """
    X, countries, products, year = _parts(matrix)
    _require_nonempty(X, countries, products)
    row = X.sum(axis=1)
    col = X.sum(axis=0)
    total = row.sum()
    R = _settle_unit_ratios(X * total / np.outer(row, col), matrix, X)
    return RcaMatrix(countries, products, R, year)


def binarize(rca_matrix: RcaMatrix, threshold: float = 1.0) -> BinaryMatrix:
    R = np.asarray(rca_matrix.values)
    M = (R >= threshold).astype(np.int8)
    out = BinaryMatrix(rca_matrix.countries, rca_matrix.products, M, rca_matrix.year)
    empty = out.empty_rows()
    if empty:
        log.warning("%d countries have no product with RCA >= %g: %s", len(empty), threshold, ", ".join(empty))
    return out


def _count_vector(m, axis: int, name: str) -> MetricVector:
    m = _as_binary(m)
    counts = m.values.sum(axis=axis).astype(np.float64)
    labels = m.countries if axis == 1 else m.products
    zero = tuple(lbl for lbl, k in zip(labels, counts) if k == 0)
    diag = IterationDiagnostics(flags=("zero_entries",) if zero else (), extra={"zero_labels": list(zero)} if zero else {})
    return MetricVector("country" if axis == 1 else "product", labels, counts, name, diag, m.year)


def diversity(m) -> MetricVector:
    """Number of products each country exports with RCA >= 1."""
    return _count_vector(m, 1, "diversity")


def ubiquity(m) -> MetricVector:
    """Number of countries exporting each product with RCA >= 1."""
    return _count_vector(m, 0, "ubiquity")


# ---------------------------------------------------------------------------
# ECI / PCI
# ---------------------------------------------------------------------------

def country_country_matrix(M: np.ndarray) -> np.ndarray:
    """Row-stochastic ``sum_p M_cp M_c'p / (k_c k_p)``."""
    kc = M.sum(axis=1)
    kp = M.sum(axis=0)
    return (M / kp) @ M.T / kc[:, None]


def eci_pci(m) -> tuple[MetricVector, MetricVector]:
    """Economic and product complexity indices.

    ECI is the eigenvector of the country-country matrix belonging to its
    second-largest eigenvalue, z-scored (population SD) and signed so that it
    correlates nonnegatively with diversity.  PCI averages ECI over each
    product's exporters and is z-scored the same way.

    The row-stochastic matrix is similar to the symmetric
    ``D^-1/2 M U^-1 M^T D^-1/2``; its trivial eigenvector ``sqrt(k_c)`` is
    deflated and ``eigh`` returns the second eigenpair directly.
    """
    m = _as_binary(m)
    M, countries, products, dropped = _drop_empty(m)
    if len(countries) < 2:
        raise ComplexityDomainError(f"ECI needs at least 2 countries with exports, got {len(countries)}")
    flags: list[str] = []
    if dropped:
        flags.append("dropped_empty")
    kc = M.sum(axis=1)
    kp = M.sum(axis=0)

    sq = np.sqrt(kc)
    S = (M / kp) @ M.T / np.outer(sq, sq)
    S = (S + S.T) / 2
    t = sq / np.linalg.norm(sq)
    w, V = np.linalg.eigh(S - np.outer(t, t))
    lam = float(w[-1])
    gap = lam - float(w[-2]) if len(w) > 1 else np.inf

    v = V[:, -1] / sq
    v /= np.linalg.norm(v)
    Mt = country_country_matrix(M)
    residual = float(np.abs(Mt @ v - lam * v).max())
    if lam >= 1 - _SPECTRAL_GAP_TOL:
        flags.append("reducible")
        log.warning("country-country matrix is reducible (second eigenvalue %.12g); ECI computed on the full matrix", lam)

    extra = {"eigenvalue": lam, "spectral_gap": float(gap), "eigen_residual": residual}
    eci = _zscore(v)
    if gap <= _SPECTRAL_GAP_TOL * max(1.0, abs(lam)) or eci is None:
        flags.append("degenerate_spectrum")
        eci = np.zeros(len(countries))
        pci = np.zeros(len(products))
    else:
        r = np.corrcoef(eci, kc)[0, 1] if kc.std() > 0 else 0.0
        if r < -1e-12:
            eci = -eci
        elif abs(r) <= 1e-12:
            # the smallest label whose score is not zero decides the sign
            for i in sorted(range(len(countries)), key=countries.__getitem__):
                if abs(eci[i]) > 1e-9:
                    if eci[i] < 0:
                        eci = -eci
                    break
        pci = _zscore(M.T @ eci / kp)
        if pci is None:
            flags.append("degenerate_pci")
            pci = np.zeros(len(products))

    diag = IterationDiagnostics(dropped=dropped, flags=tuple(flags), extra=extra)
    return (
        MetricVector("country", countries, eci, "eci", diag, m.year),
        MetricVector("product", products, pci, "pci", diag, m.year),
    )


# ---------------------------------------------------------------------------
# Fitness / Q
# ---------------------------------------------------------------------------

@dataclass
class _FitnessRun:
    F: np.ndarray
    Q: np.ndarray
    iterations: int
    residual: float
    converged: bool
    vanishing: np.ndarray  # bool mask over countries


def _components(M) -> int:
    """Connected components of the bipartite country-product graph."""
    C, P = M.shape
    adj = sparse.bmat([[None, sparse.csr_array(M)], [sparse.csr_array(M.T), None]])
    return int(csgraph.connected_components(adj, directed=False)[0])


def _fitness_step(M, F, Q, floor):
    Ft = M @ Q
    Qt = 1.0 / (M.T @ (1.0 / F))
    Fn = Ft / Ft.mean()
    Qn = Qt / Qt.mean()
    np.maximum(Fn, floor, out=Fn)
    np.maximum(Qn, floor, out=Qn)
    return Fn, Qn


def _fitness_iterate(M, tol, max_iter, floor, callback=None) -> _FitnessRun:
    F = np.ones(M.shape[0])
    Q = np.ones(M.shape[1])
    snapshots = {0: F}
    residual = np.inf
    n = 0
    while n < max_iter:
        Fn, Qn = _fitness_step(M, F, Q, floor)
        n += 1
        residual = max(np.abs(Fn - F).max(), np.abs(Qn - Q).max())
        F, Q = Fn, Qn
        if callback is not None:
            callback(n, F, Q)
        # the map interleaves two independent chains (F at even steps with
        # Q at odd steps and vice versa), so snapshots are compared by parity
        if n & (n - 1) == 0 or (n - 1) & (n - 2) == 0:
            snapshots[n] = F
        if residual <= tol:
            break
    refs = [k for k in snapshots if 0 < k <= n // 2 and k % 2 == n % 2]
    vanishing = F <= 10 * floor
    if refs:
        with np.errstate(divide="ignore", invalid="ignore"):
            vanishing |= F / snapshots[max(refs)] < _VANISHING_RATIO
    return _FitnessRun(F, Q, n, float(residual), bool(residual <= tol), vanishing)


def _fitness_solve(M, tol, max_iter, floor, resolve, callback=None):
    """Iterate the map; if entities flow to zero, solve the surviving sub-problem.

    Returns (F, Q, iterations, residual, status).  ``status`` is ``""`` for
    the plain iterate, ``"support_reduced"`` after a reduction, and
    ``"disconnected_support"`` when the survivors split into blocks whose
    relative scale is set by the vanishing part; the plain iterate is
    returned then.  After a reduction the full map is iterated again from
    the embedded sub-solution, so the residual is always a step of the
    original map.
    """
    run = _fitness_iterate(M, tol, max_iter, floor, callback)
    plain = (run.F, run.Q, run.iterations, run.residual, "")
    if not resolve or run.converged or not run.vanishing.any():
        return plain

    # countries whose every product is also made by a vanishing country vanish too
    zero_c = run.vanishing.copy()
    while True:
        zero_p = (M[zero_c] > 0).any(axis=0)
        more = zero_c | ~((M[:, ~zero_p] > 0).any(axis=1))
        if (more == zero_c).all():
            break
        zero_c = more
    if zero_c.all():
        return plain

    sub = M[~zero_c][:, ~zero_p]
    if _components(sub) > 1:
        return plain[:4] + ("disconnected_support",)
    # embedding rescales by C/|S| and P/|P'|; tighten tol so the error stays below it
    sub_tol = tol * min(sub.shape[0] / M.shape[0], sub.shape[1] / M.shape[1])
    Fs, Qs, n_sub, _, status = _fitness_solve(sub, sub_tol, max_iter, floor, resolve)
    if status == "disconnected_support":
        return plain[:4] + (status,)
    F = np.zeros(M.shape[0])
    Q = np.zeros(M.shape[1])
    F[~zero_c] = Fs * M.shape[0] / sub.shape[0]
    Q[~zero_p] = Qs * M.shape[1] / sub.shape[1]
    F = np.maximum(F, floor)
    Q = np.maximum(Q, floor)
    F, Q = F / F.mean(), Q / Q.mean()
    # continue the full map from the embedded solution so the stopping rule
    # is checked on the original problem; vanishing entities, whose limit is
    # zero, are held at the floor instead of drifting to a few multiples of it
    n_polish, residual = 0, np.inf
    while n_polish < max_iter:
        Fn, Qn = _fitness_step(M, F, Q, floor)
        Fn[zero_c] = floor
        Qn[zero_p] = floor
        Fn /= Fn.mean()
        Qn /= Qn.mean()
        n_polish += 1
        residual = float(max(np.abs(Fn - F).max(), np.abs(Qn - Q).max()))
        F, Q = Fn, Qn
        if residual <= tol:
            break
    return F, Q, run.iterations + n_sub + n_polish, residual, "support_reduced"


def fitness(
    m,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    floor: float = FITNESS_FLOOR,
    resolve_degenerate: bool = True,
    callback: Callable[[int, np.ndarray, np.ndarray], None] | None = None,
) -> tuple[MetricVector, MetricVector]:
    """Country fitness F and product complexity Q.

    Iterates ``F~ = M Q``, ``Q~ = 1 / (M^T (1/F))`` from all-ones initial
    conditions, normalizing both by their arithmetic mean after each step,
    until the joint max absolute change is ``<= tol`` or ``max_iter`` steps.
    Values are clamped at ``floor``.

    On nested matrices some fitnesses decay to zero only algebraically
    (~1/N), which no iteration budget resolves.  With ``resolve_degenerate``
    such entities are detected from their decay between snapshots and the
    map is solved exactly on the surviving rows/columns; the vanishing
    entities are reported at ``floor`` and listed in
    ``diagnostics.degenerate_entities``.  If the survivors split into
    disconnected blocks their relative scale is fixed only by the vanishing
    part, so the plain iterate is returned with the flag
    ``disconnected_support`` and ``converged=False``.
    ``resolve_degenerate=False`` always returns the plain iterate.

    ``callback(n, F, Q)`` is called after every step of the plain iteration.
    """
    m = _as_binary(m)
    M, countries, products, dropped = _drop_empty(m)
    if not countries:
        raise ComplexityDomainError("fitness needs at least one country with RCA >= 1")
    F, Q, iterations, residual, status = _fitness_solve(M, tol, max_iter, floor, resolve_degenerate, callback)
    flags = []
    if dropped:
        flags.append("dropped_empty")
    if status:
        flags.append(status)
    if status == "disconnected_support":
        log.warning("fitness: surviving support splits into blocks; returning the plain iterate")
    if residual > tol and _components(M) > 1:
        # each block has its own scale; the two interleaved chains settle on
        # different ones and the map cycles with period 2
        flags.append("disconnected")
        log.warning("fitness: M splits into disconnected blocks, the map does not converge")
    tiny_f = tuple(c for c, f in zip(countries, F) if f <= 10 * floor)
    tiny_q = tuple(p for p, q in zip(products, Q) if q <= 10 * floor)
    if tiny_f:
        flags.append("degenerate")
    common = dict(iterations=iterations, final_residual=residual, converged=residual <= tol,
                  tolerance=tol, dropped=dropped)
    return (
        MetricVector("country", countries, F, "fitness",
                     IterationDiagnostics(degenerate_entities=tiny_f, flags=tuple(flags), **common), m.year),
        MetricVector("product", products, Q, "q",
                     IterationDiagnostics(degenerate_entities=tiny_q, flags=tuple(flags), **common), m.year),
    )


# ---------------------------------------------------------------------------
# ECI+ / PCI+
# ---------------------------------------------------------------------------

def _geo_normalize(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lx = np.log(x)
    lx -= lx.mean()
    return np.exp(lx), lx


def _plus_iterate(step, x0, tol, max_iter, callback):
    x, lx = _geo_normalize(x0)
    if callback is not None:
        callback(0, x)
    residual = np.inf
    n = 0
    while n < max_iter:
        xn, lxn = _geo_normalize(step(x))
        n += 1
        residual = float(np.abs(lxn - lx).max())
        x, lx = xn, lxn
        if callback is not None:
            callback(n, x)
        if residual <= tol:
            break
    return x, lx, n, residual


def eci_plus(
    matrix,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    callback: Callable[[int, np.ndarray], None] | None = None,
) -> MetricVector:
    """Total exports corrected by how hard each product is to export.

    Starting from total exports, iterates
    ``x_c <- sum_p X_cp / sum_c' (X_c'p / x_c')`` with geometric-mean
    normalization at every step (initial vector included) until the max
    change in ``log x`` is ``<= tol``.  Returns
    ``log x_c - log(sum_p X_cp / X_p)`` with ``X_p`` world trade in ``p``.
    """
    X, countries, products, year = _parts(matrix)
    _require_nonempty(X, countries, products)
    Xt = np.ascontiguousarray(X.T)

    def step(x):
        return X @ (1.0 / (Xt @ (1.0 / x)))

    x, lx, n, residual = _plus_iterate(step, X.sum(axis=1), tol, max_iter, callback)
    size = np.log(X @ (1.0 / X.sum(axis=0)))
    diag = IterationDiagnostics(n, residual, residual <= tol, tol)
    if not diag.converged:
        log.warning("ECI+ did not converge in %d iterations (residual %.3g)", n, residual)
    return MetricVector("country", countries, lx - size, "eci_plus", diag, year)


def pci_plus(
    matrix,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    callback: Callable[[int, np.ndarray], None] | None = None,
) -> MetricVector:
    """Total trade in a product corrected by how easy it is to export.

    Initial condition: the sum over countries of each product's share of the
    country's exports.  Iterates
    ``x_p <- sum_c X_cp / sum_p' (X_cp' / x_p')`` with geometric-mean
    normalization and returns ``log X_p - log x_p``.
    """
    X, countries, products, year = _parts(matrix)
    _require_nonempty(X, countries, products)
    Xt = np.ascontiguousarray(X.T)
    xc0, _ = _geo_normalize(X.sum(axis=1))

    def step(x):
        return Xt @ (1.0 / (X @ (1.0 / x)))

    x, lx, n, residual = _plus_iterate(step, Xt @ (1.0 / xc0), tol, max_iter, callback)
    diag = IterationDiagnostics(n, residual, residual <= tol, tol)
    if not diag.converged:
        log.warning("PCI+ did not converge in %d iterations (residual %.3g)", n, residual)
    return MetricVector("product", products, np.log(X.sum(axis=0)) - lx, "pci_plus", diag, year)


# ---------------------------------------------------------------------------
# batch + correlation
# ---------------------------------------------------------------------------

def compute_metrics(
    matrix,
    names: Sequence[str] = ("eci", "pci", "fitness", "q", "eci_plus", "pci_plus"),
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> dict[str, MetricVector]:
    """Compute the requested metrics, sharing RCA/M and paired solves."""
    unknown = set(names) - set(METRICS)
    if unknown:
        raise ValueError(f"unknown metrics: {sorted(unknown)}")
    out: dict[str, MetricVector] = {}
    M = None
    if set(names) & {"diversity", "ubiquity", "eci", "pci", "fitness", "q"}:
        M = binarize(rca(matrix))
    if "diversity" in names:
        out["diversity"] = diversity(M)
    if "ubiquity" in names:
        out["ubiquity"] = ubiquity(M)
    if {"eci", "pci"} & set(names):
        out["eci"], out["pci"] = eci_pci(M)
    if {"fitness", "q"} & set(names):
        out["fitness"], out["q"] = fitness(M, tol, max_iter)
    if "eci_plus" in names:
        out["eci_plus"] = eci_plus(matrix, tol, max_iter)
    if "pci_plus" in names:
        out["pci_plus"] = pci_plus(matrix, tol, max_iter)
    return {name: out[name] for name in names}


@dataclass
class CorrelationReport:
    metric_a: str
    metric_b: str
    n: int
    pearson_r: float
    r2: float
    spearman_rho: float
    table: pd.DataFrame

    def to_dict(self) -> dict:
        return {
            "metric_a": self.metric_a,
            "metric_b": self.metric_b,
            "n": self.n,
            "pearson_r": self.pearson_r,
            "r2": self.r2,
            "spearman_rho": self.spearman_rho,
        }


def correlate(a: MetricVector, b: MetricVector) -> CorrelationReport:
    """Pearson and rank correlation on the labels two vectors share."""
    if a.axis != b.axis:
        raise ValueError(f"cannot correlate a {a.axis} metric with a {b.axis} metric")
    bmap = b.as_dict()
    shared = [lbl for lbl in a.labels if lbl in bmap]
    if len(shared) < 3:
        raise ValueError(f"need at least 3 shared labels, got {len(shared)}")
    amap = a.as_dict()
    xa = np.array([amap[lbl] for lbl in shared])
    xb = np.array([bmap[lbl] for lbl in shared])
    if xa.std() == 0 or xb.std() == 0:
        raise ValueError("correlation undefined for a constant vector")
    r = float(np.corrcoef(xa, xb)[0, 1])
    r = max(-1.0, min(1.0, r))
    rho = float(stats.spearmanr(xa, xb).statistic)
    table = pd.DataFrame({"label": shared, a.metric_name: xa, b.metric_name + ("_b" if a.metric_name == b.metric_name else ""): xb})
    return CorrelationReport(a.metric_name, b.metric_name, len(shared), r, r * r, rho, table)


def metric_from_mapping(values: Mapping[str, float], metric_name: str, axis: str = "country", year=None) -> MetricVector:
    labels = tuple(values)
    return MetricVector(axis, labels, np.array([values[k] for k in labels], dtype=float), metric_name, year=year)
