"""Economic complexity metrics (ECI/PCI, Fitness/Q, ECI+/PCI+) and growth regressions."""
from .complexity import (
    BinaryMatrix,
    ComplexityDomainError,
    IterationDiagnostics,
    MetricVector,
    RcaMatrix,
    binarize,
    compute_metrics,
    correlate,
    diversity,
    eci_pci,
    eci_plus,
    fitness,
    pci_plus,
    rca,
    ubiquity,
)
from .econometrics import (
    Formula,
    PanelObservation,
    PanelSpec,
    RegressionResult,
    build_panel,
    cagr,
    fixed_effects,
    format_table,
    pooled_ols,
    predict_growth,
    predict_table,
    standardize,
)
from .trade_data import (
    CountryMeta,
    DegenerateSampleError,
    FilterConfig,
    FilterReport,
    TradeDataError,
    TradeMatrix,
    TradeRecord,
    apply_static_filters,
    apply_yearly_filters,
    build_matrix,
    load_trade_csv,
)

__version__ = "0.1.0"
