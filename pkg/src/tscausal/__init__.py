"""Constraint-based causal discovery for multivariate sensor time series.

The package covers the full pipeline: panel ingestion and resampling,
linear/nonlinear conditional-independence testing, two-stage lagged causal
discovery with contemporaneous links, synthetic ground-truth validation, and
cohort-level aggregation with delimited and figure outputs.
"""

from .citest import (
    CMI_KNN,
    PARCORR,
    CITestResult,
    NeighborCounts,
    cmi_knn_estimate,
    cmi_knn_test,
    digamma,
    neighbor_counts,
    parcorr_test,
)
from .cohort import (
    CohortSummary,
    CorrelationReport,
    CorrelationRow,
    build_cohort_summary,
    correlation_report,
    lag_probability_curve,
    link_count_histogram,
    pooled_correlation,
    statistic_trajectory,
)
from .discovery import (
    DiscoveryConfig,
    DiscoveryResult,
    ParentSuperset,
    LinkTestRecord,
    mci_stage,
    pc_stage,
    run_discovery,
)
from .errors import (
    ConditioningError,
    DegenerateVariableError,
    EmptyInputError,
    InsufficientDataError,
    IntegrityError,
    ParseError,
    TscausalError,
    UndefinedCorrelationError,
)
from .graph import DIRECTED, UNORIENTED, CausalGraph, LaggedVariable, Link, SummaryGraph
from .panel import (
    LaggedSampleMatrix,
    TimeSeriesPanel,
    build_lagged_matrix,
    load_panel,
    resample,
    standardize,
    with_bins_sum,
    write_panel_csv,
)
from .synth import (
    NoiseSpec,
    RecoveryScore,
    ScmLink,
    ScmSpec,
    ground_truth_graph,
    score,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "CMI_KNN",
    "PARCORR",
    "DIRECTED",
    "UNORIENTED",
    "CITestResult",
    "CausalGraph",
    "CohortSummary",
    "ConditioningError",
    "CorrelationReport",
    "CorrelationRow",
    "DegenerateVariableError",
    "DiscoveryConfig",
    "DiscoveryResult",
    "EmptyInputError",
    "InsufficientDataError",
    "IntegrityError",
    "LaggedSampleMatrix",
    "LaggedVariable",
    "Link",
    "NeighborCounts",
    "NoiseSpec",
    "ParentSuperset",
    "ParseError",
    "RecoveryScore",
    "ScmLink",
    "ScmSpec",
    "SummaryGraph",
    "LinkTestRecord",
    "TimeSeriesPanel",
    "TscausalError",
    "UndefinedCorrelationError",
    "build_cohort_summary",
    "build_lagged_matrix",
    "cmi_knn_estimate",
    "cmi_knn_test",
    "correlation_report",
    "digamma",
    "ground_truth_graph",
    "lag_probability_curve",
    "link_count_histogram",
    "load_panel",
    "mci_stage",
    "neighbor_counts",
    "parcorr_test",
    "pc_stage",
    "pooled_correlation",
    "resample",
    "run_discovery",
    "score",
    "simulate",
    "standardize",
    "statistic_trajectory",
    "with_bins_sum",
    "write_panel_csv",
]
