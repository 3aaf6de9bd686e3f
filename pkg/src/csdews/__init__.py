"""Early-warning signals of critical slowing down in per-subject series."""

from .detection import (
    CohortSummary,
    DetectionConfig,
    StateLabel,
    SubjectReport,
    WarningBurst,
    build_report,
    classify_states,
    cohort_aggregate,
    detect_warnings,
    partition_counts,
    signal_density,
    signal_spread,
    timing_summary,
)
from .indicators import (
    METRICS,
    IndicatorSeries,
    SeriesTooShortError,
    WindowConfig,
    ar1_ols,
    coeff_variation,
    expanding_indicators,
    kurtosis,
    return_rate,
    skewness,
    standardize_stream,
    std_dev,
)
from .pipeline import analyze_series, run_batch
from .preprocessing import (
    AttemptRecord,
    ItemStats,
    SubjectSeries,
    build_series,
    compute_item_means,
    load_series,
    parse_records,
    relative_score,
)
from .regime_shift import (
    ShiftReport,
    change_percent,
    partition_series,
    select_early_cases,
    shift_table,
    size_category,
    welch_t_test,
)
from .simulator import (
    BenchResult,
    SimConfig,
    gen_fold_bifurcation,
    gen_ramped_ar1,
    gen_stationary_ar1,
    run_benchmark,
)

__version__ = "0.1.0"
