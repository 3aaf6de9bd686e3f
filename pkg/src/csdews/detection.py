"""Run-length warning detection, timing statistics and state ladder.

A warning burst is a maximal run of at least ``min_run`` consecutive
indicator points whose z-score exceeds the threshold (falls below minus the
threshold for the return rate). Undefined z values break runs.

Proportions place a series index on [0, 1] as ``index / (length - 1)``.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .indicators import METRICS, IndicatorSeries

LOW_METRICS = frozenset({"rr"})


class StateLabel(str, Enum):
    STABLE = "Stable"
    VULNERABLE = "Vulnerable"
    WARNING = "Warning"
    CRITICAL = "Critical"
    FAILING = "Failing"


# minimum number of concurrently bursting metrics for each label, ascending
DEFAULT_STATE_LADDER = (
    (0, StateLabel.STABLE),
    (1, StateLabel.VULNERABLE),
    (2, StateLabel.WARNING),
    (3, StateLabel.CRITICAL),
    (5, StateLabel.FAILING),
)


@dataclass(frozen=True)
class DetectionConfig:
    z_threshold: float = 2.0
    min_run: int = 2
    low_metrics: frozenset = LOW_METRICS
    state_ladder: tuple = DEFAULT_STATE_LADDER

    def __post_init__(self):
        if not self.z_threshold > 0:
            raise ValueError(f"z_threshold must be positive, got {self.z_threshold}")
        if self.min_run < 2:
            raise ValueError(f"min_run must be >= 2, got {self.min_run}")
        counts = [c for c, _ in self.state_ladder]
        if not counts or counts[0] != 0 or counts != sorted(set(counts)):
            raise ValueError("state ladder thresholds must start at 0 and increase")

    def direction(self, metric: str) -> str:
        return "low" if metric in self.low_metrics else "high"


@dataclass(frozen=True)
class WarningBurst:
    metric: str
    start_idx: int
    end_idx: int
    start_prop: float
    median_prop: float
    end_prop: float
    n_points: int
    mean_abs_z: float

    @property
    def indices(self) -> range:
        return range(self.start_idx, self.end_idx + 1)


@dataclass
class SubjectReport:
    subject_id: str
    series_length: int
    detected: bool
    warnings: list[WarningBurst]
    total_warning_points: int
    metrics_flagged: int
    first_detection_prop: float | None
    strongest: WarningBurst | None
    signal_spread: float
    signal_density: float | None
    quarter_counts: tuple[int, int, int, int]
    half_counts: tuple[int, int]
    early_only: bool
    per_metric_counts: dict[str, int] = field(default_factory=dict)
    states: list[tuple[int, StateLabel]] = field(default_factory=list)


def proportion(index: float, series_length: int) -> float:
    if series_length < 2:
        return 0.0
    return index / (series_length - 1)


def _exceeds(z: np.ndarray, threshold: float, direction: str) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        if direction == "low":
            return z < -threshold
        return z > threshold


def detect_warnings(
    z_track,
    metric: str,
    config: DetectionConfig | None = None,
    index=None,
    series_length: int | None = None,
) -> list[WarningBurst]:
    """Extract maximal above-threshold runs from one z-track.

    ``index`` maps track positions to series indices and defaults to the
    positions themselves; ``series_length`` defaults to ``index[-1] + 1``.
    """
    cfg = config or DetectionConfig()
    z = np.asarray(z_track, dtype=float)
    idx = np.arange(z.size) if index is None else np.asarray(index)
    if idx.shape != z.shape:
        raise ValueError("index and z_track must have the same length")
    if z.size == 0:
        return []
    length = int(idx[-1]) + 1 if series_length is None else series_length

    hit = _exceeds(z, cfg.z_threshold, cfg.direction(metric)).astype(np.int8)
    edges = np.diff(np.concatenate(([0], hit, [0])))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)  # exclusive

    bursts = []
    for a, b in zip(starts, stops):
        if b - a < cfg.min_run:
            continue
        s, e = int(idx[a]), int(idx[b - 1])
        bursts.append(
            WarningBurst(
                metric=metric,
                start_idx=s,
                end_idx=e,
                start_prop=proportion(s, length),
                median_prop=proportion((s + e) / 2, length),
                end_prop=proportion(e, length),
                n_points=int(b - a),
                mean_abs_z=float(np.mean(np.abs(z[a:b]))),
            )
        )
    return bursts


def detect_all(ind: IndicatorSeries, config: DetectionConfig | None = None) -> dict[str, list[WarningBurst]]:
    cfg = config or DetectionConfig()
    return {
        m: detect_warnings(ind.z[m], m, cfg, index=ind.index, series_length=ind.series_length)
        for m in METRICS
    }


def strongest_burst(warnings: Iterable[WarningBurst]) -> WarningBurst | None:
    """Longest burst; ties go to higher mean |z|, then the earlier start."""
    best = None
    for b in warnings:
        if best is None:
            best = b
            continue
        key = (b.n_points, b.mean_abs_z, -b.start_idx)
        if key > (best.n_points, best.mean_abs_z, -best.start_idx):
            best = b
    return best


def timing_summary(warnings: Sequence[WarningBurst], series_length: int):
    """Return ``(first_detection_prop, strongest_burst)``; ``(None, None)`` if empty."""
    if not warnings:
        return None, None
    first = min(b.start_idx for b in warnings)
    return proportion(first, series_length), strongest_burst(warnings)


def signal_spread(warnings: Sequence[WarningBurst], series_length: int) -> float:
    """Span from the first warned index to the last, over the series length."""
    if not warnings:
        return 0.0
    lo = min(b.start_idx for b in warnings)
    hi = max(b.end_idx for b in warnings)
    return (hi - lo + 1) / series_length


def warned_indices(warnings: Iterable[WarningBurst]) -> set[int]:
    out: set[int] = set()
    for b in warnings:
        out.update(b.indices)
    return out


def signal_density(warnings: Sequence[WarningBurst]) -> float | None:
    """Fraction of the warning span covered by at least one burst."""
    if not warnings:
        return None
    lo = min(b.start_idx for b in warnings)
    hi = max(b.end_idx for b in warnings)
    return len(warned_indices(warnings)) / (hi - lo + 1)


def partition_counts(warnings: Iterable[WarningBurst], series_length: int):
    """Count warned points (per metric, with multiplicity) per quarter and half.

    Boundaries are lower-inclusive: a point at proportion exactly 0.5 is in
    the second half. Comparisons are done in integers to stay exact.
    """
    quarters = [0, 0, 0, 0]
    halves = [0, 0]
    span = max(series_length - 1, 1)
    total = 0
    for b in warnings:
        for i in b.indices:
            q = min(4 * i // span, 3)
            quarters[q] += 1
            halves[0 if 2 * i < span else 1] += 1
            total += 1
    early_only = total > 0 and halves[1] == 0
    return tuple(quarters), tuple(halves), early_only


def state_for_count(count: int, ladder=DEFAULT_STATE_LADDER) -> StateLabel:
    label = ladder[0][1]
    for threshold, name in ladder:
        if count >= threshold:
            label = name
    return label


def classify_states(
    index,
    warnings_by_metric: Mapping[str, Sequence[WarningBurst]],
    ladder=DEFAULT_STATE_LADDER,
) -> list[tuple[int, StateLabel]]:
    """Label each index by how many metrics are inside a burst there."""
    index = np.asarray(index.index if isinstance(index, IndicatorSeries) else index)
    if index.size == 0:
        return []
    base = int(index[0])
    counts = np.zeros(int(index[-1]) - base + 1, dtype=int)
    for bursts in warnings_by_metric.values():
        inside = np.zeros_like(counts, dtype=bool)
        for b in bursts:
            inside[b.start_idx - base : b.end_idx - base + 1] = True
        counts += inside
    return [(int(i), state_for_count(int(counts[i - base]), ladder)) for i in index]


def build_report(
    subject_id: str,
    ind: IndicatorSeries,
    config: DetectionConfig | None = None,
) -> SubjectReport:
    cfg = config or DetectionConfig()
    by_metric = detect_all(ind, cfg)
    warnings = [b for m in METRICS for b in by_metric[m]]
    n = ind.series_length
    first, strongest = timing_summary(warnings, n)
    quarters, halves, early = partition_counts(warnings, n)
    return SubjectReport(
        subject_id=subject_id,
        series_length=n,
        detected=bool(warnings),
        warnings=warnings,
        total_warning_points=sum(b.n_points for b in warnings),
        metrics_flagged=sum(1 for m in METRICS if by_metric[m]),
        first_detection_prop=first,
        strongest=strongest,
        signal_spread=signal_spread(warnings, n),
        signal_density=signal_density(warnings),
        quarter_counts=quarters,
        half_counts=halves,
        early_only=early,
        per_metric_counts={m: sum(b.n_points for b in by_metric[m]) for m in METRICS},
        states=classify_states(ind.index, by_metric, cfg.state_ladder),
    )


# --- cohort aggregation -----------------------------------------------------


def _mean_median(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return {"mean": None, "median": None}
    return {"mean": statistics.fmean(vals), "median": statistics.median(vals)}


@dataclass
class CohortSummary:
    n_subjects: int
    n_detected: int
    detection_rate_pct: float
    total_warning_points: int
    warnings_per_subject: dict
    metrics_flagged: dict
    per_metric: dict
    timing: dict
    half_totals: tuple[int, int]
    quarter_totals: tuple[int, int, int, int]
    n_early_only: int
    early_only_pct: float


def cohort_aggregate(reports: Sequence[SubjectReport]) -> CohortSummary:
    """Fold per-subject reports into cohort-level detection statistics.

    Warning counts are averaged over all subjects; timing measures and the
    number of flagged metrics over detected subjects only; each metric's
    mean count over the subjects that metric flagged.
    """
    if not reports:
        raise ValueError("cohort_aggregate needs at least one report")
    n = len(reports)
    detected = [r for r in reports if r.detected]
    totals = [r.total_warning_points for r in reports]

    per_metric = {}
    for m in METRICS:
        counts = [r.per_metric_counts.get(m, 0) for r in reports]
        flagged = [c for c in counts if c > 0]
        per_metric[m] = {
            "detection_rate_pct": 100.0 * len(flagged) / n,
            "mean_count": statistics.fmean(flagged) if flagged else None,
        }

    def strongest_attr(name):
        return [getattr(r.strongest, name) for r in detected]

    timing = {
        "first_detection_prop": _mean_median(r.first_detection_prop for r in detected),
        "strongest_start_prop": _mean_median(strongest_attr("start_prop")),
        "strongest_median_prop": _mean_median(strongest_attr("median_prop")),
        "strongest_end_prop": _mean_median(strongest_attr("end_prop")),
        "signal_density": _mean_median(r.signal_density for r in detected),
        "signal_spread": _mean_median(r.signal_spread for r in detected),
    }
    flagged_counts = [r.metrics_flagged for r in detected]
    mf = _mean_median(flagged_counts)
    mf["sd"] = statistics.stdev(flagged_counts) if len(flagged_counts) > 1 else None

    halves = tuple(sum(r.half_counts[i] for r in reports) for i in range(2))
    quarters = tuple(sum(r.quarter_counts[i] for r in reports) for i in range(4))
    n_early = sum(1 for r in reports if r.early_only)
    return CohortSummary(
        n_subjects=n,
        n_detected=len(detected),
        detection_rate_pct=100.0 * len(detected) / n,
        total_warning_points=sum(totals),
        warnings_per_subject={
            **_mean_median(totals),
            "min": min(totals),
            "max": max(totals),
        },
        metrics_flagged=mf,
        per_metric=per_metric,
        timing=timing,
        half_totals=halves,
        quarter_totals=quarters,
        n_early_only=n_early,
        early_only_pct=100.0 * n_early / n,
    )
