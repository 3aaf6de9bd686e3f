"""End-to-end analysis of one subject and of a whole corpus."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .detection import CohortSummary, DetectionConfig, SubjectReport, build_report, cohort_aggregate
from .indicators import IndicatorSeries, SeriesTooShortError, WindowConfig, expanding_indicators
from .preprocessing import DEFAULT_MIN_LENGTH, SubjectSeries
from .regime_shift import ShiftReport, analyze_shift, shift_table


def analyze_series(
    series: SubjectSeries,
    window: WindowConfig | None = None,
    detection: DetectionConfig | None = None,
    min_length: int = DEFAULT_MIN_LENGTH,
) -> tuple[IndicatorSeries, SubjectReport]:
    if series.length < min_length:
        raise SeriesTooShortError(
            f"subject {series.subject_id!r}: series length {series.length} "
            f"is below the minimum of {min_length}"
        )
    ind = expanding_indicators(series.values, window)
    return ind, build_report(series.subject_id, ind, detection)


@dataclass
class BatchResult:
    reports: list[SubjectReport]
    summary: CohortSummary | None
    shift_reports: list[ShiftReport]
    table: list[dict]
    errors: list[dict] = field(default_factory=list)


def _analyze_one(args):
    series, window, detection, min_length, split = args
    try:
        _, rep = analyze_series(series, window, detection, min_length)
    except SeriesTooShortError as exc:
        return series.subject_id, None, None, {"error": "too_short", "message": str(exc)}
    except (ValueError, ArithmeticError) as exc:
        return series.subject_id, None, None, {"error": type(exc).__name__, "message": str(exc)}
    shift = None
    if rep.detected and rep.early_only:
        shift = analyze_shift(series.values, rep, split)
    return series.subject_id, rep, shift, None


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get("EWS_THREADS")
        workers = int(env) if env else 1
    return max(1, workers)


def run_batch(
    series: Sequence[SubjectSeries],
    window: WindowConfig | None = None,
    detection: DetectionConfig | None = None,
    min_length: int = DEFAULT_MIN_LENGTH,
    split: str = "last_end",
    workers: int | None = None,
) -> BatchResult:
    """Analyse every subject; failures are collected, never raised.

    Output order is by subject id whatever the worker count.
    """
    window = window or WindowConfig()
    detection = detection or DetectionConfig()
    ordered = sorted(series, key=lambda s: s.subject_id)
    jobs = [(s, window, detection, min_length, split) for s in ordered]
    n_workers = resolve_workers(workers)
    if n_workers == 1 or len(jobs) < 2:
        results = [_analyze_one(j) for j in jobs]
    else:
        chunk = max(1, len(jobs) // (4 * n_workers))
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_analyze_one, jobs, chunksize=chunk))

    reports, shifts, errors = [], [], []
    for subject_id, rep, shift, err in results:
        if err is not None:
            errors.append({"subject_id": subject_id, **err})
            continue
        reports.append(rep)
        if shift is not None:
            shifts.append(shift)
    summary = cohort_aggregate(reports) if reports else None
    return BatchResult(reports, summary, shifts, shift_table(shifts), errors)

