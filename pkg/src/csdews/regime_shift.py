"""Before/after comparison for subjects whose warnings all fall early.

The series is split at the warning point, the relative change in mean is
categorised by size, and a Welch two-sample t-test quantifies it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy import stats

from .detection import SubjectReport

CHANGE_EPS = 1e-8
MIN_SEGMENT = 5

SIZES = ("Small", "Medium", "Large", "Massive")
DIRECTIONS = ("Decrease", "Increase")

TABLE_COLUMNS = (
    "size",
    "direction",
    "total",
    "sig_05",
    "sig_05_pct",
    "sig_10",
    "sig_10_pct",
    "pct_of_total",
)


@dataclass(frozen=True)
class WelchResult:
    t_stat: float
    df: float
    p_value: float
    degenerate: bool = False

    @property
    def significant_05(self) -> bool:
        return not self.degenerate and self.p_value < 0.05

    @property
    def significant_10(self) -> bool:
        return not self.degenerate and self.p_value < 0.1


@dataclass
class ShiftReport:
    subject_id: str
    split_idx: int
    n_before: int
    n_after: int
    mean_before: float
    mean_after: float
    change_pct: float | None
    direction: str | None
    size: str | None
    t_stat: float | None
    df: float | None
    p_value: float | None
    significant_05: bool
    significant_10: bool
    status: str = "ok"  # ok | underpowered | undefined_change | degenerate_test


def select_early_cases(reports: Iterable[SubjectReport]) -> list[SubjectReport]:
    return [r for r in reports if r.detected and r.early_only]


def warning_point(report: SubjectReport, split: str = "last_end") -> int:
    if not report.warnings:
        raise ValueError(f"subject {report.subject_id!r} has no warnings")
    if split == "last_end":
        return max(b.end_idx for b in report.warnings)
    if split == "first_start":
        return min(b.start_idx for b in report.warnings)
    raise ValueError(f"unknown split convention {split!r}")


def partition_series(values, report: SubjectReport, split: str = "last_end"):
    """Split ``values`` into the part up to and including the warning point and the rest.

    Returns ``(before, after, split_idx, underpowered)``.
    """
    x = np.asarray(getattr(values, "values", values), dtype=float)
    k = warning_point(report, split)
    before, after = x[: k + 1], x[k + 1 :]
    underpowered = before.size < MIN_SEGMENT or after.size < MIN_SEGMENT
    return before, after, k, underpowered


def change_percent(mean_before: float, mean_after: float, eps: float = CHANGE_EPS) -> float | None:
    """Relative change of the mean in percent; ``None`` when the baseline is ~0."""
    if abs(mean_before) <= eps:
        return None
    return (mean_after - mean_before) / abs(mean_before) * 100.0


def size_category(change_pct: float) -> str:
    x = abs(change_pct)
    if x < 25:
        return "Small"
    if x < 100:
        return "Medium"
    if x < 1000:
        return "Large"
    return "Massive"


def welch_t_test(before, after) -> WelchResult:
    """Two-sided Welch t-test with Welch-Satterthwaite degrees of freedom.

    A segment with zero variance (or fewer than two points) makes the test
    degenerate; the result then carries ``nan`` statistics.
    """
    a = np.asarray(before, dtype=float)
    b = np.asarray(after, dtype=float)
    n1, n2 = a.size, b.size
    if n1 < 2 or n2 < 2:
        return WelchResult(math.nan, math.nan, math.nan, degenerate=True)
    # exact constancy check; var() of a constant can round to a tiny positive
    if np.ptp(a) == 0.0 or np.ptp(b) == 0.0:
        return WelchResult(math.nan, math.nan, math.nan, degenerate=True)
    v1 = a.var(ddof=1)
    v2 = b.var(ddof=1)
    q1, q2 = v1 / n1, v2 / n2
    se2 = q1 + q2
    t = (a.mean() - b.mean()) / math.sqrt(se2)
    df = se2 * se2 / (q1 * q1 / (n1 - 1) + q2 * q2 / (n2 - 1))
    p = min(1.0, 2.0 * float(stats.t.sf(abs(t), df)))
    return WelchResult(float(t), float(df), p)


def analyze_shift(
    values, report: SubjectReport, split: str = "last_end", eps: float = CHANGE_EPS
) -> ShiftReport:
    before, after, k, underpowered = partition_series(values, report, split)
    mb = float(before.mean()) if before.size else math.nan
    ma = float(after.mean()) if after.size else math.nan
    common = dict(
        subject_id=report.subject_id,
        split_idx=k,
        n_before=int(before.size),
        n_after=int(after.size),
        mean_before=mb,
        mean_after=ma,
    )
    blank = dict(
        change_pct=None, direction=None, size=None, t_stat=None, df=None, p_value=None,
        significant_05=False, significant_10=False,
    )
    if underpowered:
        return ShiftReport(**common, **blank, status="underpowered")
    pct = change_percent(mb, ma, eps)
    if pct is None:
        return ShiftReport(**common, **blank, status="undefined_change")
    test = welch_t_test(before, after)
    return ShiftReport(
        **common,
        change_pct=pct,
        direction="Increase" if pct > 0 else "Decrease",
        size=size_category(pct),
        t_stat=None if test.degenerate else test.t_stat,
        df=None if test.degenerate else test.df,
        p_value=None if test.degenerate else test.p_value,
        significant_05=test.significant_05,
        significant_10=test.significant_10,
        status="degenerate_test" if test.degenerate else "ok",
    )


def shift_table(shift_reports: Sequence[ShiftReport]) -> list[dict]:
    """Cross-tabulate categorised cases by size and direction.

    Every size/direction cell is present even when empty; a final ``Total``
    row covers all categorised cases. Cases without a size category
    (underpowered, undefined change) are not counted.
    """
    cases = [r for r in shift_reports if r.size is not None]
    total = len(cases)

    def pct(k, n):
        return 100.0 * k / n if n else 0.0

    def row(size, direction, members):
        n = len(members)
        s05 = sum(r.significant_05 for r in members)
        s10 = sum(r.significant_10 for r in members)
        return {
            "size": size,
            "direction": direction,
            "total": n,
            "sig_05": s05,
            "sig_05_pct": pct(s05, n),
            "sig_10": s10,
            "sig_10_pct": pct(s10, n),
            "pct_of_total": pct(n, total),
        }

    rows = [
        row(size, d, [r for r in cases if r.size == size and r.direction == d])
        for size in SIZES
        for d in DIRECTIONS
    ]
    rows.append(row("Total", "All", cases))
    return rows
