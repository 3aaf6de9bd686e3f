"""Ingestion of scored attempts and construction of per-subject series.

Every attempt score is centred on the mean score of its item across the
whole ingested corpus (``rel_score = score - item_mean``), so a subject's
series measures performance relative to item difficulty.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

REQUIRED_COLUMNS = ("subject_id", "item_id", "score", "seq")
OPTIONAL_COLUMNS = ("timestamp",)

DEFAULT_MIN_LENGTH = 60

# ~10 years; anything longer for a single attempt is not a plausible duration
MAX_PLAUSIBLE_SECONDS = 10 * 365 * 24 * 3600


class IngestionError(ValueError):
    """Raised for malformed or inconsistent input data."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(message)


class EmptyCorpusError(IngestionError):
    """Raised when an operation needs at least one record and got none."""


class DataQualityWarning(UserWarning):
    """Suspicious but non-fatal values (e.g. negative timestamps)."""


@dataclass(frozen=True)
class AttemptRecord:
    subject_id: str
    item_id: str
    score: float
    seq: int
    timestamp: int | None = None


@dataclass(frozen=True)
class ItemStats:
    item_id: str
    mean_score: float
    n: int


@dataclass
class SubjectSeries:
    """Ordered rel_score values of one subject.

    ``too_short`` marks series below the configured minimum length; such
    series are kept so callers can report them instead of losing them.
    """

    subject_id: str
    values: np.ndarray
    seq: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    too_short: bool = False

    @property
    def length(self) -> int:
        return int(self.values.shape[0])


def _check_score(score: float, row: int | None = None) -> None:
    if not (0.0 <= score <= 1.0):
        where = f" at row {row}" if row is not None else ""
        raise IngestionError(f"score {score!r}{where} outside [0, 1]", row=row)


def _check_timestamp(ts: int, row: int) -> None:
    if ts < 0 or ts > MAX_PLAUSIBLE_SECONDS:
        warnings.warn(
            f"row {row}: implausible timestamp {ts} (ignored for analysis)",
            DataQualityWarning,
            stacklevel=3,
        )


def parse_records(
    source: str | Path | io.TextIOBase, *, check_range: bool = True
) -> list[AttemptRecord]:
    """Parse attempt records from a CSV file path or open text stream.

    Rows are numbered from 1 for the first data line after the header.
    ``check_range=False`` accepts scores outside [0, 1], which is only
    meaningful for pre-centred input such as simulator output.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return parse_records(fh, check_range=check_range)

    reader = csv.reader(source)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise EmptyCorpusError("input has no header line") from None
    if header and header[0].startswith("﻿"):
        header[0] = header[0][1:]
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise IngestionError(f"header is missing required columns: {', '.join(missing)}")
    unknown = [c for c in header if c not in REQUIRED_COLUMNS + OPTIONAL_COLUMNS]
    if unknown:
        raise IngestionError(f"header has unknown columns: {', '.join(unknown)}")
    pos = {name: header.index(name) for name in header}
    has_ts = "timestamp" in pos

    records = []
    for row_no, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise IngestionError(
                f"row {row_no}: expected {len(header)} fields, got {len(row)}", row=row_no
            )
        subject = row[pos["subject_id"]].strip()
        item = row[pos["item_id"]].strip()
        if not subject or not item:
            raise IngestionError(f"row {row_no}: empty subject_id or item_id", row=row_no)
        try:
            score = float(row[pos["score"]])
        except ValueError:
            raise IngestionError(
                f"row {row_no}: score {row[pos['score']]!r} is not a number", row=row_no
            ) from None
        if not math.isfinite(score):
            raise IngestionError(f"row {row_no}: score is not finite", row=row_no)
        if check_range:
            _check_score(score, row_no)
        try:
            seq = int(row[pos["seq"]])
        except ValueError:
            raise IngestionError(
                f"row {row_no}: seq {row[pos['seq']]!r} is not an integer", row=row_no
            ) from None
        if seq < 0:
            raise IngestionError(f"row {row_no}: seq {seq} is negative", row=row_no)
        ts = None
        if has_ts and row[pos["timestamp"]].strip():
            try:
                ts = int(row[pos["timestamp"]])
            except ValueError:
                raise IngestionError(
                    f"row {row_no}: timestamp {row[pos['timestamp']]!r} is not an integer",
                    row=row_no,
                ) from None
            _check_timestamp(ts, row_no)
        records.append(AttemptRecord(subject, item, score, seq, ts))
    return records


def compute_item_means(records: Iterable[AttemptRecord]) -> dict[str, ItemStats]:
    """Mean score per item over every record in the corpus.

    Sums use ``math.fsum`` so the result does not depend on record order.
    """
    scores: dict[str, list[float]] = {}
    for rec in records:
        _check_score(rec.score)
        scores.setdefault(rec.item_id, []).append(rec.score)
    if not scores:
        raise EmptyCorpusError("cannot compute item means of an empty corpus")
    return {
        item: ItemStats(item, math.fsum(vals) / len(vals), len(vals))
        for item, vals in scores.items()
    }


def relative_score(x: float, item_mean: float) -> float:
    """Score relative to the item's mean: positive means above average."""
    return x - item_mean


def build_series(
    records: Sequence[AttemptRecord],
    item_stats: dict[str, ItemStats] | None,
    min_length: int = DEFAULT_MIN_LENGTH,
) -> list[SubjectSeries]:
    """Group records by subject, centre them and order by ``seq``.

    Passing ``item_stats=None`` treats every item mean as 0, i.e. the
    scores are already relative (simulator output).

    Returns one series per subject, sorted by subject id.
    """
    by_subject: dict[str, list[tuple[int, float]]] = {}
    for row_no, rec in enumerate(records, start=1):
        if item_stats is None:
            value = rec.score
        else:
            stats = item_stats.get(rec.item_id)
            if stats is None:
                raise IngestionError(
                    f"record {row_no} (subject {rec.subject_id!r}, seq {rec.seq}): "
                    f"unknown item_id {rec.item_id!r}",
                    row=row_no,
                )
            value = relative_score(rec.score, stats.mean_score)
        by_subject.setdefault(rec.subject_id, []).append((rec.seq, value))

    out = []
    for subject in sorted(by_subject):
        pairs = sorted(by_subject[subject], key=lambda p: p[0])
        seqs = np.array([p[0] for p in pairs], dtype=np.int64)
        dup = np.flatnonzero(np.diff(seqs) == 0)
        if dup.size:
            raise IngestionError(
                f"subject {subject!r}: duplicate seq {int(seqs[dup[0]])}"
            )
        values = np.array([p[1] for p in pairs], dtype=float)
        out.append(
            SubjectSeries(subject, values, seqs, too_short=values.size < min_length)
        )
    return out


def load_series(
    path: str | Path,
    *,
    precentered: bool = False,
    min_length: int = DEFAULT_MIN_LENGTH,
) -> list[SubjectSeries]:
    """Parse a CSV corpus and return its per-subject series."""
    records = parse_records(path, check_range=not precentered)
    if not records:
        raise EmptyCorpusError(f"{path}: no data rows")
    stats = None if precentered else compute_item_means(records)
    return build_series(records, stats, min_length=min_length)
