"""Byte-stable JSON and CSV writers.

Floats are written with 17 significant digits so identical results give
identical bytes; undefined values become ``null`` in JSON and ``NA`` in CSV.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .detection import StateLabel, SubjectReport, WarningBurst
from .indicators import METRICS, IndicatorSeries

NA = "NA"


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def to_plain(obj: Any) -> Any:
    """Convert dataclasses, enums, tuples and numpy scalars to JSON-ready values."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(obj) else float(obj)
    return obj


def _encode(obj: Any, level: int, indent: int, out: list[str]) -> None:
    pad = " " * (indent * (level + 1))
    end_pad = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(fmt_float(obj) if math.isfinite(obj) else "null")
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(f"{pad}{json.dumps(k, ensure_ascii=False)}: ")
            _encode(v, level + 1, indent, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end_pad + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
        elif all(not isinstance(v, (dict, list)) for v in obj):
            out.append("[")
            for i, v in enumerate(obj):
                _encode(v, level + 1, indent, out)
                if i < len(obj) - 1:
                    out.append(", ")
            out.append("]")
        else:
            out.append("[\n")
            for i, v in enumerate(obj):
                out.append(pad)
                _encode(v, level + 1, indent, out)
                out.append(",\n" if i < len(obj) - 1 else "\n")
            out.append(end_pad + "]")
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    out: list[str] = []
    _encode(to_plain(obj), 0, indent, out)
    out.append("\n")
    return "".join(out)


def write_json(obj: Any, path: str | Path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def _cell(v) -> str:
    if v is None:
        return NA
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v) if math.isfinite(v) else NA
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path: str | Path, header, rows) -> None:
    Path(path).write_text(csv_text(header, rows), encoding="utf-8")


# --- specific layouts -------------------------------------------------------

INDICATOR_HEADER = ("index", "metric", "raw", "z")
BURST_HEADER = (
    "subject_id", "metric", "start_idx", "end_idx", "n_points",
    "start_prop", "median_prop", "end_prop",
)


def indicator_rows(ind: IndicatorSeries):
    for k, i in enumerate(ind.index):
        for m in METRICS:
            yield int(i), m, float(ind.raw[m][k]), float(ind.z[m][k])


def burst_rows(reports):
    for r in reports:
        for b in r.warnings:
            yield (r.subject_id, b.metric, b.start_idx, b.end_idx, b.n_points,
                   b.start_prop, b.median_prop, b.end_prop)


def plot_rows(values, ind: IndicatorSeries, states):
    """One row per series index: value, z per metric, state (``NA`` before the window)."""
    state_at = {i: s.value for i, s in states}
    offset = int(ind.index[0]) if ind.n_points else 0
    for i, v in enumerate(values):
        k = i - offset
        zs = [float(ind.z[m][k]) if 0 <= k < ind.n_points else None for m in METRICS]
        yield (i, float(v), *zs, state_at.get(i))


PLOT_HEADER = ("index", "value", *(f"{m}_z" for m in METRICS), "state")


def report_from_dict(d: dict):
    """Rebuild a :class:`SubjectReport` from its JSON form."""

    def burst(b):
        return None if b is None else WarningBurst(**b)

    return SubjectReport(
        subject_id=d["subject_id"],
        series_length=d["series_length"],
        detected=d["detected"],
        warnings=[burst(b) for b in d["warnings"]],
        total_warning_points=d["total_warning_points"],
        metrics_flagged=d["metrics_flagged"],
        first_detection_prop=d["first_detection_prop"],
        strongest=burst(d["strongest"]),
        signal_spread=d["signal_spread"],
        signal_density=d["signal_density"],
        quarter_counts=tuple(d["quarter_counts"]),
        half_counts=tuple(d["half_counts"]),
        early_only=d["early_only"],
        per_metric_counts=dict(d.get("per_metric_counts", {})),
        states=[(int(i), StateLabel(s)) for i, s in d.get("states", [])],
    )
