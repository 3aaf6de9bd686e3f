"""Command-line interface.

Exit codes: 0 success, 2 data error, 3 series too short, 4 configuration
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import serialize
from .detection import CohortSummary, DetectionConfig, cohort_aggregate
from .indicators import SeriesTooShortError, WindowConfig
from .pipeline import analyze_series, resolve_workers, run_batch
from .preprocessing import DEFAULT_MIN_LENGTH, IngestionError, load_series
from .regime_shift import TABLE_COLUMNS, ShiftReport, shift_table
from .simulator import KINDS, SimConfig, SimConfigError, SimulationError, generate, run_benchmark

EXIT_OK = 0
EXIT_DATA = 2
EXIT_TOO_SHORT = 3
EXIT_CONFIG = 4


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _add_analysis_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window", type=int, default=50, help="first (minimum) window size")
    p.add_argument("--threshold", type=float, default=2.0, help="z threshold in SDs")
    p.add_argument("--min-run", type=int, default=2, help="consecutive points per burst")
    p.add_argument(
        "--baseline",
        choices=("expanding", "trailing50"),
        default="expanding",
        help="standardization baseline: all prior values or the last 50",
    )
    p.add_argument("--min-length", type=int, default=DEFAULT_MIN_LENGTH)
    p.add_argument(
        "--split",
        choices=("last_end", "first_start"),
        default="last_end",
        help="warning point used to split early-warning cases",
    )
    p.add_argument(
        "--precentered",
        action="store_true",
        help="scores are already relative (e.g. simulator output): skip item centring and range checks",
    )
    p.add_argument("--emit-indicators", action="store_true")


def _add_sim_flags(p: argparse.ArgumentParser, n_required: bool) -> None:
    d = SimConfig()
    p.add_argument("--kind", choices=KINDS, default=None)
    p.add_argument("--n", type=int, required=n_required, default=None if n_required else d.n)
    p.add_argument("--phi0", type=float, default=d.phi0)
    p.add_argument("--phi1", type=float, default=d.phi1)
    p.add_argument("--sigma", type=float, default=d.sigma)
    p.add_argument("--tip-prop", type=float, default=d.tip_prop)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="csdews", description="Early-warning signal detection for per-subject series.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    common = _Parser(add_help=False)
    common.add_argument("--print-config", action="store_true", help="print the resolved configuration and exit")

    p = sub.add_parser("analyze", parents=[common], help="analyse one subject")
    p.add_argument("--input", required=True)
    p.add_argument("--subject", required=True)
    p.add_argument("--out-dir")
    _add_analysis_flags(p)

    p = sub.add_parser("batch", parents=[common], help="analyse every subject of a corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: EWS_THREADS or 1)")
    _add_analysis_flags(p)

    p = sub.add_parser("simulate", parents=[common], help="write synthetic series as an input CSV")
    _add_sim_flags(p, n_required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=1, help="number of synthetic subjects")
    p.add_argument("--out-dir")

    p = sub.add_parser("bench", parents=[common], help="hit and false-positive rates on synthetic ensembles")
    _add_sim_flags(p, n_required=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--out-dir")
    _add_analysis_flags(p)

    p = sub.add_parser("report", parents=[common], help="re-aggregate a batch's reports.json")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir")
    return parser


def _configs(args):
    try:
        window = WindowConfig(
            min_window=args.window,
            baseline="trailing" if args.baseline == "trailing50" else "expanding",
            baseline_window=50,
        )
        detection = DetectionConfig(z_threshold=args.threshold, min_run=args.min_run)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return window, detection


def _sim_config(args, default_kind: str) -> SimConfig:
    cfg = SimConfig(
        kind=args.kind or default_kind,
        n=args.n,
        seed=args.seed,
        phi0=args.phi0,
        phi1=args.phi1,
        sigma=args.sigma,
        tip_prop=args.tip_prop,
    )
    try:
        cfg.validate()
    except SimConfigError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def resolved_config(args) -> dict:
    out = {"command": args.command}
    if args.command in ("analyze", "batch", "bench"):
        window, detection = _configs(args)
        out["window"] = asdict(window)
        out["detection"] = {
            "z_threshold": detection.z_threshold,
            "min_run": detection.min_run,
            "low_metrics": sorted(detection.low_metrics),
            "state_ladder": [[c, s.value] for c, s in detection.state_ladder],
        }
        out["min_length"] = args.min_length
        out["split"] = args.split
        out["precentered"] = args.precentered
        out["emit_indicators"] = args.emit_indicators
    if args.command == "batch":
        out["workers"] = resolve_workers(args.workers)
    if args.command in ("simulate", "bench"):
        out["sim"] = asdict(_sim_config(args, "stationary_ar1" if args.command == "simulate" else "ramped_ar1"))
        out["seed"] = args.seed
        out["runs"] = args.runs
    for key in ("input", "out_dir", "subject"):
        if getattr(args, key, None) is not None:
            out[key] = getattr(args, key)
    return out


def _out_dir(path) -> Path | None:
    if path is None:
        return None
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_indicators(out: Path, subject_id: str, series, ind, report) -> None:
    serialize.write_csv(out / f"{subject_id}_indicators.csv", serialize.INDICATOR_HEADER, serialize.indicator_rows(ind))
    serialize.write_csv(
        out / f"{subject_id}_plot.csv",
        serialize.PLOT_HEADER,
        serialize.plot_rows(series.values, ind, report.states),
    )


def cmd_analyze(args) -> int:
    window, detection = _configs(args)
    series = load_series(args.input, precentered=args.precentered, min_length=args.min_length)
    match = [s for s in series if s.subject_id == args.subject]
    if not match:
        raise IngestionError(f"subject {args.subject!r} not found in {args.input}")
    s = match[0]
    ind, report = analyze_series(s, window, detection, args.min_length)
    out = _out_dir(args.out_dir)
    if out is None:
        sys.stdout.write(serialize.dumps(report))
    else:
        serialize.write_json(report, out / f"{s.subject_id}_report.json")
    if args.emit_indicators:
        _write_indicators(out or Path("."), s.subject_id, s, ind, report)
    return EXIT_OK


def _write_table(path: Path, rows) -> None:
    serialize.write_csv(path, TABLE_COLUMNS, ([r[c] for c in TABLE_COLUMNS] for r in rows))


def cmd_batch(args) -> int:
    window, detection = _configs(args)
    series = load_series(args.input, precentered=args.precentered, min_length=args.min_length)
    result = run_batch(series, window, detection, args.min_length, args.split, args.workers)
    out = _out_dir(args.out_dir)
    serialize.write_json(result.reports, out / "reports.json")
    serialize.write_json(
        {"summary": result.summary, "errors": result.errors, "n_errors": len(result.errors)},
        out / "cohort_summary.json",
    )
    serialize.write_json(result.shift_reports, out / "shift_reports.json")
    _write_table(out / "shift_table.csv", result.table)
    serialize.write_csv(out / "bursts.csv", serialize.BURST_HEADER, serialize.burst_rows(result.reports))
    if args.emit_indicators:
        ind_dir = _out_dir(out / "indicators")
        by_id = {s.subject_id: s for s in series}
        for rep in result.reports:
            s = by_id[rep.subject_id]
            ind, rep2 = analyze_series(s, window, detection, args.min_length)
            _write_indicators(ind_dir, s.subject_id, s, ind, rep2)
    return EXIT_OK


def simulated_csv(cfg: SimConfig, runs: int) -> tuple[str, list[dict]]:
    """Synthetic corpus as input CSV text plus the ground truth per subject.

    Subject ``i`` uses seed ``cfg.seed + i``. Scores are the raw simulated
    values, so the corpus must be read with ``--precentered``.
    """
    width = max(4, len(str(runs - 1)))
    rows, truth = [], []
    for i in range(runs):
        run_cfg = replace(cfg, seed=cfg.seed + i)
        x, tip = generate(run_cfg)
        sid = f"sim{i:0{width}d}"
        truth.append({"subject_id": sid, "seed": run_cfg.seed, "kind": cfg.kind, "length": int(x.size), "tip_idx": tip})
        rows.extend((sid, f"{sid}_t{t}", float(v), t) for t, v in enumerate(x))
    return serialize.csv_text(("subject_id", "item_id", "score", "seq"), rows), truth


def cmd_simulate(args) -> int:
    if args.runs < 1:
        raise ConfigError("--runs must be >= 1")
    cfg = _sim_config(args, "stationary_ar1")
    text, truth = simulated_csv(cfg, args.runs)
    out = _out_dir(args.out_dir)
    if out is None:
        sys.stdout.write(text)
    else:
        (out / "simulated.csv").write_text(text, encoding="utf-8")
        serialize.write_json(truth, out / "ground_truth.json")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.runs < 1:
        raise ConfigError("--runs must be >= 1")
    window, detection = _configs(args)
    tipping = _sim_config(args, "ramped_ar1")
    if tipping.kind == "stationary_ar1":
        raise ConfigError("bench --kind must be a tipping generator (ramped_ar1 or fold_bifurcation)")
    null = SimConfig(kind="stationary_ar1", n=args.n, phi0=args.phi0, sigma=args.sigma)
    result = run_benchmark(window, detection, tipping, null, args.runs, args.seed)
    out = _out_dir(args.out_dir)
    if out is None:
        sys.stdout.write(serialize.dumps(result))
    else:
        serialize.write_json(result, out / "bench.json")
    return EXIT_OK


def _summary_text(summary: CohortSummary) -> str:
    lines = [
        f"subjects: {summary.n_subjects}  detected: {summary.n_detected} "
        f"({summary.detection_rate_pct:.1f}%)",
        f"warnings: {summary.total_warning_points} total, "
        f"halves {summary.half_totals[0]}/{summary.half_totals[1]}, "
        f"quarters {'/'.join(map(str, summary.quarter_totals))}",
        "",
        f"{'measure':<28}{'mean':>10}{'median':>10}",
    ]
    for name, mm in summary.timing.items():
        mean = "NA" if mm["mean"] is None else f"{mm['mean']:.3f}"
        med = "NA" if mm["median"] is None else f"{mm['median']:.3f}"
        lines.append(f"{name:<28}{mean:>10}{med:>10}")
    lines += ["", f"{'metric':<8}{'detection %':>14}{'mean count':>12}"]
    for m, v in summary.per_metric.items():
        mc = "NA" if v["mean_count"] is None else f"{v['mean_count']:.2f}"
        lines.append(f"{m:<8}{v['detection_rate_pct']:>14.1f}{mc:>12}")
    return "\n".join(lines) + "\n"


def cmd_report(args) -> int:
    path = Path(args.input)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        reports = [serialize.report_from_dict(d) for d in data]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise IngestionError(f"{path}: not a reports.json file ({exc})") from None
    if not reports:
        raise IngestionError(f"{path}: no reports")
    summary = cohort_aggregate(reports)
    out = _out_dir(args.out_dir)
    sys.stdout.write(_summary_text(summary))
    if out is not None:
        serialize.write_json({"summary": summary}, out / "cohort_summary.json")
        shifts_path = path.with_name("shift_reports.json")
        if shifts_path.exists():
            shifts = [ShiftReport(**d) for d in json.loads(shifts_path.read_text(encoding="utf-8"))]
            _write_table(out / "shift_table.csv", shift_table(shifts))
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "batch": cmd_batch,
    "simulate": cmd_simulate,
    "bench": cmd_bench,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise ConfigError("a command is required: " + ", ".join(COMMANDS))
        if args.print_config:
            sys.stdout.write(json.dumps(resolved_config(args), indent=2, sort_keys=True) + "\n")
            return EXIT_OK
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SeriesTooShortError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOO_SHORT
    except IngestionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
