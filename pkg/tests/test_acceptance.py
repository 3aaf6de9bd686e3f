"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline;
they are also repeated in the terminal summary.
"""

import time
from dataclasses import replace
from functools import lru_cache

import numpy as np

from csdews.cli import main, simulated_csv
from csdews.detection import DetectionConfig, detect_warnings
from csdews.indicators import METRICS, ar1_ols, expanding_indicators
from csdews.pipeline import run_batch
from csdews.preprocessing import load_series
from csdews.regime_shift import size_category, welch_t_test
from csdews.simulator import (
    SimConfig,
    SimulationError,
    ensemble_seeds,
    gen_fold_bifurcation,
    gen_ramped_ar1,
    gen_stationary_ar1,
    run_benchmark,
)

from oracles import (
    brute_force_runs,
    expanding_oracle,
    expanding_oracle_ext,
    welch_reference,
    zscore_oracle,
    zscore_oracle_ext,
)

MASTER_SEED = 20240601
RAMPED = SimConfig(kind="ramped_ar1", phi0=0.3, phi1=0.97, n=300, tip_prop=0.9, sigma=0.1)
NULL = SimConfig(kind="stationary_ar1", phi0=0.3, n=300, sigma=0.1)
FOLD = SimConfig(kind="fold_bifurcation")

# Frozen from the oracle run of criterion 5 (hit rate 1.0 at MASTER_SEED):
# the null ensemble may flag at most a third of that.
FPR_BOUND = 1.0 / 3.0


def _series_for_criterion_1():
    return [np.random.default_rng(1000 + s).uniform(-1, 1, 500) for s in range(50)]


@lru_cache(maxsize=None)
def _benchmark():
    return run_benchmark(tipping=RAMPED, null=NULL, n_runs=100, seed=MASTER_SEED)


def _fold_runs():
    runs = []
    for s in ensemble_seeds(MASTER_SEED + 7, 100)[0]:
        try:
            runs.append(gen_fold_bifurcation(replace(FOLD, seed=s)))
        except SimulationError:
            runs.append(None)
    return runs


def _max_abs_diff(got, ref):
    got = np.asarray(got, dtype=float)
    ref = np.asarray(ref, dtype=float)
    assert np.array_equal(np.isnan(got), np.isnan(ref))
    ok = ~np.isnan(ref)
    return float(np.max(np.abs(got[ok] - ref[ok]), initial=0.0))


def test_criterion_01_indicator_oracle(verdict):
    # Gated on a long-double recompute: at early, ill-conditioned z points the
    # float64 recompute carries ~1e-9 rounding noise of its own.
    data = _series_for_criterion_1()
    t0 = time.perf_counter()
    computed = [expanding_indicators(x) for x in data]
    elapsed = time.perf_counter() - t0
    worst = worst_f64 = 0.0
    for x, ind in zip(data, computed):
        ref = expanding_oracle_ext(x)
        ref64 = expanding_oracle(x)
        for m in METRICS:
            worst = max(worst, _max_abs_diff(ind.raw[m], ref[m]), _max_abs_diff(ind.z[m], zscore_oracle_ext(ref[m])))
            worst_f64 = max(
                worst_f64,
                _max_abs_diff(ind.raw[m], ref64[m]),
                _max_abs_diff(ind.z[m], zscore_oracle(ref64[m])),
            )
    ok = worst <= 1e-9 and elapsed < 10.0
    detail = f"max abs err {worst:.2e} vs long double, {worst_f64:.2e} vs float64 recompute, {elapsed:.2f}s"
    assert verdict(1, "indicator-oracle equivalence", ok, detail)


def test_criterion_02_ar1_consistency(verdict):
    within = 0
    for s in range(20):
        x = gen_stationary_ar1(SimConfig(kind="stationary_ar1", phi0=0.6, n=10_000, seed=s))
        final = expanding_indicators(x).raw["ar1"][-1]
        within += abs(final - 0.6) <= 0.05
    assert verdict(2, "AR(1) consistency", within >= 19, f"{within}/20 within 0.05")


def _all_acceptance_series():
    yield from _series_for_criterion_1()
    for s in range(20):
        yield gen_stationary_ar1(SimConfig(kind="stationary_ar1", phi0=0.6, n=10_000, seed=s))
    tip_seeds, null_seeds = ensemble_seeds(MASTER_SEED, 100)
    for s in tip_seeds:
        yield gen_ramped_ar1(replace(RAMPED, seed=s))[0]
    for s in null_seeds:
        yield gen_stationary_ar1(replace(NULL, seed=s))
    for run in _fold_runs():
        if run is not None:
            yield run[0]


def test_criterion_03_rr_identity(verdict):
    points = bad = 0
    for x in _all_acceptance_series():
        ind = expanding_indicators(x)
        a, r = ind.raw["ar1"], ind.raw["rr"]
        points += a.size
        bad += int(np.sum(~((r == 1.0 - a) | (np.isnan(a) & np.isnan(r)))))
    assert verdict(3, "RR identity", bad == 0, f"{points} points, {bad} mismatches")


def test_criterion_04_detection_completeness(verdict):
    rng = np.random.default_rng(MASTER_SEED)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(0, 120))
        z = rng.normal(0, 2, n)
        z[rng.random(n) < 0.05] = np.nan
        metric = METRICS[int(rng.integers(len(METRICS)))]
        cfg = DetectionConfig(z_threshold=float(rng.uniform(1, 3)), min_run=int(rng.integers(2, 6)))
        got = [(b.start_idx, b.end_idx) for b in detect_warnings(z, metric, cfg)]
        want = brute_force_runs(list(z), cfg.z_threshold, cfg.min_run, low=metric in cfg.low_metrics)
        mismatches += got != want
    assert verdict(4, "detection-rule completeness", mismatches == 0, f"{mismatches}/1000 tracks differ")


def test_criterion_05_tipping_detection(verdict):
    t0 = time.perf_counter()
    res = _benchmark()
    elapsed = time.perf_counter() - t0
    ok = res.hit_rate >= 0.90 and res.second_half_fraction >= 0.70 and elapsed < 60
    detail = f"hit rate {res.hit_rate:.2f}, second-half share {res.second_half_fraction:.3f}, {elapsed:.1f}s"
    assert verdict(5, "tipping detection", ok, detail)


def test_criterion_06_false_positive_control(verdict):
    res = _benchmark()
    ok = res.false_positive_rate <= FPR_BOUND
    detail = f"false-positive rate {res.false_positive_rate:.2f}, bound {FPR_BOUND:.3f}"
    assert verdict(6, "false-positive control", ok, detail)


def test_criterion_07_fold_signature(verdict):
    var_up = ar1_up = valid = 0
    for run in _fold_runs():
        if run is None:
            continue
        x, tip = run
        pre = x[:tip]
        third = pre.size // 3
        first, last = pre[:third], pre[-third:]
        valid += 1
        var_up += np.var(last, ddof=1) > np.var(first, ddof=1)
        ar1_up += ar1_ols(last) > ar1_ols(first)
    ok = valid == 100 and var_up >= 80 and ar1_up >= 80
    detail = f"variance up {var_up}/100, ar1 up {ar1_up}/100, {100 - valid} failed runs"
    assert verdict(7, "fold-SDE slowing-down signature", ok, detail)


def test_criterion_08_welch(verdict):
    rng = np.random.default_rng(MASTER_SEED + 8)
    worst = 0.0
    for _ in range(100):
        n1, n2 = rng.integers(5, 200, 2)
        a = rng.normal(rng.uniform(-1, 1), rng.uniform(0.05, 2), n1)
        b = rng.normal(rng.uniform(-1, 1), rng.uniform(0.05, 2), n2)
        got = welch_t_test(a, b)
        t, df, p = welch_reference(list(a), list(b))
        worst = max(worst, abs(got.t_stat - t), abs(got.df - df), abs(got.p_value - p))
    same = rng.normal(size=50)
    ident = welch_t_test(same, same.copy())
    ok = worst <= 1e-6 and ident.t_stat == 0.0 and ident.p_value == 1.0
    detail = f"max abs deviation {worst:.2e}; identical t={ident.t_stat}, p={ident.p_value}"
    assert verdict(8, "Welch test correctness", ok, detail)


def test_criterion_09_size_boundaries(verdict):
    values = [24.9, 25, 99.9, 100, 999.9, 1000]
    want = ["Small", "Medium", "Medium", "Large", "Large", "Massive"]
    got = [size_category(v) for v in values]
    assert verdict(9, "change-category boundaries", got == want, ", ".join(got))


def test_criterion_10_determinism(verdict, tmp_path):
    main(["simulate", "--kind", "ramped_ar1", "--n", "300", "--runs", "100", "--seed", str(MASTER_SEED),
          "--out-dir", str(tmp_path / "sim")])
    outputs = []
    for label, workers in (("a1", 1), ("a8", 8), ("b1", 1), ("b8", 8)):
        out = tmp_path / label
        code = main(["batch", "--input", str(tmp_path / "sim" / "simulated.csv"), "--out-dir", str(out),
                     "--precentered", "--emit-indicators", "--workers", str(workers)])
        assert code == 0
        outputs.append({p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()})
    ok = all(o == outputs[0] for o in outputs[1:])
    detail = f"{len(outputs[0])} files compared across 4 runs (1 and 8 workers, twice)"
    assert verdict(10, "byte-identical batch output", ok, detail)


def test_criterion_11_throughput(verdict, tmp_path):
    text, _ = simulated_csv(SimConfig(kind="ramped_ar1", n=200, seed=MASTER_SEED), 1000)
    path = tmp_path / "corpus.csv"
    path.write_text(text, encoding="utf-8")
    t0 = time.perf_counter()
    series = load_series(path, precentered=True)
    result = run_batch(series)
    elapsed = time.perf_counter() - t0
    ok = len(result.reports) == 1000 and elapsed < 10.0
    assert verdict(11, "throughput", ok, f"1000 x 200 in {elapsed:.2f}s")
