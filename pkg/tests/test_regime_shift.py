import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csdews.detection import SubjectReport, WarningBurst, partition_counts
from csdews.regime_shift import (
    DIRECTIONS,
    SIZES,
    TABLE_COLUMNS,
    analyze_shift,
    change_percent,
    partition_series,
    select_early_cases,
    shift_table,
    size_category,
    welch_t_test,
)

from oracles import welch_reference


def report(spans, length=200, sid="x"):
    bursts = [WarningBurst("sd", s, e, 0.0, 0.0, 0.0, e - s + 1, 3.0) for s, e in spans]
    q, h, early = partition_counts(bursts, length)
    return SubjectReport(
        sid, length, bool(bursts), bursts, sum(b.n_points for b in bursts), 1 if bursts else 0,
        None, None, 0.0, None, q, h, early,
    )


@pytest.mark.parametrize(
    "before, after, pct, size, direction",
    [
        (0.10, 0.30, 200.0, "Large", "Increase"),
        (-0.20, -0.10, 50.0, "Medium", "Increase"),
        (0.05, 0.75, 1400.0, "Massive", "Increase"),
        (0.40, 0.30, -25.0, "Medium", "Decrease"),
        (0.50, 0.45, -10.0, "Small", "Decrease"),
    ],
)
def test_change_examples(before, after, pct, size, direction):
    got = change_percent(before, after)
    assert got == pytest.approx(pct, rel=1e-12)
    assert size_category(got) == size
    assert ("Increase" if got > 0 else "Decrease") == direction


@pytest.mark.parametrize(
    "pct, size",
    [(0.0, "Small"), (24.999, "Small"), (25.0, "Medium"), (99.999, "Medium"), (100.0, "Large"),
     (999.999, "Large"), (1000.0, "Massive"), (-25.0, "Medium"), (-1000.0, "Massive")],
)
def test_size_boundaries_left_closed(pct, size):
    assert size_category(pct) == size


def test_change_undefined_near_zero_baseline():
    assert change_percent(0.0, 0.3) is None
    assert change_percent(5e-9, 0.3) is None
    assert change_percent(2e-8, 0.3) is not None


def test_welch_against_reference():
    rng = np.random.default_rng(17)
    for _ in range(50):
        n1, n2 = rng.integers(5, 150, 2)
        a = rng.normal(0.0, rng.uniform(0.1, 2), n1)
        b = rng.normal(rng.uniform(-1, 1), rng.uniform(0.1, 2), n2)
        got = welch_t_test(a, b)
        t, df, p = welch_reference(list(a), list(b))
        assert got.t_stat == pytest.approx(t, rel=1e-9)
        assert got.df == pytest.approx(df, rel=1e-9)
        assert abs(got.p_value - p) < 1e-6


def test_welch_identical_segments():
    a = np.random.default_rng(1).normal(size=40)
    res = welch_t_test(a, a.copy())
    assert res.t_stat == 0.0 and res.p_value == 1.0


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.integers(-100, 100), min_size=3, max_size=40).filter(lambda v: len(set(v)) > 1),
    st.lists(st.integers(-100, 100), min_size=3, max_size=40).filter(lambda v: len(set(v)) > 1),
)
def test_welch_swap_symmetry(a, b):
    a, b = np.array(a) / 10, np.array(b) / 10
    ab, ba = welch_t_test(a, b), welch_t_test(b, a)
    assert ab.t_stat == pytest.approx(-ba.t_stat, abs=1e-12)
    assert ab.df == pytest.approx(ba.df, rel=1e-12)
    assert ab.p_value == pytest.approx(ba.p_value, abs=1e-12)
    assert 0.0 <= ab.p_value <= 1.0


def test_welch_degenerate_cases():
    assert welch_t_test([1.0] * 10, [0.0, 1.0, 2.0]).degenerate
    assert welch_t_test([1.0], [0.0, 1.0, 2.0]).degenerate
    res = welch_t_test([1.0, 1.0, 1.0], [2.0, 2.0])
    assert res.degenerate and math.isnan(res.p_value)
    assert not res.significant_05 and not res.significant_10


def test_welch_power_on_large_shift():
    hits = 0
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        hits += welch_t_test(rng.normal(0, 1, 100), rng.normal(1, 1, 100)).p_value < 1e-3
    assert hits >= 990


def test_welch_uniform_p_under_null():
    ps = [welch_t_test(*np.random.default_rng(s).normal(size=(2, 30))).p_value for s in range(2000)]
    assert abs(np.mean(np.array(ps) < 0.05) - 0.05) < 0.015


def test_partition_examples():
    x = np.arange(200, dtype=float)
    before, after, k, under = partition_series(x, report([(60, 62), (78, 80)]))
    assert (k, before.size, after.size, under) == (80, 81, 119, False)
    np.testing.assert_array_equal(np.concatenate([before, after]), x)
    before, after, k, under = partition_series(x[:100], report([(95, 97)], 100))
    assert after.size == 2 and under
    before, after, k, _ = partition_series(x, report([(60, 62), (78, 80)]), split="first_start")
    assert k == 60 and before.size == 61


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 198), st.integers(1, 5))
def test_partition_reassembles(start, width):
    x = np.random.default_rng(start).normal(size=200)
    end = min(start + width, 199)
    before, after, k, under = partition_series(x, report([(start, end)]))
    np.testing.assert_array_equal(np.concatenate([before, after]), x)
    assert before.size == end + 1
    assert under == (before.size < 5 or after.size < 5)


def test_analyze_shift_statuses():
    rng = np.random.default_rng(3)
    x = np.concatenate([rng.normal(0.2, 0.05, 81), rng.normal(0.6, 0.05, 119)])
    r = analyze_shift(x, report([(78, 80)]))
    assert r.status == "ok" and r.size == "Large" and r.direction == "Increase"
    assert r.significant_05 and r.significant_10 and r.p_value < 1e-10
    assert analyze_shift(x, report([(196, 197)])).status == "underpowered"
    z = np.concatenate([np.zeros(81), rng.normal(size=119)])
    assert analyze_shift(z, report([(78, 80)])).status == "undefined_change"
    c = np.concatenate([np.full(81, 0.2), rng.normal(size=119)])
    d = analyze_shift(c, report([(78, 80)]))
    assert d.status == "degenerate_test" and d.size is not None and d.p_value is None


def test_select_early_cases():
    early = report([(20, 30)], sid="e")
    late = report([(20, 30), (150, 151)], sid="l")
    none = report([], sid="n")
    assert [r.subject_id for r in select_early_cases([early, late, none])] == ["e"]


def test_shift_table_schema_and_accounting():
    rng = np.random.default_rng(11)
    shifts = []
    for i in range(60):
        mb = rng.uniform(0.05, 0.5) * rng.choice([-1, 1])
        ma = mb * rng.uniform(-20, 20)
        x = np.concatenate([rng.normal(mb, 0.1, 81), rng.normal(ma, 0.1, 119)])
        shifts.append(analyze_shift(x, report([(78, 80)], sid=f"s{i}")))
    shifts.append(analyze_shift(np.arange(200.0), report([(196, 197)])))
    table = shift_table(shifts)
    assert len(table) == 9
    assert all(tuple(r) == TABLE_COLUMNS for r in table)
    assert [(r["size"], r["direction"]) for r in table[:8]] == [(s, d) for s in SIZES for d in DIRECTIONS]
    total = table[-1]
    assert total["total"] == 60 == sum(r["total"] for r in table[:8])
    assert sum(r["pct_of_total"] for r in table[:8]) == pytest.approx(100.0)
    for r in table:
        assert r["sig_05"] <= r["sig_10"] <= r["total"]
        if r["total"]:
            assert r["sig_05_pct"] == pytest.approx(100 * r["sig_05"] / r["total"])


def test_shift_table_empty():
    table = shift_table([])
    assert len(table) == 9 and all(r["total"] == 0 and r["pct_of_total"] == 0.0 for r in table)
