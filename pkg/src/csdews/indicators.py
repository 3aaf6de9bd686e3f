"""Expanding-window CSD indicators and their running standardization.

Six indicators are tracked: lag-1 autoregression (``ar1``), return rate
(``rr = 1 - ar1``), standard deviation, skewness, excess kurtosis and the
coefficient of variation. Each is evaluated on every prefix ``x[0..t]`` with
``t >= min_window - 1``; undefined values are ``nan``.

The scalar functions below operate on a single window and are what the
expanding engine must agree with. The engine itself works from prefix power
sums: data are shifted by the mean of the first window (which bounds the
cancellation in the central-moment expansions) and all sums are carried in
double-double precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import doubledouble as dd

METRICS = ("ar1", "rr", "sd", "skew", "kurt", "cv")

UNDEFINED = float("nan")
CV_EPS = 1e-8


class SeriesTooShortError(ValueError):
    """The series is shorter than the first evaluation window."""


@dataclass(frozen=True)
class WindowConfig:
    min_window: int = 50
    detrend: bool = True
    baseline: Literal["expanding", "trailing"] = "expanding"
    baseline_window: int = 50
    moments: Literal["population", "adjusted"] = "population"
    cv_eps: float = CV_EPS

    def __post_init__(self):
        if self.min_window < 10:
            raise ValueError(f"min_window must be >= 10, got {self.min_window}")
        if self.baseline not in ("expanding", "trailing"):
            raise ValueError(f"unknown baseline {self.baseline!r}")
        if self.baseline_window < 2:
            raise ValueError("baseline_window must be >= 2")
        if self.moments not in ("population", "adjusted"):
            raise ValueError(f"unknown moment convention {self.moments!r}")


@dataclass
class IndicatorSeries:
    """Index-aligned raw and standardized indicator tracks.

    ``index`` holds series positions (0-based) of the prefix end for each
    point; ``raw[m]`` and ``z[m]`` are arrays of the same length.
    """

    index: np.ndarray
    raw: dict[str, np.ndarray]
    z: dict[str, np.ndarray] = field(default_factory=dict)
    series_length: int = 0

    @property
    def n_points(self) -> int:
        return int(self.index.shape[0])


# --- single-window definitions ---------------------------------------------


def ar1_ols(window, demean: bool = True) -> float:
    """OLS lag-1 coefficient without intercept on the (demeaned) window.

    Returns ``nan`` for a constant window.
    """
    x = np.asarray(window, dtype=float)
    if x.size < 3:
        raise ValueError("ar1_ols needs at least 3 points")
    y = x - x.mean() if demean else x
    den = np.dot(y[:-1], y[:-1])
    if den == 0.0 or np.ptp(x) == 0.0:
        return UNDEFINED
    return float(np.dot(y[1:], y[:-1]) / den)


def return_rate(ar1: float) -> float:
    return 1.0 - ar1


def std_dev(window) -> float:
    x = np.asarray(window, dtype=float)
    if x.size < 3:
        raise ValueError("std_dev needs at least 3 points")
    return float(np.std(x, ddof=1))


def _central(x: np.ndarray, k: int) -> float:
    return float(np.mean((x - x.mean()) ** k))


def skewness(window, moments: str = "population") -> float:
    x = np.asarray(window, dtype=float)
    if x.size < 3:
        raise ValueError("skewness needs at least 3 points")
    m2 = _central(x, 2)
    if m2 == 0.0:
        return UNDEFINED
    g1 = _central(x, 3) / m2**1.5
    if moments == "adjusted":
        n = x.size
        g1 *= np.sqrt(n * (n - 1.0)) / (n - 2.0)
    return float(g1)


def kurtosis(window, moments: str = "population") -> float:
    """Excess kurtosis ``m4 / m2**2 - 3``."""
    x = np.asarray(window, dtype=float)
    if x.size < 4 and moments == "adjusted":
        raise ValueError("adjusted kurtosis needs at least 4 points")
    if x.size < 3:
        raise ValueError("kurtosis needs at least 3 points")
    m2 = _central(x, 2)
    if m2 == 0.0:
        return UNDEFINED
    g2 = _central(x, 4) / m2**2 - 3.0
    if moments == "adjusted":
        n = x.size
        g2 = ((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0))
    return float(g2)


def coeff_variation(window, eps: float = CV_EPS) -> float:
    x = np.asarray(window, dtype=float)
    if x.size < 3:
        raise ValueError("coeff_variation needs at least 3 points")
    mu = x.mean()
    sd = np.std(x, ddof=1)
    if sd == 0.0 or abs(mu) <= eps:
        return UNDEFINED
    return float(sd / mu)


# --- expanding engine -------------------------------------------------------


def _first_change(x: np.ndarray) -> int:
    """Index of the first value differing from ``x[0]`` (``len(x)`` if none)."""
    idx = np.flatnonzero(x != x[0])
    return int(idx[0]) if idx.size else int(x.size)


def compensated_cumsum(x: np.ndarray) -> np.ndarray:
    """Prefix sums rounded once from their double-double value."""
    return dd.cumsum(np.asarray(x, dtype=float))[0]


def _expanding_raw(x: np.ndarray, cfg: WindowConfig):
    """All six tracks as ``(values, low_parts)``.

    Everything is carried in double-double so that the z-scores, which can be
    very ill-conditioned at the first few points, are computed from values
    more accurate than their float64 rounding. ``values`` are the rounded
    tracks; ``low_parts`` the residuals.
    """
    w = cfg.min_window
    c = float(np.mean(x[:w]))
    u = dd.two_sum(x, np.full_like(x, -c))
    n = np.arange(w, x.size + 1, dtype=float)
    end = np.arange(w - 1, x.size)
    prev = end - 1

    sq = dd.mul(*u, *u)
    p1 = dd.cumsum(*u)
    p2 = dd.cumsum(*sq)
    p3 = dd.cumsum(*dd.mul(*sq, *u))
    p4 = dd.cumsum(*dd.mul(*sq, *sq))

    def at(p, i):
        return p[0][i], p[1][i]

    s1, s2, s3, s4 = at(p1, end), at(p2, end), at(p3, end), at(p4, end)
    m = dd.div_d(*s1, n)
    mm = dd.mul(*m, *m)
    # central sums from power sums about the shift
    c2 = dd.sub(*s2, *dd.mul(*m, *s1))
    c3 = dd.sub(*s3, *dd.mul_d(*dd.mul(*m, *s2), 3.0))
    c3 = dd.add(*c3, *dd.mul_d(*dd.mul(*mm, *s1), 3.0))
    c3 = dd.sub(*c3, *dd.mul_d(*dd.mul(*mm, *m), n))
    c4 = dd.sub(*s4, *dd.mul_d(*dd.mul(*m, *s3), 4.0))
    c4 = dd.add(*c4, *dd.mul_d(*dd.mul(*mm, *s2), 6.0))
    c4 = dd.sub(*c4, *dd.mul_d(*dd.mul(*mm, *mm), 3.0 * n))

    degenerate = end < _first_change(x)
    zero = dd.const(0.0, n)
    nan = dd.const(np.nan, n)
    c2 = dd.where(degenerate | (c2[0] <= 0), zero, c2)
    with np.errstate(divide="ignore", invalid="ignore"):
        if cfg.detrend:
            lagp = dd.mul(u[0][1:], u[1][1:], u[0][:-1], u[1][:-1])
            lag = dd.cumsum(np.concatenate(([0.0], lagp[0])), np.concatenate(([0.0], lagp[1])))
            edges = dd.add(u[0][0], u[1][0], u[0][end], u[1][end])
            inner = dd.sub(*dd.mul_d(*s1, 2.0), *edges)
            tail = dd.mul_d(*mm, n - 1.0)
            num = dd.add(*dd.sub(*at(lag, end), *dd.mul(*m, *inner)), *tail)
            den = dd.add(*dd.sub(*at(p2, prev), *dd.mul_d(*dd.mul(*m, *at(p1, prev)), 2.0)), *tail)
        else:
            # without demeaning the shift does not cancel; use the original data
            xp2 = dd.cumsum(*dd.two_prod(x, x))
            xl = dd.two_prod(x[1:], x[:-1])
            xlag = dd.cumsum(np.concatenate(([0.0], xl[0])), np.concatenate(([0.0], xl[1])))
            num, den = at(xlag, end), at(xp2, prev)
        ar1 = dd.where(degenerate | ~(den[0] > 0), nan, dd.div(*num, *den))

        sd = dd.sqrt(*dd.div_d(*c2, n - 1.0))
        m2 = dd.div_d(*c2, n)
        skew = dd.div(*dd.div_d(*c3, n), *dd.mul(*m2, *dd.sqrt(*m2)))
        kurt = dd.div(*dd.div_d(*c4, n), *dd.mul(*m2, *m2))
        kurt = dd.add(*kurt, *dd.const(-3.0, n))
        if cfg.moments == "adjusted":
            g = dd.div_d(*dd.sqrt(n * (n - 1.0), np.zeros_like(n)), n - 2.0)
            skew = dd.mul(*skew, *g)
            kurt = dd.add(*dd.mul_d(*kurt, n + 1.0), *dd.const(6.0, n))
            kurt = dd.div_d(*dd.mul_d(*kurt, n - 1.0), (n - 2.0) * (n - 3.0))
        skew = dd.where(degenerate, nan, skew)
        kurt = dd.where(degenerate, nan, kurt)
        mu = dd.div_d(*at(dd.cumsum(x), end), n)
        cv = dd.where(degenerate | (np.abs(mu[0]) <= cfg.cv_eps), nan, dd.div(*sd, *mu))

    # rr is emitted bit-exactly as 1 - ar1; its low part keeps the exact difference
    rr_hi = 1.0 - ar1[0]
    rr_lo = dd.sub(1.0, 0.0, *ar1)
    rr_lo = (rr_lo[0] - rr_hi) + rr_lo[1]
    tracks = {"ar1": ar1, "rr": (rr_hi, rr_lo), "sd": sd, "skew": skew, "kurt": kurt, "cv": cv}
    raw = {k: v[0] for k, v in tracks.items()}
    low = {k: np.where(np.isfinite(v[0]), v[1], 0.0) for k, v in tracks.items()}
    return raw, low


def standardize_stream(
    track,
    baseline: str = "expanding",
    baseline_window: int = 50,
    low=None,
) -> np.ndarray:
    """z-score each value against the mean and sample SD of prior values.

    Only strictly earlier *defined* values enter the baseline: all of them
    (``"expanding"``) or the most recent ``baseline_window`` of them
    (``"trailing"``). At least two prior values and a nonzero prior SD are
    required, otherwise the z value is ``nan``. ``low`` optionally carries
    the residuals of a double-double track.
    """
    raw = np.asarray(track, dtype=float)
    z = np.full(raw.shape, np.nan)
    ok = np.flatnonzero(np.isfinite(raw))
    if ok.size < 3:
        return z
    vh = raw[ok]
    vl = np.zeros_like(vh) if low is None else np.asarray(low, dtype=float)[ok]
    # shifting by the first value keeps the sums small and the result
    # translation invariant to rounding level
    u = dd.sub(vh, vl, np.full_like(vh, vh[0]), np.full_like(vh, vl[0]))
    zero = np.zeros(1)
    uh, ul = u
    p1 = dd.cumsum(np.concatenate((zero, uh)), np.concatenate((zero, ul)))
    sq = dd.mul(uh, ul, uh, ul)
    p2 = dd.cumsum(np.concatenate((zero, sq[0])), np.concatenate((zero, sq[1])))
    k = np.arange(vh.size)
    if baseline == "expanding":
        lo = np.zeros(vh.size, dtype=int)
    elif baseline == "trailing":
        lo = np.maximum(k - baseline_window, 0)
    else:
        raise ValueError(f"unknown baseline {baseline!r}")
    cnt = (k - lo).astype(float)
    s1 = dd.sub(p1[0][k], p1[1][k], p1[0][lo], p1[1][lo])
    s2 = dd.sub(p2[0][k], p2[1][k], p2[0][lo], p2[1][lo])
    with np.errstate(divide="ignore", invalid="ignore"):
        mean = dd.div_d(*s1, cnt)
        var = dd.div_d(*dd.sub(*s2, *dd.mul(*mean, *s1)), cnt - 1.0)
        # differences of prefix sums are not exactly zero on constant stretches
        changed = np.concatenate(([False], (uh[1:] != uh[:-1]) | (ul[1:] != ul[:-1])))
        last_change = np.maximum.accumulate(np.where(changed, k, 0))
        constant = (last_change[np.maximum(k - 1, 0)] <= lo) | ~(var[0] > 0)
        var = dd.where(constant, (np.zeros_like(cnt), np.zeros_like(cnt)), var)
        sd = dd.sqrt(*var)
        zz = dd.div(*dd.sub(uh, ul, *mean), *sd)[0]
    valid = (cnt >= 2) & (sd[0] > 0)
    z[ok] = np.where(valid, zz, np.nan)
    return z


def expanding_indicators(series, config: WindowConfig | None = None) -> IndicatorSeries:
    """Compute all six indicator tracks and their z-scores for a series.

    ``series`` may be a :class:`~csdews.preprocessing.SubjectSeries` or any
    1-D array of values.
    """
    cfg = config or WindowConfig()
    values = getattr(series, "values", series)
    x = np.asarray(values, dtype=float)
    if x.ndim != 1:
        raise ValueError("series must be one-dimensional")
    if x.size < cfg.min_window:
        raise SeriesTooShortError(
            f"series of length {x.size} is shorter than the window ({cfg.min_window})"
        )
    raw, low = _expanding_raw(x, cfg)
    z = {
        m: standardize_stream(raw[m], cfg.baseline, cfg.baseline_window, low[m])
        for m in METRICS
    }
    index = np.arange(cfg.min_window - 1, x.size)
    return IndicatorSeries(index=index, raw=raw, z=z, series_length=int(x.size))
