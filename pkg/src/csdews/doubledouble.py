"""Vectorized double-double arithmetic on numpy arrays.

A value is a pair ``(hi, lo)`` of float64 arrays with ``hi = fl(hi + lo)``,
giving roughly 106 bits of precision. Only the handful of operations the
indicator engine needs are provided. The error-free transformations are the
classical ones (Knuth TwoSum, Dekker split/TwoProd), so no FMA is required.
"""

from __future__ import annotations

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1


def two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def _split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def add(ah, al, bh, bl):
    s, e = two_sum(ah, bh)
    t, f = two_sum(al, bl)
    s, e = _quick_two_sum(s, e + t)
    return _quick_two_sum(s, e + f)


def sub(ah, al, bh, bl):
    return add(ah, al, -bh, -bl)


def mul(ah, al, bh, bl):
    p, e = two_prod(ah, bh)
    return _quick_two_sum(p, e + (ah * bl + al * bh))


def mul_d(ah, al, b):
    p, e = two_prod(ah, b)
    return _quick_two_sum(p, e + al * b)


def div(ah, al, bh, bl):
    q1 = ah / bh
    rh, rl = sub(ah, al, *mul_d(bh, bl, q1))
    q2 = rh / bh
    rh, rl = sub(rh, rl, *mul_d(bh, bl, q2))
    q3 = rh / bh
    q1, q2 = _quick_two_sum(q1, q2)
    return add(q1, q2, q3, np.zeros_like(q3))


def div_d(ah, al, b):
    q1 = ah / b
    ph, pl = two_prod(q1, b)
    q2 = ((ah - ph) - pl + al) / b
    return _quick_two_sum(q1, q2)


def sqrt(ah, al):
    """Square root of a non-negative value; zero maps to zero."""
    x = np.sqrt(ah)
    with np.errstate(divide="ignore", invalid="ignore"):
        sh, sl = two_prod(x, x)
        rh, _ = sub(ah, al, sh, sl)
        corr = np.where(x > 0, rh / (2.0 * x), 0.0)
    return _quick_two_sum(x, corr)


def cumsum(hi, lo=None):
    """Prefix sums as double-double pairs.

    ``np.cumsum`` is sequential, so the exact error of each step is
    recoverable with TwoSum; the errors (and any low parts) are accumulated
    separately and folded back in.
    """
    s = np.cumsum(hi)
    err = np.zeros_like(s)
    if s.size > 1:
        a, b, t = s[:-1], hi[1:], s[1:]
        bv = t - a
        err[1:] = (a - (t - bv)) + (b - bv)
    if lo is not None:
        err = err + lo
    return two_sum(s, np.cumsum(err))


def where(cond, a, b):
    return np.where(cond, a[0], b[0]), np.where(cond, a[1], b[1])


def const(value, like):
    return np.full_like(like, value, dtype=float), np.zeros_like(like, dtype=float)
