"""Repeated-measures ANOVA and paired t-test with in-house p-values.

The F and Student-t tails go through the regularised incomplete beta
function, evaluated with the modified Lentz continued fraction.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

_EPS = 1e-16
_TINY = 1e-300


def _betacf(a: float, b: float, x: float, max_iter: int = 500) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularised incomplete beta I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_sf(f: float, df1: float, df2: float) -> float:
    """Upper tail P(F > f)."""
    if f <= 0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f))


def t_sf_two_sided(t: float, df: float) -> float:
    if math.isinf(t):
        return 0.0
    return betainc(df / 2.0, 0.5, df / (df + t * t))


class AnovaResult(NamedTuple):
    f: float
    df: tuple[int, int]
    p: float
    ss_conditions: float
    ss_error: float


class TTestResult(NamedTuple):
    t: float
    df: int
    p: float
    mean_diff: float
    degenerate: bool = False


def rm_anova(data) -> AnovaResult:
    """One-way repeated-measures ANOVA on a subjects x conditions matrix."""
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise ValueError("data must be a 2-D subjects x conditions matrix")
    n, k = x.shape
    if n < 2 or k < 2:
        raise ValueError("need at least 2 subjects and 2 conditions")
    if not np.all(np.isfinite(x)):
        raise ValueError("missing or non-finite cells; drop incomplete subjects first")
    grand = x.mean()
    ss_cond = n * float(np.sum((x.mean(axis=0) - grand) ** 2))
    ss_total = float(np.sum((x - grand) ** 2))
    resid = x - x.mean(axis=1, keepdims=True) - x.mean(axis=0, keepdims=True) + grand
    ss_err = float(np.sum(resid ** 2))
    df1, df2 = k - 1, (k - 1) * (n - 1)
    ms_err = ss_err / df2
    # round-off guards relative to the total variation
    if ss_cond <= 1e-14 * ss_total or ss_total == 0.0:
        f = 0.0
    elif ss_err <= 1e-14 * ss_total:
        f = math.inf
    else:
        f = (ss_cond / df1) / ms_err
    return AnovaResult(f, (df1, df2), f_sf(f, df1, df2), ss_cond, ss_err)


def paired_ttest(a, b) -> TTestResult:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("a and b must be 1-D vectors of equal length")
    n = len(a)
    if n < 2:
        raise ValueError("need at least 2 pairs")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(math.nan, n - 1, 1.0, 0.0, True)
        return TTestResult(math.copysign(math.inf, mean), n - 1, 0.0, mean, True)
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t, n - 1, t_sf_two_sided(t, n - 1), mean)
