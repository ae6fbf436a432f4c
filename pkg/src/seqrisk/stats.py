"""Welch's t-test and normal-approximation confidence intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import betainc


@dataclass(frozen=True)
class WelchResult:
    statistic: float
    df: float
    p_value: float


def sample_variance(values: Sequence[float]) -> float:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 2:
        raise ValueError("sample variance needs at least two values")
    return float(arr.var(ddof=1))


def mean_ci95(values: Sequence[float]) -> tuple[float, float]:
    """(mean, half-width) of the normal-approximation 95% interval,
    mean +/- 1.96 * s / sqrt(n)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 2:
        raise ValueError("CI needs at least two values")
    half = 1.96 * math.sqrt(sample_variance(arr) / arr.size)
    return float(arr.mean()), half


def student_t_sf2(t: float, df: float) -> float:
    """Two-sided tail probability P(|T| >= t) for Student's t.

    Uses the regularized incomplete beta identity
    P(|T| >= t) = I_{df/(df+t^2)}(df/2, 1/2).
    """
    if df <= 0:
        raise ValueError(f"df must be positive, got {df}")
    if t == 0.0:
        return 1.0
    x = df / (df + t * t)
    return float(betainc(df / 2.0, 0.5, x))


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> WelchResult:
    """Two-sided Welch t-test (unequal variances, Satterthwaite df).

    Degenerate inputs with zero variance on both sides resolve to p=1 when
    the means agree and p=0 otherwise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("welch_t_test needs at least two values per group")
    va, vb = sample_variance(a) / a.size, sample_variance(b) / b.size
    se2 = va + vb
    diff = float(a.mean() - b.mean())
    if se2 == 0.0:
        return WelchResult(
            statistic=0.0 if diff == 0.0 else math.copysign(math.inf, diff),
            df=float(a.size + b.size - 2),
            p_value=1.0 if diff == 0.0 else 0.0,
        )
    t = diff / math.sqrt(se2)
    df = se2 * se2 / (va * va / (a.size - 1) + vb * vb / (b.size - 1))
    return WelchResult(statistic=t, df=df, p_value=student_t_sf2(abs(t), df))
