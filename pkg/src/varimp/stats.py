"""Statistical primitives: chi-squared tests, quantiles, binning, correlation.

Thin validating layer over the numeric kernel.  P-values are carried as
``(p, log_p)`` pairs everywhere so extreme tails stay meaningful after the
linear value underflows.
"""

from dataclasses import dataclass
from math import ceil, log

import numpy as np

from . import _kernels
from .errors import ValidationError, ZeroVarianceError

# p = 0 is represented by this log-probability cap; the matching
# chi-squared(1) quantile is about 1392.3, keeping score sums finite
LOG_P_FLOOR = -700.0


@dataclass(frozen=True)
class TestResult:
    """Outcome of a contingency-table test."""

    statistic: float
    df: int
    p_value: float
    log_p: float


def chisq_test(counts) -> TestResult:
    """Pearson chi-squared independence test on a count table.

    Rows or columns with zero total are dropped before the degrees of
    freedom are computed; a degenerate table (df <= 0) reports statistic 0
    and p = 1.
    """
    arr = np.asarray(counts)
    if arr.ndim != 2 or arr.size == 0:
        raise ValidationError("contingency table must be a 2-D matrix")
    if np.any(arr < 0):
        raise ValidationError("contingency table counts must be non-negative")
    total = int(arr.sum())
    if total == 0:
        raise ValidationError("contingency table has zero total count")
    if arr.shape[0] != 2:
        # the kernel handles the 2-row case used by the tree tests; larger
        # tables reduce to it only after dropping empty rows
        reduced = arr[arr.sum(axis=1) > 0]
        if reduced.shape[0] > 2:
            raise ValidationError("only two-class tables are supported")
        if reduced.shape[0] < 2:
            pad = np.zeros((2 - reduced.shape[0], arr.shape[1]), dtype=np.intp)
            reduced = np.vstack([reduced, pad])
        arr = reduced
    stat, df, p, log_p = _kernels.chisq_counts_test(arr)
    return TestResult(float(stat), int(df), float(p), float(log_p))


def chisq_tail(statistic: float, df: int) -> tuple:
    """Upper-tail probability of chi-squared(df) as ``(p, log_p)``."""
    if statistic < 0:
        raise ValidationError("chi-squared statistic must be non-negative")
    if df < 1:
        raise ValidationError("degrees of freedom must be at least 1")
    return _kernels.chisq_tail(float(statistic), float(df))


def chisq1_quantile(p_value: float, log_p: float = None) -> float:
    """Upper quantile of chi-squared(1): q with P(X > q) = p_value.

    ``log_p`` extends precision for tiny p; p = 0 maps to the quantile at
    the log-probability cap (about 1392.3) rather than infinity.
    """
    if p_value < 0.0 or p_value > 1.0:
        raise ValidationError("p_value must lie in [0, 1]")
    if log_p is None:
        log_p = log(p_value) if p_value > 0.0 else LOG_P_FLOOR - 1.0
    return _kernels.chisq1_quantile(float(p_value), float(log_p))


def quantile_bins(values, m: int) -> np.ndarray:
    """Assign non-missing values to categories 1..m at sample quantiles.

    Boundary j is the ceil(j*n/m)-th order statistic of the non-missing
    values; ties at a boundary fall in the lower category.  Missing (NaN)
    entries receive 0, meaning no category.
    """
    if m not in (3, 4):
        raise ValidationError("m must be 3 or 4")
    vals = np.asarray(values, dtype=np.float64)
    if vals.ndim != 1:
        raise ValidationError("values must be one-dimensional")
    codes = _kernels.quantile_codes(vals, m)
    if codes.size == 0 or (codes == -1).all():
        raise ValidationError("all values are missing")
    return (codes + 1).astype(np.intp)


def empirical_quantile(xs, q: float) -> float:
    """The ceil(q*B)-th order statistic of xs (B = len(xs)); q=0 gives min.

    ``q*B`` is rounded at the 9th decimal before the ceiling so that exact
    rational quantiles (e.g. 0.9 of 10) are not pushed up by float dust.
    """
    arr = np.asarray(xs, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError("xs must be a non-empty vector")
    if q < 0.0 or q > 1.0:
        raise ValidationError("q must lie in [0, 1]")
    b = arr.size
    idx = ceil(round(q * b, 9))
    if idx < 1:
        idx = 1
    srt = np.sort(arr)
    return float(srt[idx - 1])


def pearson_corr(a, b) -> float:
    """Sample Pearson correlation of two equal-length vectors."""
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.ndim != 1 or bv.ndim != 1 or av.size != bv.size:
        raise ValidationError("inputs must be equal-length vectors")
    if av.size < 2:
        raise ValidationError("need at least two observations")
    ac = av - av.mean()
    bc = bv - bv.mean()
    denom = float(np.sqrt(np.dot(ac, ac) * np.dot(bc, bc)))
    if denom == 0.0:
        raise ZeroVarianceError("correlation undefined for zero-variance input")
    return float(np.dot(ac, bc) / denom)
