"""Numeric kernel shared by the compiled and interpreted backends.

This module is written in Cython pure-Python mode: ``setup.py`` compiles it
to a C extension, and the identical source runs under plain CPython when the
extension is unavailable.  Everything here is deliberately free of numpy
*vector* arithmetic; loops are explicit and sequential so that both backends
execute the same floating-point operations in the same order and produce
bit-identical results.

For the same reason the special functions (log-gamma, regularized upper
incomplete gamma, inverse normal) are implemented here rather than taken from
``math``/``scipy``: CPython's ``math.lgamma`` is not a thin libm wrapper, so
calling it interpreted and ``libc`` compiled could diverge in the last ulp.
The test suite checks these primitives against scipy independently.

Layout conventions used throughout:

* a tree is grown over an index array ``rows``; every node owns the
  contiguous segment ``rows[start:end]`` and splitting reorders indices only
  within the parent's segment, so the segments of *all* nodes stay valid in
  the final array;
* missing values are NaN in the feature matrix; categorical columns hold
  non-negative level codes as doubles, ``nlev[k]`` of them;
* p-values travel as ``(p, log_p)`` pairs so that far-tail values survive
  underflow of the linear representation.
"""

import cython
import numpy as np
from cython.cimports.libc.math import exp, fabs, isnan, log, log1p, sqrt

LN2 = cython.declare(cython.double, 0.6931471805599453)
HALF_LN_2PI = cython.declare(cython.double, 0.9189385332046727)
LOG_P_FLOOR = cython.declare(cython.double, -700.0)
GAIN_FLOOR_REL = cython.declare(cython.double, 1e-12)
EXHAUSTIVE_MAX_LEVELS = cython.declare(cython.Py_ssize_t, 12)


def is_compiled() -> bool:
    """True when running as the C extension, False when interpreted."""
    return cython.compiled


# ---------------------------------------------------------------------------
# scalar special functions
# ---------------------------------------------------------------------------

@cython.cfunc
@cython.exceptval(check=False)
def _log_gamma(z: cython.double) -> cython.double:
    # Lanczos approximation, g=7, n=9; relative error below 1e-13 for z>0.
    s: cython.double
    t: cython.double
    if z < 0.5:
        # reflection is never needed by callers (arguments are >= 0.5),
        # but keep the function total for direct use in tests
        return log(3.141592653589793 / _sinpi(z)) - _log_gamma(1.0 - z)
    z = z - 1.0
    s = 0.99999999999980993
    s += 676.5203681218851 / (z + 1.0)
    s += -1259.1392167224028 / (z + 2.0)
    s += 771.32342877765313 / (z + 3.0)
    s += -176.61502916214059 / (z + 4.0)
    s += 12.507343278686905 / (z + 5.0)
    s += -0.13857109526572012 / (z + 6.0)
    s += 9.9843695780195716e-6 / (z + 7.0)
    s += 1.5056327351493116e-7 / (z + 8.0)
    t = z + 7.5
    return HALF_LN_2PI + (z + 0.5) * log(t) - t + log(s)


@cython.cfunc
@cython.exceptval(check=False)
def _sinpi(x: cython.double) -> cython.double:
    # sin(pi*x) for 0 < x < 0.5, accurate enough for the reflection branch
    pi: cython.double = 3.141592653589793
    n: cython.double = x - 2.0 * _floor_half(x)
    s: cython.double
    if n < 0.5:
        s = _sin_taylor(pi * n)
    elif n < 1.0:
        s = _sin_taylor(pi * (1.0 - n))
    elif n < 1.5:
        s = -_sin_taylor(pi * (n - 1.0))
    else:
        s = -_sin_taylor(pi * (2.0 - n))
    return s


@cython.cfunc
@cython.exceptval(check=False)
def _floor_half(x: cython.double) -> cython.double:
    h: cython.double = 0.5 * x
    f: cython.double = cython.cast(cython.double, cython.cast(cython.longlong, h))
    if f > h:
        f -= 1.0
    return f


@cython.cfunc
@cython.exceptval(check=False)
def _sin_taylor(x: cython.double) -> cython.double:
    # |x| <= pi/2 after range reduction
    x2: cython.double = x * x
    term: cython.double = x
    acc: cython.double = x
    k: cython.Py_ssize_t
    for k in range(1, 12):
        term *= -x2 / cython.cast(cython.double, (2 * k) * (2 * k + 1))
        acc += term
    return acc


def log_gamma(z: float) -> float:
    """Natural log of the gamma function for z > 0."""
    return _log_gamma(z)


@cython.cfunc
def _gamma_q(a: cython.double, x: cython.double) -> tuple:
    """Regularized upper incomplete gamma Q(a, x) as ``(q, log_q)``.

    Series expansion of P for x < a+1, Lentz continued fraction for Q
    otherwise; the continued-fraction branch is evaluated in log space so
    the pair stays meaningful long after ``q`` underflows to 0.0.
    """
    ap: cython.double
    ssum: cython.double
    delt: cython.double
    logp: cython.double
    p: cython.double
    q: cython.double
    logq: cython.double
    b: cython.double
    c: cython.double
    d: cython.double
    h: cython.double
    an: cython.double
    delv: cython.double
    i: cython.Py_ssize_t

    if x <= 0.0:
        return 1.0, 0.0
    if x < a + 1.0:
        ap = a
        ssum = 1.0 / a
        delt = ssum
        for i in range(500):
            ap += 1.0
            delt *= x / ap
            ssum += delt
            if fabs(delt) < fabs(ssum) * 1e-16:
                break
        logp = -x + a * log(x) - _log_gamma(a) + log(ssum)
        if logp > 0.0:
            logp = 0.0
        p = exp(logp)
        q = 1.0 - p
        if q <= 0.0:
            return 0.0, LOG_P_FLOOR
        logq = log1p(-p)
        return q, logq
    b = x + 1.0 - a
    c = 1e300
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -cython.cast(cython.double, i) * (cython.cast(cython.double, i) - a)
        b += 2.0
        d = an * d + b
        if fabs(d) < 1e-300:
            d = 1e-300
        c = b + an / c
        if fabs(c) < 1e-300:
            c = 1e-300
        d = 1.0 / d
        delv = d * c
        h *= delv
        if fabs(delv - 1.0) < 1e-15:
            break
    logq = -x + a * log(x) - _log_gamma(a) + log(h)
    if logq > 0.0:
        logq = 0.0
    q = exp(logq)
    if q > 1.0:
        q = 1.0
    return q, logq


def gamma_q(a: float, x: float) -> tuple:
    """Public wrapper over the regularized upper incomplete gamma."""
    return _gamma_q(a, x)


@cython.cfunc
def _chisq_tail(stat: cython.double, df: cython.double) -> tuple:
    if stat <= 0.0:
        return 1.0, 0.0
    return _gamma_q(0.5 * df, 0.5 * stat)


def chisq_tail(stat: float, df: float) -> tuple:
    """Upper-tail probability of the chi-squared distribution, with log."""
    return _chisq_tail(stat, df)


@cython.cfunc
@cython.exceptval(check=False)
def _norm_upper_quantile(p: cython.double, log_p: cython.double) -> cython.double:
    """z >= 0 with upper-tail probability p (p <= 0.5), AS 241 rational fits.

    The two tail branches consume ``log_p`` directly, so quantiles remain
    accurate for p far below the smallest positive double.
    """
    q: cython.double
    r: cython.double
    num: cython.double
    den: cython.double

    if p >= 0.075:
        q = 0.5 - p
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r
                    + 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r
                  + 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r
                + 1.3314166789178437745e+2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r
                    + 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r
                  + 5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r
                + 4.2313330701600911252e+1) * r + 1.0)
        return q * num / den
    r = sqrt(-log_p)
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    return num / den


def norm_upper_quantile(p: float, log_p: float) -> float:
    """Standard-normal upper quantile for tail probability p <= 0.5."""
    return _norm_upper_quantile(p, log_p)


@cython.cfunc
@cython.exceptval(check=False)
def _chisq1_quantile(p: cython.double, log_p: cython.double) -> cython.double:
    """Value q with P(chi2_1 > q) = p, via the normal quantile squared."""
    z: cython.double
    if p >= 1.0:
        return 0.0
    if log_p < LOG_P_FLOOR:
        log_p = LOG_P_FLOOR
        p = exp(LOG_P_FLOOR)
    z = _norm_upper_quantile(0.5 * p, log_p - LN2)
    return z * z


def chisq1_quantile(p: float, log_p: float) -> float:
    """One-degree chi-squared upper quantile from a ``(p, log_p)`` pair."""
    return _chisq1_quantile(p, log_p)


# ---------------------------------------------------------------------------
# sorting (own quicksort so both backends order identically)
# ---------------------------------------------------------------------------

@cython.cfunc
@cython.exceptval(check=False)
def _sort(a: cython.double[:], lo: cython.Py_ssize_t, hi: cython.Py_ssize_t) -> cython.void:
    # iterative quicksort with insertion sort below 16, [lo, hi) half-open
    stack_lo: cython.Py_ssize_t[128]
    stack_hi: cython.Py_ssize_t[128]
    top: cython.Py_ssize_t = 0
    i: cython.Py_ssize_t
    j: cython.Py_ssize_t
    mid: cython.Py_ssize_t
    piv: cython.double
    tmp: cython.double
    if not cython.compiled:
        stack_lo = [0] * 128
        stack_hi = [0] * 128
    stack_lo[0] = lo
    stack_hi[0] = hi
    top = 1
    while top > 0:
        top -= 1
        lo = stack_lo[top]
        hi = stack_hi[top]
        while hi - lo > 16:
            mid = lo + (hi - lo) // 2
            # median of three into a[mid]
            if a[lo] > a[mid]:
                tmp = a[lo]; a[lo] = a[mid]; a[mid] = tmp
            if a[mid] > a[hi - 1]:
                tmp = a[mid]; a[mid] = a[hi - 1]; a[hi - 1] = tmp
                if a[lo] > a[mid]:
                    tmp = a[lo]; a[lo] = a[mid]; a[mid] = tmp
            piv = a[mid]
            i = lo
            j = hi - 1
            while True:
                i += 1
                while a[i] < piv:
                    i += 1
                j -= 1
                while a[j] > piv:
                    j -= 1
                if i >= j:
                    break
                tmp = a[i]; a[i] = a[j]; a[j] = tmp
            # recurse on smaller side via stack, loop on larger
            if j + 1 - lo < hi - (j + 1):
                stack_lo[top] = j + 1
                stack_hi[top] = hi
                top += 1
                hi = j + 1
            else:
                stack_lo[top] = lo
                stack_hi[top] = j + 1
                top += 1
                lo = j + 1
        for i in range(lo + 1, hi):
            piv = a[i]
            j = i
            while j > lo and a[j - 1] > piv:
                a[j] = a[j - 1]
                j -= 1
            a[j] = piv


@cython.cfunc
@cython.exceptval(check=False)
def _sort_pairs(a: cython.double[:], b: cython.double[:],
                lo: cython.Py_ssize_t, hi: cython.Py_ssize_t) -> cython.void:
    # sort a[lo:hi] ascending carrying b along, same scheme as _sort
    stack_lo: cython.Py_ssize_t[128]
    stack_hi: cython.Py_ssize_t[128]
    top: cython.Py_ssize_t = 0
    i: cython.Py_ssize_t
    j: cython.Py_ssize_t
    mid: cython.Py_ssize_t
    piv: cython.double
    pvb: cython.double
    tmp: cython.double
    if not cython.compiled:
        stack_lo = [0] * 128
        stack_hi = [0] * 128
    stack_lo[0] = lo
    stack_hi[0] = hi
    top = 1
    while top > 0:
        top -= 1
        lo = stack_lo[top]
        hi = stack_hi[top]
        while hi - lo > 16:
            mid = lo + (hi - lo) // 2
            if a[lo] > a[mid]:
                tmp = a[lo]; a[lo] = a[mid]; a[mid] = tmp
                tmp = b[lo]; b[lo] = b[mid]; b[mid] = tmp
            if a[mid] > a[hi - 1]:
                tmp = a[mid]; a[mid] = a[hi - 1]; a[hi - 1] = tmp
                tmp = b[mid]; b[mid] = b[hi - 1]; b[hi - 1] = tmp
                if a[lo] > a[mid]:
                    tmp = a[lo]; a[lo] = a[mid]; a[mid] = tmp
                    tmp = b[lo]; b[lo] = b[mid]; b[mid] = tmp
            piv = a[mid]
            i = lo
            j = hi - 1
            while True:
                i += 1
                while a[i] < piv:
                    i += 1
                j -= 1
                while a[j] > piv:
                    j -= 1
                if i >= j:
                    break
                tmp = a[i]; a[i] = a[j]; a[j] = tmp
                tmp = b[i]; b[i] = b[j]; b[j] = tmp
            if j + 1 - lo < hi - (j + 1):
                stack_lo[top] = j + 1
                stack_hi[top] = hi
                top += 1
                hi = j + 1
            else:
                stack_lo[top] = lo
                stack_hi[top] = j + 1
                top += 1
                lo = j + 1
        for i in range(lo + 1, hi):
            piv = a[i]
            pvb = b[i]
            j = i
            while j > lo and a[j - 1] > piv:
                a[j] = a[j - 1]
                b[j] = b[j - 1]
                j -= 1
            a[j] = piv
            b[j] = pvb


# ---------------------------------------------------------------------------
# quantile binning
# ---------------------------------------------------------------------------

@cython.cfunc
@cython.exceptval(check=False)
def _fill_boundaries(sorted_vals: cython.double[:], q: cython.Py_ssize_t,
                     m: cython.Py_ssize_t, bnd: cython.double[:]) -> cython.Py_ssize_t:
    # boundary j (1-based) is the ceil(j*q/m)-th order statistic
    j: cython.Py_ssize_t
    idx: cython.Py_ssize_t
    for j in range(1, m):
        idx = (j * q + m - 1) // m - 1
        bnd[j - 1] = sorted_vals[idx]
    return m - 1


@cython.cfunc
@cython.exceptval(check=False)
def _bin_code(v: cython.double, bnd: cython.double[:],
              nb: cython.Py_ssize_t) -> cython.Py_ssize_t:
    # 0-based category: number of boundaries strictly below v (ties go low)
    c: cython.Py_ssize_t = 0
    j: cython.Py_ssize_t
    for j in range(nb):
        if bnd[j] < v:
            c += 1
    return c


def quantile_codes(values, m: int):
    """0-based quantile-bin codes for a float vector; NaN maps to -1.

    With q non-missing values the j-th boundary is the ceil(j*q/m)-th order
    statistic and a value's bin counts boundaries strictly below it, so ties
    fall in the lower bin.
    """
    vals: cython.double[:] = np.ascontiguousarray(values, dtype=np.float64)
    n: cython.Py_ssize_t = vals.shape[0]
    out_arr = np.empty(n, dtype=np.intp)
    out: cython.Py_ssize_t[:] = out_arr
    buf_arr = np.empty(n, dtype=np.float64)
    buf: cython.double[:] = buf_arr
    bnd_arr = np.empty(max(int(m) - 1, 1), dtype=np.float64)
    bnd: cython.double[:] = bnd_arr
    mm: cython.Py_ssize_t = m
    q: cython.Py_ssize_t = 0
    i: cython.Py_ssize_t
    nb: cython.Py_ssize_t
    for i in range(n):
        if isnan(vals[i]):
            out[i] = -1
        else:
            out[i] = 0
            buf[q] = vals[i]
            q += 1
    if q == 0:
        return out_arr
    _sort(buf, 0, q)
    nb = _fill_boundaries(buf, q, mm, bnd)
    for i in range(n):
        if out[i] != -1:
            out[i] = _bin_code(vals[i], bnd, nb)
    return out_arr


# ---------------------------------------------------------------------------
# chi-squared contingency test
# ---------------------------------------------------------------------------

@cython.cfunc
def _chisq_flat(counts: cython.Py_ssize_t[:], ncol: cython.Py_ssize_t) -> tuple:
    """Pearson test on a flat 2 x ncol table.

    Empty rows and columns are dropped before computing the degrees of
    freedom; a table with fewer than two occupied rows or columns carries
    no evidence and reports (0.0, 0, 1.0, 0.0).
    """
    r0: cython.Py_ssize_t = 0
    r1: cython.Py_ssize_t = 0
    total: cython.Py_ssize_t = 0
    ncol_occ: cython.Py_ssize_t = 0
    nrow_occ: cython.Py_ssize_t = 0
    c: cython.Py_ssize_t
    colsum: cython.Py_ssize_t
    stat: cython.double = 0.0
    e: cython.double
    o: cython.double
    ftot: cython.double
    frow0: cython.double
    frow1: cython.double
    df: cython.Py_ssize_t

    for c in range(ncol):
        r0 += counts[c]
        r1 += counts[ncol + c]
    total = r0 + r1
    if r0 > 0:
        nrow_occ += 1
    if r1 > 0:
        nrow_occ += 1
    for c in range(ncol):
        if counts[c] + counts[ncol + c] > 0:
            ncol_occ += 1
    df = (nrow_occ - 1) * (ncol_occ - 1)
    if total == 0 or df <= 0:
        return 0.0, 0, 1.0, 0.0
    ftot = cython.cast(cython.double, total)
    frow0 = cython.cast(cython.double, r0)
    frow1 = cython.cast(cython.double, r1)
    for c in range(ncol):
        colsum = counts[c] + counts[ncol + c]
        if colsum == 0:
            continue
        if r0 > 0:
            e = frow0 * cython.cast(cython.double, colsum) / ftot
            o = cython.cast(cython.double, counts[c])
            stat += (o - e) * (o - e) / e
        if r1 > 0:
            e = frow1 * cython.cast(cython.double, colsum) / ftot
            o = cython.cast(cython.double, counts[ncol + c])
            stat += (o - e) * (o - e) / e
    p, log_p = _chisq_tail(stat, cython.cast(cython.double, df))
    return stat, df, p, log_p


def chisq_counts_test(counts) -> tuple:
    """Pearson chi-squared test on a 2 x C count table.

    Returns ``(stat, df, p, log_p)``; empty rows/columns are dropped from
    the degrees of freedom.
    """
    arr = np.ascontiguousarray(counts, dtype=np.intp)
    if arr.ndim != 2 or arr.shape[0] != 2:
        raise ValueError("counts must be a 2 x C table")
    flat: cython.Py_ssize_t[:] = arr.reshape(-1)
    return _chisq_flat(flat, arr.shape[1])


# ---------------------------------------------------------------------------
# node-level machinery
# ---------------------------------------------------------------------------

@cython.cfunc
@cython.exceptval(check=False)
def _curvature_width(is_cat: cython.char, nlev_k: cython.Py_ssize_t,
                     n_t: cython.Py_ssize_t) -> cython.Py_ssize_t:
    # table width including the trailing missing column
    if is_cat != 0:
        return nlev_k + 1
    if n_t < 60:
        return 4
    return 5


@cython.cfunc
@cython.exceptval(check=False)
def _fill_curvature(X: cython.double[:, :], k: cython.Py_ssize_t,
                    is_cat: cython.char, rows: cython.Py_ssize_t[:],
                    s: cython.Py_ssize_t, e: cython.Py_ssize_t,
                    z: cython.char[:],
                    vbuf: cython.double[:], bnd: cython.double[:],
                    counts: cython.Py_ssize_t[:],
                    width: cython.Py_ssize_t) -> cython.void:
    """Fill the flat 2 x width residual-sign vs. category table for var k.

    Ordinal variables are cut at within-node quantiles (3 bins below 60
    rows, 4 otherwise); the last column collects missing values.  ``z``
    holds 0/1 residual-sign codes per segment position.
    """
    i: cython.Py_ssize_t
    q: cython.Py_ssize_t = 0
    v: cython.double
    code: cython.Py_ssize_t
    nb: cython.Py_ssize_t = 0
    m: cython.Py_ssize_t = width - 1

    for i in range(2 * width):
        counts[i] = 0
    if is_cat == 0:
        for i in range(s, e):
            v = X[rows[i], k]
            if not isnan(v):
                vbuf[q] = v
                q += 1
        if q > 0:
            _sort(vbuf, 0, q)
            nb = _fill_boundaries(vbuf, q, m, bnd)
    for i in range(s, e):
        v = X[rows[i], k]
        if isnan(v):
            code = width - 1
        elif is_cat != 0:
            code = cython.cast(cython.Py_ssize_t, v)
        else:
            code = _bin_code(v, bnd, nb)
        counts[cython.cast(cython.Py_ssize_t, z[i - s]) * width + code] += 1


def node_curvature_counts(X, k: int, is_cat: bool, nlev_k: int, rows, s: int, e: int, z):
    """Residual-sign vs. binned-predictor count table for one node, 2 x C.

    The final column holds missing values (all-zero when the node has
    none; the test drops empty columns).
    """
    Xv: cython.double[:, :] = np.ascontiguousarray(X, dtype=np.float64)
    rv: cython.Py_ssize_t[:] = np.ascontiguousarray(rows, dtype=np.intp)
    zv: cython.char[:] = np.ascontiguousarray(z, dtype=np.int8)
    n_t: cython.Py_ssize_t = e - s
    width: cython.Py_ssize_t = _curvature_width(1 if is_cat else 0, nlev_k, n_t)
    counts_arr = np.zeros(2 * width, dtype=np.intp)
    counts: cython.Py_ssize_t[:] = counts_arr
    vbuf_arr = np.empty(max(n_t, 1), dtype=np.float64)
    bnd_arr = np.empty(max(width - 1, 1), dtype=np.float64)
    _fill_curvature(Xv, k, 1 if is_cat else 0, rv, s, e, zv,
                    vbuf_arr, bnd_arr, counts, width)
    return counts_arr.reshape(2, width)


@cython.cfunc
@cython.exceptval(check=False)
def _interaction_codes(X: cython.double[:, :], k: cython.Py_ssize_t,
                       is_cat: cython.char, nlev_k: cython.Py_ssize_t,
                       rows: cython.Py_ssize_t[:],
                       s: cython.Py_ssize_t, e: cython.Py_ssize_t,
                       vbuf: cython.double[:], bnd: cython.double[:],
                       codes: cython.Py_ssize_t[:]) -> cython.Py_ssize_t:
    """Per-row interaction-scan codes for var k; returns the code width.

    Ordinal without missing: tercile codes 0/1/2.  Ordinal with missing:
    halves 0/1 plus missing code 2.  Categorical: level codes with missing
    mapped to ``nlev_k``.
    """
    i: cython.Py_ssize_t
    q: cython.Py_ssize_t = 0
    nmiss: cython.Py_ssize_t = 0
    v: cython.double
    nb: cython.Py_ssize_t
    m: cython.Py_ssize_t

    if is_cat != 0:
        for i in range(s, e):
            v = X[rows[i], k]
            if isnan(v):
                codes[i - s] = nlev_k
            else:
                codes[i - s] = cython.cast(cython.Py_ssize_t, v)
        return nlev_k + 1
    for i in range(s, e):
        v = X[rows[i], k]
        if isnan(v):
            nmiss += 1
        else:
            vbuf[q] = v
            q += 1
    m = 3 if nmiss == 0 else 2
    nb = 0
    if q > 0:
        _sort(vbuf, 0, q)
        nb = _fill_boundaries(vbuf, q, m, bnd)
    for i in range(s, e):
        v = X[rows[i], k]
        if isnan(v):
            codes[i - s] = 2
        else:
            codes[i - s] = _bin_code(v, bnd, nb)
    return 3


@cython.cfunc
def _interaction_scan(X: cython.double[:, :], iscat: cython.char[:],
                      nlev: cython.Py_ssize_t[:], rows: cython.Py_ssize_t[:],
                      s: cython.Py_ssize_t, e: cython.Py_ssize_t,
                      z: cython.char[:],
                      codes: cython.Py_ssize_t[:], widths: cython.Py_ssize_t[:],
                      vbuf: cython.double[:], bnd: cython.double[:],
                      pair_counts: cython.Py_ssize_t[:]) -> tuple:
    """Best pairwise interaction test over all variable pairs.

    Returns ``(j, k, p2, log_p2)`` with the smallest interaction p-value;
    exact ties keep the lexicographically first pair.  ``codes`` is a flat
    K x n_t scratch; ``pair_counts`` holds one flat 2 x (wj*wk) table.
    """
    K: cython.Py_ssize_t = X.shape[1]
    n_t: cython.Py_ssize_t = e - s
    j: cython.Py_ssize_t
    k: cython.Py_ssize_t
    i: cython.Py_ssize_t
    w: cython.Py_ssize_t
    wj: cython.Py_ssize_t
    wk: cython.Py_ssize_t
    col: cython.Py_ssize_t
    best_j: cython.Py_ssize_t = -1
    best_k: cython.Py_ssize_t = -1
    best_p: cython.double = 2.0
    best_logp: cython.double = 1.0

    for k in range(K):
        widths[k] = _interaction_codes(
            X, k, iscat[k], nlev[k], rows, s, e, vbuf, bnd,
            codes[k * n_t:(k + 1) * n_t])
    for j in range(K):
        wj = widths[j]
        for k in range(j + 1, K):
            wk = widths[k]
            w = wj * wk
            for i in range(2 * w):
                pair_counts[i] = 0
            for i in range(n_t):
                col = codes[j * n_t + i] * wk + codes[k * n_t + i]
                pair_counts[cython.cast(cython.Py_ssize_t, z[i]) * w + col] += 1
            stat, df, p, log_p = _chisq_flat(pair_counts, w)
            if p < best_p:
                best_p = p
                best_logp = log_p
                best_j = j
                best_k = k
    return best_j, best_k, best_p, best_logp


def node_interaction_scan(X, iscat, nlev, rows, s: int, e: int, z) -> tuple:
    """Run the pairwise interaction scan on one node's rows.

    Returns ``(j, k, p2, log_p2)`` for the winning pair, or
    ``(-1, -1, 2.0, 1.0)`` when fewer than two variables exist.
    """
    Xv: cython.double[:, :] = np.ascontiguousarray(X, dtype=np.float64)
    icv: cython.char[:] = np.ascontiguousarray(iscat, dtype=np.int8)
    nlv: cython.Py_ssize_t[:] = np.ascontiguousarray(nlev, dtype=np.intp)
    rv: cython.Py_ssize_t[:] = np.ascontiguousarray(rows, dtype=np.intp)
    zv: cython.char[:] = np.ascontiguousarray(z, dtype=np.int8)
    K: cython.Py_ssize_t = Xv.shape[1]
    n_t: cython.Py_ssize_t = e - s
    if K < 2 or n_t <= 0:
        return -1, -1, 2.0, 1.0
    maxw: cython.Py_ssize_t = 3
    kk: cython.Py_ssize_t
    for kk in range(K):
        if icv[kk] != 0 and nlv[kk] + 1 > maxw:
            maxw = nlv[kk] + 1
    codes = np.empty(K * n_t, dtype=np.intp)
    widths = np.empty(K, dtype=np.intp)
    vbuf = np.empty(n_t, dtype=np.float64)
    bnd = np.empty(max(maxw - 1, 2), dtype=np.float64)
    pair_counts = np.empty(2 * maxw * maxw, dtype=np.intp)
    return _interaction_scan(Xv, icv, nlv, rv, s, e, zv,
                             codes, widths, vbuf, bnd, pair_counts)


# ---------------------------------------------------------------------------
# split search
# ---------------------------------------------------------------------------

@cython.cfunc
@cython.exceptval(check=False)
def _subset_better(cand_miss: cython.char, cand_flags: cython.char[:],
                   best_miss: cython.char, best_flags: cython.char[:],
                   npresent: cython.Py_ssize_t,
                   present: cython.Py_ssize_t[:]) -> cython.char:
    """Tie order for equal-gain categorical splits.

    Prefer sending missing right; then the lexicographically smaller
    left-level sequence (a strict prefix sorts first).
    """
    i: cython.Py_ssize_t
    j: cython.Py_ssize_t
    if cand_miss != best_miss:
        return 1 if cand_miss == 0 else 0
    for i in range(npresent):
        if cand_flags[i] == best_flags[i]:
            continue
        # the sequences share their prefix below i and diverge here; the
        # set holding this level leads with a smaller element unless the
        # other sequence has already ended (a strict prefix sorts first)
        if cand_flags[i] != 0:
            for j in range(i + 1, npresent):
                if best_flags[j] != 0:
                    return 1
            return 0
        for j in range(i + 1, npresent):
            if cand_flags[j] != 0:
                return 0
        return 1
    return 0


@cython.cfunc
def _best_split_ordinal(X: cython.double[:, :], k: cython.Py_ssize_t,
                        y: cython.double[:], rows: cython.Py_ssize_t[:],
                        s: cython.Py_ssize_t, e: cython.Py_ssize_t,
                        min_child: cython.Py_ssize_t,
                        exclude_missing: cython.char,
                        xbuf: cython.double[:], ybuf: cython.double[:]) -> tuple:
    """Best threshold split on ordinal variable k over rows[s:e).

    Candidate thresholds are midpoints between consecutive distinct
    non-missing values.  With ``exclude_missing`` unset, missing rows are
    tried on both sides; exact gain ties keep the smaller threshold with
    missing-right ahead of missing-left.  With it set, the split is scored
    on non-missing rows only.  Returns
    ``(found, thr, missing_left, decrease, n_l, n_r)``.
    """
    i: cython.Py_ssize_t
    q: cython.Py_ssize_t = 0
    n_t: cython.Py_ssize_t = e - s
    cmiss: cython.Py_ssize_t = 0
    v: cython.double
    total: cython.Py_ssize_t
    mean: cython.double
    ysum: cython.double = 0.0
    ymiss: cython.double = 0.0
    stot: cython.double
    sse: cython.double
    d: cython.double
    cl: cython.Py_ssize_t
    sl: cython.double
    nl: cython.Py_ssize_t
    nr: cython.Py_ssize_t
    svl: cython.double
    svr: cython.double
    dec: cython.double
    thr: cython.double
    floor_: cython.double
    best_dec: cython.double = -1.0
    best_thr: cython.double = 0.0
    best_ml: cython.char = 0
    best_nl: cython.Py_ssize_t = 0
    best_nr: cython.Py_ssize_t = 0
    found: cython.char = 0
    variant: cython.Py_ssize_t
    nvariants: cython.Py_ssize_t

    for i in range(s, e):
        v = X[rows[i], k]
        if isnan(v):
            cmiss += 1
        else:
            xbuf[q] = v
            ybuf[q] = y[rows[i]]
            q += 1
    if q < 2:
        return 0, 0.0, 0, 0.0, 0, 0
    if exclude_missing != 0:
        total = q
    else:
        total = n_t
    # mean over the rows the split is scored on
    for i in range(q):
        ysum += ybuf[i]
    if exclude_missing == 0 and cmiss > 0:
        for i in range(s, e):
            v = X[rows[i], k]
            if isnan(v):
                ysum += y[rows[i]]
    mean = ysum / cython.cast(cython.double, total)
    # center y so the decrease formula is numerically stable
    for i in range(q):
        ybuf[i] -= mean
    ymiss = 0.0
    sse = 0.0
    for i in range(q):
        sse += ybuf[i] * ybuf[i]
    if exclude_missing == 0 and cmiss > 0:
        for i in range(s, e):
            v = X[rows[i], k]
            if isnan(v):
                d = y[rows[i]] - mean
                ymiss += d
                sse += d * d
    stot = 0.0
    for i in range(q):
        stot += ybuf[i]
    stot += ymiss
    floor_ = GAIN_FLOOR_REL * sse
    _sort_pairs(xbuf, ybuf, 0, q)
    nvariants = 2 if (exclude_missing == 0 and cmiss > 0) else 1
    cl = 0
    sl = 0.0
    for i in range(q - 1):
        cl += 1
        sl += ybuf[i]
        if xbuf[i] == xbuf[i + 1]:
            continue
        thr = 0.5 * (xbuf[i] + xbuf[i + 1])
        # variant 0 sends missing right, variant 1 sends it left
        for variant in range(nvariants):
            if variant == 0:
                nl = cl
                svl = sl
            else:
                nl = cl + cmiss
                svl = sl + ymiss
            nr = total - nl
            if nl < min_child or nr < min_child:
                continue
            svr = stot - svl
            dec = (svl * svl / cython.cast(cython.double, nl)
                   + svr * svr / cython.cast(cython.double, nr)
                   - stot * stot / cython.cast(cython.double, total))
            if dec <= floor_:
                continue
            if dec > best_dec:
                best_dec = dec
                best_thr = thr
                best_ml = variant
                best_nl = nl
                best_nr = nr
                found = 1
    if found == 0:
        return 0, 0.0, 0, 0.0, 0, 0
    if cmiss == 0 and exclude_missing == 0:
        # node saw no missing values: route future ones with the majority
        best_ml = 1 if best_nl > best_nr else 0
    return 1, best_thr, best_ml, best_dec, best_nl, best_nr


@cython.cfunc
def _best_split_categorical(X: cython.double[:, :], k: cython.Py_ssize_t,
                            nlev_k: cython.Py_ssize_t,
                            y: cython.double[:], rows: cython.Py_ssize_t[:],
                            s: cython.Py_ssize_t, e: cython.Py_ssize_t,
                            min_child: cython.Py_ssize_t,
                            exclude_missing: cython.char,
                            lev_cnt: cython.Py_ssize_t[:],
                            lev_sum: cython.double[:],
                            present: cython.Py_ssize_t[:],
                            cand_flags: cython.char[:],
                            best_flags: cython.char[:],
                            lev_mean: cython.double[:],
                            order: cython.Py_ssize_t[:],
                            subset_out: cython.Py_ssize_t[:]) -> tuple:
    """Best left-subset split on categorical variable k over rows[s:e).

    Missing is treated as an extra level (code ``nlev_k``) unless
    ``exclude_missing`` is set.  All subsets are enumerated up to 12
    present levels; beyond that, levels are ordered by within-node mean
    response and only contiguous prefix cuts are scored.  Exact gain ties
    prefer missing-right, then the lexicographically smallest left set.
    Returns ``(found, missing_left, decrease, n_l, n_r, n_subset)`` and
    writes the left-set non-missing level codes into ``subset_out``.
    """
    i: cython.Py_ssize_t
    c: cython.Py_ssize_t
    v: cython.double
    ncodes: cython.Py_ssize_t = nlev_k + 1
    npresent: cython.Py_ssize_t = 0
    total: cython.Py_ssize_t = 0
    ysum: cython.double = 0.0
    mean: cython.double
    sse: cython.double = 0.0
    stot: cython.double
    dsum: cython.double
    floor_: cython.double
    nl: cython.Py_ssize_t
    sl: cython.double
    nr: cython.Py_ssize_t
    svr: cython.double
    dec: cython.double
    best_dec: cython.double = -1.0
    best_nl: cython.Py_ssize_t = 0
    best_nr: cython.Py_ssize_t = 0
    best_miss: cython.char = 0
    cand_miss: cython.char
    found: cython.char = 0
    mask: cython.Py_ssize_t
    nmask: cython.Py_ssize_t
    t: cython.Py_ssize_t
    j: cython.Py_ssize_t
    pos: cython.Py_ssize_t
    miss_present: cython.char
    nsub: cython.Py_ssize_t
    tie: cython.char

    for c in range(ncodes):
        lev_cnt[c] = 0
        lev_sum[c] = 0.0
    for i in range(s, e):
        v = X[rows[i], k]
        if isnan(v):
            c = nlev_k
            if exclude_missing != 0:
                continue
        else:
            c = cython.cast(cython.Py_ssize_t, v)
        lev_cnt[c] += 1
        lev_sum[c] += y[rows[i]]
        total += 1
        ysum += y[rows[i]]
    if total < 2:
        return 0, 0, 0.0, 0, 0, 0
    mean = ysum / cython.cast(cython.double, total)
    for c in range(ncodes):
        if lev_cnt[c] > 0:
            present[npresent] = c
            npresent += 1
    if npresent < 2:
        return 0, 0, 0.0, 0, 0, 0
    # centered per-level sums and node sse on the scored rows
    for i in range(s, e):
        v = X[rows[i], k]
        if isnan(v):
            if exclude_missing != 0:
                continue
        dsum = y[rows[i]] - mean
        sse += dsum * dsum
    for j in range(npresent):
        c = present[j]
        lev_sum[c] -= mean * cython.cast(cython.double, lev_cnt[c])
    stot = 0.0
    for j in range(npresent):
        stot += lev_sum[present[j]]
    floor_ = GAIN_FLOOR_REL * sse
    miss_present = 1 if (exclude_missing == 0 and lev_cnt[nlev_k] > 0) else 0

    if npresent <= EXHAUSTIVE_MAX_LEVELS:
        nmask = (cython.cast(cython.Py_ssize_t, 1) << npresent) - 1
        for mask in range(1, nmask):
            nl = 0
            sl = 0.0
            for j in range(npresent):
                if (mask >> j) & 1:
                    cand_flags[j] = 1
                    nl += lev_cnt[present[j]]
                    sl += lev_sum[present[j]]
                else:
                    cand_flags[j] = 0
            nr = total - nl
            if nl < min_child or nr < min_child:
                continue
            svr = stot - sl
            dec = (sl * sl / cython.cast(cython.double, nl)
                   + svr * svr / cython.cast(cython.double, nr)
                   - stot * stot / cython.cast(cython.double, total))
            if dec <= floor_:
                continue
            cand_miss = 0
            if miss_present != 0 and present[npresent - 1] == nlev_k:
                if (mask >> (npresent - 1)) & 1:
                    cand_miss = 1
            tie = 0
            if found != 0 and dec == best_dec:
                tie = _subset_better(cand_miss, cand_flags, best_miss,
                                     best_flags, npresent, present)
            if dec > best_dec or tie != 0:
                best_dec = dec
                best_nl = nl
                best_nr = nr
                best_miss = cand_miss
                for j in range(npresent):
                    best_flags[j] = cand_flags[j]
                found = 1
    else:
        # order present levels by mean response, score prefix cuts only
        for j in range(npresent):
            c = present[j]
            lev_mean[j] = (lev_sum[c] / cython.cast(cython.double, lev_cnt[c]))
            order[j] = j
        for i in range(1, npresent):
            pos = order[i]
            j = i
            while j > 0 and (lev_mean[order[j - 1]] > lev_mean[pos]
                             or (lev_mean[order[j - 1]] == lev_mean[pos]
                                 and present[order[j - 1]] > present[pos])):
                order[j] = order[j - 1]
                j -= 1
            order[j] = pos
        nl = 0
        sl = 0.0
        for j in range(npresent):
            cand_flags[j] = 0
        for t in range(npresent - 1):
            pos = order[t]
            cand_flags[pos] = 1
            nl += lev_cnt[present[pos]]
            sl += lev_sum[present[pos]]
            nr = total - nl
            if nl < min_child or nr < min_child:
                continue
            svr = stot - sl
            dec = (sl * sl / cython.cast(cython.double, nl)
                   + svr * svr / cython.cast(cython.double, nr)
                   - stot * stot / cython.cast(cython.double, total))
            if dec <= floor_:
                continue
            cand_miss = 0
            if miss_present != 0 and cand_flags[npresent - 1] != 0:
                if present[npresent - 1] == nlev_k:
                    cand_miss = 1
            tie = 0
            if found != 0 and dec == best_dec:
                tie = _subset_better(cand_miss, cand_flags, best_miss,
                                     best_flags, npresent, present)
            if dec > best_dec or tie != 0:
                best_dec = dec
                best_nl = nl
                best_nr = nr
                best_miss = cand_miss
                for j in range(npresent):
                    best_flags[j] = cand_flags[j]
                found = 1
    if found == 0:
        return 0, 0, 0.0, 0, 0, 0
    nsub = 0
    for j in range(npresent):
        if best_flags[j] != 0 and present[j] != nlev_k:
            subset_out[nsub] = present[j]
            nsub += 1
    if miss_present == 0 and exclude_missing == 0:
        best_miss = 1 if best_nl > best_nr else 0
    return 1, best_miss, best_dec, best_nl, best_nr, nsub


def best_split_rows(X, k: int, is_cat: bool, nlev_k: int, y, rows,
                    s: int, e: int, min_child: int,
                    exclude_missing: bool = False) -> tuple:
    """Best SSE-reducing split on variable k over one node's rows.

    Returns ``(found, threshold, left_levels, missing_left, decrease,
    n_l, n_r)`` where ``threshold`` is None for categorical variables and
    ``left_levels`` is None for ordinal ones.
    """
    Xv: cython.double[:, :] = np.ascontiguousarray(X, dtype=np.float64)
    yv: cython.double[:] = np.ascontiguousarray(y, dtype=np.float64)
    rv: cython.Py_ssize_t[:] = np.ascontiguousarray(rows, dtype=np.intp)
    n_t: cython.Py_ssize_t = e - s
    excl: cython.char = 1 if exclude_missing else 0
    if not is_cat:
        xbuf = np.empty(max(n_t, 1), dtype=np.float64)
        ybuf = np.empty(max(n_t, 1), dtype=np.float64)
        found, thr, ml, dec, nl, nr = _best_split_ordinal(
            Xv, k, yv, rv, s, e, min_child, excl, xbuf, ybuf)
        if not found:
            return False, None, None, False, 0.0, 0, 0
        return True, thr, None, bool(ml), dec, nl, nr
    ncodes = int(nlev_k) + 1
    lev_cnt = np.zeros(ncodes, dtype=np.intp)
    lev_sum = np.zeros(ncodes, dtype=np.float64)
    present = np.zeros(ncodes, dtype=np.intp)
    cand_flags = np.zeros(ncodes, dtype=np.int8)
    best_flags = np.zeros(ncodes, dtype=np.int8)
    lev_mean = np.zeros(ncodes, dtype=np.float64)
    order = np.zeros(ncodes, dtype=np.intp)
    subset_out = np.zeros(ncodes, dtype=np.intp)
    found, ml, dec, nl, nr, nsub = _best_split_categorical(
        Xv, k, nlev_k, yv, rv, s, e, min_child, excl,
        lev_cnt, lev_sum, present, cand_flags, best_flags,
        lev_mean, order, subset_out)
    if not found:
        return False, None, None, False, 0.0, 0, 0
    return True, None, subset_out[:nsub].copy(), bool(ml), dec, nl, nr


# ---------------------------------------------------------------------------
# tree growth
# ---------------------------------------------------------------------------

def grow_tree(X, iscat, nlev, y, split_levels: int, min_node_to_split: int,
              min_child: int) -> dict:
    """Grow one curvature-guided regression tree; returns flat node arrays.

    Nodes are numbered in creation (breadth-first) order; node ``t`` owns
    ``rows[start[t]:end[t]]`` in the returned index array.  At each
    splittable node: residual-sign classes are cross-tabulated against
    every variable for curvature p-values; when no variable is
    individually significant at the Bonferroni-corrected 0.10 level the
    pairwise interaction scan runs and, if its best pair clears the 0.20
    Bonferroni level, both members inherit the interaction p-value; the
    variable with the smallest (adjusted) p-value is split at its best
    SSE-reducing cutpoint, missing values routed to both sides in turn.
    """
    Xa = np.ascontiguousarray(X, dtype=np.float64)
    Xv: cython.double[:, :] = Xa
    icv: cython.char[:] = np.ascontiguousarray(iscat, dtype=np.int8)
    nlv: cython.Py_ssize_t[:] = np.ascontiguousarray(nlev, dtype=np.intp)
    yv: cython.double[:] = np.ascontiguousarray(y, dtype=np.float64)

    n: cython.Py_ssize_t = Xv.shape[0]
    K: cython.Py_ssize_t = Xv.shape[1]
    levels: cython.Py_ssize_t = split_levels
    min_split: cython.Py_ssize_t = min_node_to_split
    minch: cython.Py_ssize_t = min_child
    maxnodes: cython.Py_ssize_t = (cython.cast(cython.Py_ssize_t, 1) << (levels + 1)) - 1

    maxw: cython.Py_ssize_t = 5
    maxlev: cython.Py_ssize_t = 0
    kk: cython.Py_ssize_t
    for kk in range(K):
        if icv[kk] != 0:
            if nlv[kk] + 1 > maxw:
                maxw = nlv[kk] + 1
            if nlv[kk] > maxlev:
                maxlev = nlv[kk]
    ncodes: cython.Py_ssize_t = maxlev + 1

    rows_arr = np.arange(n, dtype=np.intp)
    rows: cython.Py_ssize_t[:] = rows_arr
    tmp_arr = np.empty(n, dtype=np.intp)
    tmp: cython.Py_ssize_t[:] = tmp_arr

    start_arr = np.zeros(maxnodes, dtype=np.intp)
    end_arr = np.zeros(maxnodes, dtype=np.intp)
    depth_arr = np.zeros(maxnodes, dtype=np.intp)
    mean_arr = np.zeros(maxnodes, dtype=np.float64)
    sse_arr = np.zeros(maxnodes, dtype=np.float64)
    split_var_arr = np.full(maxnodes, -1, dtype=np.intp)
    split_cat_arr = np.zeros(maxnodes, dtype=np.int8)
    thr_arr = np.full(maxnodes, np.nan, dtype=np.float64)
    ml_arr = np.zeros(maxnodes, dtype=np.int8)
    dec_arr = np.zeros(maxnodes, dtype=np.float64)
    left_arr = np.full(maxnodes, -1, dtype=np.intp)
    right_arr = np.full(maxnodes, -1, dtype=np.intp)
    sub_off_arr = np.zeros(maxnodes, dtype=np.intp)
    sub_len_arr = np.zeros(maxnodes, dtype=np.intp)
    subsets_arr = np.zeros(maxnodes * ncodes, dtype=np.intp)
    p1_arr = np.ones(maxnodes * K, dtype=np.float64)
    logp1_arr = np.zeros(maxnodes * K, dtype=np.float64)
    tested_arr = np.zeros(maxnodes, dtype=np.int8)
    trig_arr = np.zeros(maxnodes, dtype=np.int8)
    p2j_arr = np.full(maxnodes, -1, dtype=np.intp)
    p2k_arr = np.full(maxnodes, -1, dtype=np.intp)
    p2_arr = np.ones(maxnodes, dtype=np.float64)
    logp2_arr = np.zeros(maxnodes, dtype=np.float64)
    p2app_arr = np.zeros(maxnodes, dtype=np.int8)

    start: cython.Py_ssize_t[:] = start_arr
    end: cython.Py_ssize_t[:] = end_arr
    depth: cython.Py_ssize_t[:] = depth_arr
    meanv: cython.double[:] = mean_arr
    ssev: cython.double[:] = sse_arr
    split_var: cython.Py_ssize_t[:] = split_var_arr
    split_cat: cython.char[:] = split_cat_arr
    thr: cython.double[:] = thr_arr
    mlv: cython.char[:] = ml_arr
    decv: cython.double[:] = dec_arr
    leftv: cython.Py_ssize_t[:] = left_arr
    rightv: cython.Py_ssize_t[:] = right_arr
    sub_off: cython.Py_ssize_t[:] = sub_off_arr
    sub_len: cython.Py_ssize_t[:] = sub_len_arr
    subsets: cython.Py_ssize_t[:] = subsets_arr
    p1: cython.double[:] = p1_arr
    logp1: cython.double[:] = logp1_arr
    tested: cython.char[:] = tested_arr
    trig: cython.char[:] = trig_arr
    p2j: cython.Py_ssize_t[:] = p2j_arr
    p2k: cython.Py_ssize_t[:] = p2k_arr
    p2v: cython.double[:] = p2_arr
    logp2v: cython.double[:] = logp2_arr
    p2app: cython.char[:] = p2app_arr

    zbuf_arr = np.zeros(n, dtype=np.int8)
    zbuf: cython.char[:] = zbuf_arr
    vbuf_arr = np.empty(max(n, 1), dtype=np.float64)
    vbuf: cython.double[:] = vbuf_arr
    ybuf_arr = np.empty(max(n, 1), dtype=np.float64)
    ybuf: cython.double[:] = ybuf_arr
    bnd_arr = np.empty(max(maxw, 4), dtype=np.float64)
    bnd: cython.double[:] = bnd_arr
    counts_arr = np.zeros(2 * maxw, dtype=np.intp)
    counts: cython.Py_ssize_t[:] = counts_arr
    codes_arr = np.empty(max(K * n, 1), dtype=np.intp)
    codes: cython.Py_ssize_t[:] = codes_arr
    widths_arr = np.empty(K, dtype=np.intp)
    widths: cython.Py_ssize_t[:] = widths_arr
    pair_counts_arr = np.empty(2 * maxw * maxw, dtype=np.intp)
    pair_counts: cython.Py_ssize_t[:] = pair_counts_arr
    lev_cnt_arr = np.zeros(ncodes + 1, dtype=np.intp)
    lev_cnt: cython.Py_ssize_t[:] = lev_cnt_arr
    lev_sum_arr = np.zeros(ncodes + 1, dtype=np.float64)
    lev_sum: cython.double[:] = lev_sum_arr
    present_arr = np.zeros(ncodes + 1, dtype=np.intp)
    present: cython.Py_ssize_t[:] = present_arr
    cand_flags_arr = np.zeros(ncodes + 1, dtype=np.int8)
    cand_flags: cython.char[:] = cand_flags_arr
    best_flags_arr = np.zeros(ncodes + 1, dtype=np.int8)
    best_flags: cython.char[:] = best_flags_arr
    lev_mean_arr = np.zeros(ncodes + 1, dtype=np.float64)
    lev_mean: cython.double[:] = lev_mean_arr
    order_arr = np.zeros(ncodes + 1, dtype=np.intp)
    order: cython.Py_ssize_t[:] = order_arr
    subset_out_arr = np.zeros(ncodes + 1, dtype=np.intp)
    subset_out: cython.Py_ssize_t[:] = subset_out_arr

    n_created: cython.Py_ssize_t = 1
    nid: cython.Py_ssize_t = 0
    s: cython.Py_ssize_t
    e: cython.Py_ssize_t
    n_t: cython.Py_ssize_t
    i: cython.Py_ssize_t
    k: cython.Py_ssize_t
    ri: cython.Py_ssize_t
    ysum: cython.double
    ymin: cython.double
    ymax: cython.double
    yval: cython.double
    mu: cython.double
    sse: cython.double
    dev: cython.double
    width: cython.Py_ssize_t
    minp: cython.double
    kstar: cython.Py_ssize_t
    thresh: cython.double
    bj: cython.Py_ssize_t
    bk: cython.Py_ssize_t
    bp: cython.double
    blogp: cython.double
    go_left: cython.char
    v: cython.double
    c: cython.Py_ssize_t
    nleft: cython.Py_ssize_t
    pos_l: cython.Py_ssize_t
    pos_r: cython.Py_ssize_t
    in_set: cython.char
    j: cython.Py_ssize_t

    start[0] = 0
    end[0] = n

    while nid < n_created:
        s = start[nid]
        e = end[nid]
        n_t = e - s
        ysum = 0.0
        ymin = yv[rows[s]]
        ymax = ymin
        for i in range(s, e):
            yval = yv[rows[i]]
            ysum += yval
            if yval < ymin:
                ymin = yval
            if yval > ymax:
                ymax = yval
        mu = ysum / cython.cast(cython.double, n_t)
        sse = 0.0
        for i in range(s, e):
            dev = yv[rows[i]] - mu
            sse += dev * dev
        meanv[nid] = mu
        ssev[nid] = sse
        if depth[nid] >= levels or n_t < min_split or ymin == ymax:
            nid += 1
            continue

        tested[nid] = 1
        # residual-sign classes: row 0 = positive residual, row 1 = the rest
        for i in range(s, e):
            zbuf[i - s] = 0 if yv[rows[i]] - mu > 0.0 else 1

        # curvature p-value for every variable
        for k in range(K):
            width = _curvature_width(icv[k], nlv[k], n_t)
            _fill_curvature(Xv, k, icv[k], rows, s, e, zbuf,
                            vbuf, bnd, counts, width)
            stat, df, p, log_p = _chisq_flat(counts, width)
            p1[nid * K + k] = p
            logp1[nid * K + k] = log_p

        # interaction scan when no variable is individually significant
        minp = p1[nid * K]
        for k in range(1, K):
            if p1[nid * K + k] < minp:
                minp = p1[nid * K + k]
        if K >= 2 and minp >= 0.10 / cython.cast(cython.double, K):
            trig[nid] = 1
            bj, bk, bp, blogp = _interaction_scan(
                Xv, icv, nlv, rows, s, e, zbuf,
                codes, widths, vbuf, bnd, pair_counts)
            p2j[nid] = bj
            p2k[nid] = bk
            p2v[nid] = bp
            logp2v[nid] = blogp
            if bp < 0.20 / cython.cast(cython.double, K * (K - 1)):
                p2app[nid] = 1
                p1[nid * K + bj] = bp
                logp1[nid * K + bj] = blogp
                p1[nid * K + bk] = bp
                logp1[nid * K + bk] = blogp

        # smallest adjusted p-value wins; ties keep the lowest index
        kstar = 0
        minp = p1[nid * K]
        for k in range(1, K):
            if p1[nid * K + k] < minp:
                minp = p1[nid * K + k]
                kstar = k

        if icv[kstar] == 0:
            found, thresh, go_left, dec, nleft, _nr = _best_split_ordinal(
                Xv, kstar, yv, rows, s, e, minch, 0, vbuf, ybuf)
            if not found:
                nid += 1
                continue
            split_var[nid] = kstar
            split_cat[nid] = 0
            thr[nid] = thresh
            mlv[nid] = go_left
            decv[nid] = dec
        else:
            found, go_left, dec, nleft, _nr, nsub = _best_split_categorical(
                Xv, kstar, nlv[kstar], yv, rows, s, e, minch, 0,
                lev_cnt, lev_sum, present, cand_flags, best_flags,
                lev_mean, order, subset_out)
            if not found:
                nid += 1
                continue
            split_var[nid] = kstar
            split_cat[nid] = 1
            mlv[nid] = go_left
            decv[nid] = dec
            sub_off[nid] = nid * ncodes
            sub_len[nid] = nsub
            for j in range(nsub):
                subsets[nid * ncodes + j] = subset_out[j]

        # stable partition of the node's row segment
        pos_l = 0
        pos_r = 0
        for i in range(s, e):
            ri = rows[i]
            v = Xv[ri, kstar]
            if isnan(v):
                go_left = mlv[nid]
            elif split_cat[nid] == 0:
                go_left = 1 if v <= thr[nid] else 0
            else:
                c = cython.cast(cython.Py_ssize_t, v)
                in_set = 0
                for j in range(sub_len[nid]):
                    if subsets[sub_off[nid] + j] == c:
                        in_set = 1
                        break
                go_left = in_set
            if go_left != 0:
                rows[s + pos_l] = ri
                pos_l += 1
            else:
                tmp[pos_r] = ri
                pos_r += 1
        for i in range(pos_r):
            rows[s + pos_l + i] = tmp[i]

        leftv[nid] = n_created
        start[n_created] = s
        end[n_created] = s + pos_l
        depth[n_created] = depth[nid] + 1
        n_created += 1
        rightv[nid] = n_created
        start[n_created] = s + pos_l
        end[n_created] = e
        depth[n_created] = depth[nid] + 1
        n_created += 1
        nid += 1

    nn = int(n_created)
    return {
        "n_nodes": nn,
        "start": start_arr[:nn].copy(),
        "end": end_arr[:nn].copy(),
        "depth": depth_arr[:nn].copy(),
        "mean": mean_arr[:nn].copy(),
        "sse": sse_arr[:nn].copy(),
        "split_var": split_var_arr[:nn].copy(),
        "split_is_cat": split_cat_arr[:nn].copy(),
        "threshold": thr_arr[:nn].copy(),
        "missing_left": ml_arr[:nn].copy(),
        "decrease": dec_arr[:nn].copy(),
        "left": left_arr[:nn].copy(),
        "right": right_arr[:nn].copy(),
        "subset_off": sub_off_arr[:nn].copy(),
        "subset_len": sub_len_arr[:nn].copy(),
        "subsets": subsets_arr.copy(),
        "p1": p1_arr[: nn * K].reshape(nn, K).copy(),
        "logp1": logp1_arr[: nn * K].reshape(nn, K).copy(),
        "tested": tested_arr[:nn].copy(),
        "interaction_tested": trig_arr[:nn].copy(),
        "p2_j": p2j_arr[:nn].copy(),
        "p2_k": p2k_arr[:nn].copy(),
        "p2": p2_arr[:nn].copy(),
        "logp2": logp2_arr[:nn].copy(),
        "p2_applied": p2app_arr[:nn].copy(),
        "rows": rows_arr,
    }


def raw_scores_from_tree(p1, logp1, n_t, split_var, K: int):
    """Raw importance: sum of sqrt(n_t) * chi2_1 quantile over split nodes."""
    p1v: cython.double[:, :] = np.ascontiguousarray(p1, dtype=np.float64)
    lp1v: cython.double[:, :] = np.ascontiguousarray(logp1, dtype=np.float64)
    ntv: cython.Py_ssize_t[:] = np.ascontiguousarray(n_t, dtype=np.intp)
    sv: cython.Py_ssize_t[:] = np.ascontiguousarray(split_var, dtype=np.intp)
    nn: cython.Py_ssize_t = p1v.shape[0]
    KK: cython.Py_ssize_t = K
    out_arr = np.zeros(KK, dtype=np.float64)
    out: cython.double[:] = out_arr
    nid: cython.Py_ssize_t
    k: cython.Py_ssize_t
    w: cython.double
    for nid in range(nn):
        if sv[nid] < 0:
            continue
        w = sqrt(cython.cast(cython.double, ntv[nid]))
        for k in range(KK):
            out[k] += w * _chisq1_quantile(p1v[nid, k], lp1v[nid, k])
    return out_arr
