"""Pure numpy versions of the compiled kernels.

Same algorithms and tolerances as ``_kernels.pyx``; the scalar entry points
use ``math`` and the array entry points vectorize over elements.
"""
import math

import numpy as np
from scipy.special import gammaln

ET = 0
HD = 1

MAXIT = 5000
CF_EPS = 1e-16
FPMIN = 1e-300
XTOL = 1e-13
MAX_BISECT = 200


def _lbeta(a, b):
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _betacf(a, b, x):
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < FPMIN:
        d = FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < CF_EPS:
            return h
    return math.nan


def _betainc(a, b, x, lbeta):
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = math.exp(a * math.log(x) + b * math.log1p(-x) - lbeta)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _ppf(a, b, q, lbeta):
    if q <= 0.0:
        return 0.0
    if q >= 1.0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(1100):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= 2e-16 * hi:
            break
        if _betainc(a, b, mid, lbeta) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _logkernel(a, b, x):
    return (a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x)


def _open(lo, hi, it):
    mid = 0.5 * (lo + hi)
    return it < MAX_BISECT and hi - lo > XTOL * min(hi, 1.0 - lo) and lo < mid < hi


def _partner(a, b, x, mode):
    target = _logkernel(a, b, x)
    it = 0
    if x < mode:
        lo, hi = mode, 1.0
        while _open(lo, hi, it):
            mid = 0.5 * (lo + hi)
            if _logkernel(a, b, mid) > target:
                lo = mid
            else:
                hi = mid
            it += 1
    else:
        lo, hi = 0.0, mode
        while _open(lo, hi, it):
            mid = 0.5 * (lo + hi)
            if _logkernel(a, b, mid) < target:
                lo = mid
            else:
                hi = mid
            it += 1
    return 0.5 * (lo + hi)


def _coverage(a, b, x, kind, lbeta):
    if kind == ET or (a == 1.0 and b == 1.0):
        return abs(1.0 - 2.0 * _betainc(a, b, x, lbeta))
    if a == 1.0:
        return _betainc(a, b, x, lbeta)
    if b == 1.0:
        return 1.0 - _betainc(a, b, x, lbeta)
    if x <= 0.0 or x >= 1.0:
        return 1.0
    mode = (a - 1.0) / (a + b - 2.0)
    if x == mode:
        return 0.0
    other = _partner(a, b, x, mode)
    if x < mode:
        cov = _betainc(a, b, other, lbeta) - _betainc(a, b, x, lbeta)
    else:
        cov = _betainc(a, b, x, lbeta) - _betainc(a, b, other, lbeta)
    return min(max(cov, 0.0), 1.0)


def _interval(a, b, c, kind, lbeta):
    if c >= 1.0:
        return 0.0, 1.0
    if kind == ET or (a == 1.0 and b == 1.0):
        return _ppf(a, b, 0.5 * (1.0 - c), lbeta), _ppf(a, b, 0.5 * (1.0 + c), lbeta)
    if a == 1.0:
        return 0.0, _ppf(a, b, c, lbeta)
    if b == 1.0:
        return _ppf(a, b, 1.0 - c, lbeta), 1.0
    mode = (a - 1.0) / (a + b - 2.0)
    if c <= 0.0:
        return mode, mode
    gmode = _betainc(a, b, mode, lbeta)
    lo = _ppf(a, b, max(gmode - c, 0.0), lbeta)
    hi = min(mode, _ppf(a, b, 1.0 - c, lbeta))
    it = 0
    while _open(lo, hi, it):
        mid = 0.5 * (lo + hi)
        if _coverage(a, b, mid, HD, lbeta) > c:
            lo = mid
        else:
            hi = mid
        it += 1
    mid = 0.5 * (lo + hi)
    top = _betainc(a, b, mid, lbeta) + c
    return mid, 1.0 if top >= 1.0 else _ppf(a, b, top, lbeta)


def betainc_scalar(a, b, x):
    return _betainc(float(a), float(b), float(x), _lbeta(a, b))


def ppf_scalar(a, b, q):
    return _ppf(float(a), float(b), float(q), _lbeta(a, b))


def coverage_scalar(a, b, x, kind):
    return _coverage(float(a), float(b), float(x), kind, _lbeta(a, b))


def interval_scalar(a, b, c, kind):
    return _interval(float(a), float(b), float(c), kind, _lbeta(a, b))


# -- vectorized ---------------------------------------------------------------


def _broadcast(*arrays):
    arrays = np.broadcast_arrays(*(np.asarray(v, dtype=np.float64) for v in arrays))
    return arrays[0].shape, [np.array(v, dtype=np.float64).ravel() for v in arrays]


def _betacf_vec(a, b, x):
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < FPMIN, FPMIN, d)
    d = 1.0 / d
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for m in range(1, MAXIT + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        av, bv, xv = a[idx], b[idx], x[idx]
        cv, dv = c[idx], d[idx]
        m2 = 2 * m
        aa = m * (bv - m) * xv / ((qam[idx] + m2) * (av + m2))
        dv = 1.0 + aa * dv
        dv = np.where(np.abs(dv) < FPMIN, FPMIN, dv)
        cv = 1.0 + aa / cv
        cv = np.where(np.abs(cv) < FPMIN, FPMIN, cv)
        dv = 1.0 / dv
        hv = h[idx] * dv * cv
        aa = -(av + m) * (qab[idx] + m) * xv / ((av + m2) * (qap[idx] + m2))
        dv = 1.0 + aa * dv
        dv = np.where(np.abs(dv) < FPMIN, FPMIN, dv)
        cv = 1.0 + aa / cv
        cv = np.where(np.abs(cv) < FPMIN, FPMIN, cv)
        dv = 1.0 / dv
        delta = dv * cv
        hv = hv * delta
        c[idx], d[idx], h[idx] = cv, dv, hv
        active[idx[np.abs(delta - 1.0) < CF_EPS]] = False
    h[active] = np.nan
    return h


def _betainc_vec(a, b, x, lbeta):
    out = np.empty_like(x)
    lo = x <= 0.0
    hi = x >= 1.0
    out[lo] = 0.0
    out[hi] = 1.0
    inner = ~(lo | hi)
    if not inner.any():
        return out
    av, bv, xv, lb = a[inner], b[inner], x[inner], lbeta[inner]
    with np.errstate(divide="ignore"):
        front = np.exp(av * np.log(xv) + bv * np.log1p(-xv) - lb)
    direct = xv < (av + 1.0) / (av + bv + 2.0)
    res = np.empty_like(xv)
    if direct.any():
        res[direct] = front[direct] * _betacf_vec(av[direct], bv[direct], xv[direct]) / av[direct]
    flip = ~direct
    if flip.any():
        res[flip] = 1.0 - front[flip] * _betacf_vec(bv[flip], av[flip], 1.0 - xv[flip]) / bv[flip]
    out[inner] = res
    return out


def _lbeta_vec(a, b):
    return gammaln(a) + gammaln(b) - gammaln(a + b)


def _ppf_vec(a, b, q, lbeta):
    lo = np.zeros_like(q)
    hi = np.ones_like(q)
    # 1100 halvings reach the smallest subnormal from a unit bracket
    for _ in range(1100):
        mid = 0.5 * (lo + hi)
        live = (mid > lo) & (mid < hi) & (hi - lo > 2e-16 * hi)
        if not live.any():
            break
        idx = np.flatnonzero(live)
        below = _betainc_vec(a[idx], b[idx], mid[idx], lbeta[idx]) < q[idx]
        lo[idx[below]] = mid[idx[below]]
        hi[idx[~below]] = mid[idx[~below]]
    out = 0.5 * (lo + hi)
    out[q <= 0.0] = 0.0
    out[q >= 1.0] = 1.0
    return out


def _logkernel_vec(a, b, x):
    with np.errstate(divide="ignore", invalid="ignore"):
        return (a - 1.0) * np.log(x) + (b - 1.0) * np.log1p(-x)


def _partner_vec(a, b, x, mode):
    target = _logkernel_vec(a, b, x)
    left = x < mode
    lo = np.where(left, mode, 0.0)
    hi = np.where(left, 1.0, mode)
    for _ in range(MAX_BISECT):
        mid = 0.5 * (lo + hi)
        active = (hi - lo > XTOL * np.minimum(hi, 1.0 - lo)) & (lo < mid) & (mid < hi)
        if not active.any():
            break
        val = _logkernel_vec(a, b, mid)
        move_lo = np.where(left, val > target, val < target) & active
        move_hi = ~move_lo & active
        lo = np.where(move_lo, mid, lo)
        hi = np.where(move_hi, mid, hi)
    return 0.5 * (lo + hi)


def _coverage_vec(a, b, x, kind, lbeta):
    out = np.empty_like(x)
    g = _betainc_vec(a, b, x, lbeta)
    flat = (a == 1.0) & (b == 1.0)
    if kind == ET:
        return np.abs(1.0 - 2.0 * g)
    out[flat] = np.abs(1.0 - 2.0 * g[flat])
    dec = (a == 1.0) & ~flat
    inc = (b == 1.0) & ~flat
    out[dec] = g[dec]
    out[inc] = 1.0 - g[inc]
    interior = ~(flat | dec | inc)
    edge = interior & ((x <= 0.0) | (x >= 1.0))
    out[edge] = 1.0
    interior &= ~edge
    if interior.any():
        av, bv, xv, lb, gv = a[interior], b[interior], x[interior], lbeta[interior], g[interior]
        mode = (av - 1.0) / (av + bv - 2.0)
        other = _partner_vec(av, bv, xv, mode)
        go = _betainc_vec(av, bv, other, lb)
        cov = np.where(xv < mode, go - gv, gv - go)
        cov = np.where(xv == mode, 0.0, cov)
        out[interior] = np.clip(cov, 0.0, 1.0)
    return out


def betainc_array(a, b, x):
    shape, (a, b, x) = _broadcast(a, b, x)
    return _betainc_vec(a, b, x, _lbeta_vec(a, b)).reshape(shape)


def ppf_array(a, b, q):
    shape, (a, b, q) = _broadcast(a, b, q)
    return _ppf_vec(a, b, q, _lbeta_vec(a, b)).reshape(shape)


def coverage_array(a, b, x, kind):
    shape, (a, b, x) = _broadcast(a, b, x)
    return _coverage_vec(a, b, x, kind, _lbeta_vec(a, b)).reshape(shape)


def interval_array(a, b, c, kind):
    # one interval per order statistic; the scalar path is fast enough here
    shape, (a, b, c) = _broadcast(a, b, c)
    pairs = [interval_scalar(ai, bi, ci, kind) for ai, bi, ci in zip(a, b, c)]
    lo = np.array([p[0] for p in pairs], dtype=np.float64).reshape(shape)
    hi = np.array([p[1] for p in pairs], dtype=np.float64).reshape(shape)
    return lo, hi


def ln_statistics(u, kind):
    """max_i coverage(Beta(i, n+1-i), u[r, i]) for each row of sorted uniforms.

    Highest density coverages are refined only where the tail-mass bound can
    beat the best exact value found so far.
    """
    u = np.ascontiguousarray(u, dtype=np.float64)
    reps, n = u.shape
    i = np.arange(1, n + 1, dtype=np.float64)
    a = np.broadcast_to(i, (reps, n))
    b = np.broadcast_to(n + 1.0 - i, (reps, n))
    lbeta = np.broadcast_to(_lbeta_vec(i, n + 1.0 - i), (reps, n))
    if kind == ET or n < 3:
        cov = _coverage_vec(a.ravel(), b.ravel(), u.ravel(), kind, lbeta.ravel())
        return cov.reshape(reps, n).max(axis=1)
    mode = np.broadcast_to((i - 1.0) / (n - 1.0), (reps, n))
    g = _betainc_vec(a.ravel(), b.ravel(), u.ravel(), lbeta.ravel()).reshape(reps, n)
    gmode = _betainc_vec(i, n + 1.0 - i, mode[0], lbeta[0])
    best = np.maximum(g[:, 0], 1.0 - g[:, -1])
    rows = np.arange(reps)
    top = np.abs(g - gmode)[:, 1:-1].argmax(axis=1) + 1
    exact = _hd_from_g(a[rows, top], b[rows, top], u[rows, top], g[rows, top],
                       mode[rows, top], lbeta[rows, top])
    best = np.maximum(best, exact)
    bound = np.where(u < mode, 1.0 - g, g)
    bound[:, [0, -1]] = -1.0
    bound[rows, top] = -1.0
    rr, cc = np.nonzero(bound > best[:, None])
    if rr.size:
        cov = _hd_from_g(a[rr, cc], b[rr, cc], u[rr, cc], g[rr, cc], mode[rr, cc], lbeta[rr, cc])
        np.maximum.at(best, rr, cov)
    return best


def _hd_from_g(a, b, x, g, mode, lbeta):
    out = np.ones_like(x)
    inner = (x > 0.0) & (x < 1.0)
    av, bv, xv, gv, mv, lb = a[inner], b[inner], x[inner], g[inner], mode[inner], lbeta[inner]
    other = _partner_vec(av, bv, xv, mv)
    go = _betainc_vec(av, bv, other, lb)
    cov = np.where(xv < mv, go - gv, gv - go)
    cov = np.where(xv == mv, 0.0, cov)
    out[inner] = np.clip(cov, 0.0, 1.0)
    return out


def ks_statistics(u):
    """Two-sided KS distance of each row of sorted uniforms from Uniform(0, 1)."""
    u = np.asarray(u, dtype=np.float64)
    n = u.shape[1]
    i = np.arange(1, n + 1)
    return np.maximum((i / n - u).max(axis=1), (u - (i - 1) / n).max(axis=1))
