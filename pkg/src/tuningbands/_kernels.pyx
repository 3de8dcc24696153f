# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: incomplete beta, Beta interval coverage, L_n and D_n.

Signatures mirror ``_pykernels`` exactly; ``_backend`` picks one at import.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, lgamma, fabs, NAN

cnp.import_array()

DEF MAXIT = 5000
DEF CF_EPS = 1e-16
DEF FPMIN = 1e-300
DEF XTOL = 1e-13
DEF MAX_BISECT = 200

cdef enum:
    K_ET = 0
    K_HD = 1

# interval kinds, shared with the Python side
ET = K_ET
HD = K_HD


cdef inline double _lbeta(double a, double b) noexcept nogil:
    return lgamma(a) + lgamma(b) - lgamma(a + b)


cdef double _betacf(double a, double b, double x) noexcept nogil:
    cdef double qab = a + b, qap = a + 1.0, qam = a - 1.0
    cdef double c = 1.0, d = 1.0 - qab * x / qap, h, aa, delta
    cdef int m, m2
    if fabs(d) < FPMIN:
        d = FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if fabs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if fabs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if fabs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if fabs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < CF_EPS:
            return h
    return NAN


cdef double _betainc(double a, double b, double x, double lbeta) noexcept nogil:
    cdef double front
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = exp(a * log(x) + b * log1p(-x) - lbeta)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


cdef double _ppf(double a, double b, double q, double lbeta) noexcept nogil:
    cdef double lo = 0.0, hi = 1.0, mid
    cdef int it
    if q <= 0.0:
        return 0.0
    if q >= 1.0:
        return 1.0
    for it in range(1100):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= 2e-16 * hi:
            break
        if _betainc(a, b, mid, lbeta) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


cdef inline double _logkernel(double a, double b, double x) noexcept nogil:
    return (a - 1.0) * log(x) + (b - 1.0) * log1p(-x)


cdef inline bint _open(double lo, double hi, int it) noexcept nogil:
    # bracket still worth halving: width relative to the nearer boundary of
    # [0, 1], so endpoints pinned near 0 or 1 keep their relative precision
    cdef double mid = 0.5 * (lo + hi)
    cdef double scale = hi if hi < 1.0 - lo else 1.0 - lo
    return it < MAX_BISECT and hi - lo > XTOL * scale and lo < mid < hi


cdef double _partner(double a, double b, double x, double mode) noexcept nogil:
    # point on the other side of the mode with the same density as x
    cdef double target = _logkernel(a, b, x), lo, hi, mid
    cdef int it = 0
    if x < mode:
        lo = mode
        hi = 1.0
        while _open(lo, hi, it):
            mid = 0.5 * (lo + hi)
            if _logkernel(a, b, mid) > target:
                lo = mid
            else:
                hi = mid
            it += 1
    else:
        lo = 0.0
        hi = mode
        while _open(lo, hi, it):
            mid = 0.5 * (lo + hi)
            if _logkernel(a, b, mid) < target:
                lo = mid
            else:
                hi = mid
            it += 1
    return 0.5 * (lo + hi)


cdef double _coverage(double a, double b, double x, int kind,
                      double lbeta) noexcept nogil:
    cdef double mode, other, cov
    if kind == K_ET or (a == 1.0 and b == 1.0):
        return fabs(1.0 - 2.0 * _betainc(a, b, x, lbeta))
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
    if cov < 0.0:
        return 0.0
    if cov > 1.0:
        return 1.0
    return cov


cdef void _interval(double a, double b, double c, int kind, double lbeta,
                    double *lo_out, double *hi_out) noexcept nogil:
    cdef double mode, lo, hi, mid, gmode
    cdef int it = 0
    if c >= 1.0:
        lo_out[0] = 0.0
        hi_out[0] = 1.0
        return
    if kind == K_ET or (a == 1.0 and b == 1.0):
        lo_out[0] = _ppf(a, b, 0.5 * (1.0 - c), lbeta)
        hi_out[0] = _ppf(a, b, 0.5 * (1.0 + c), lbeta)
        return
    if a == 1.0:
        lo_out[0] = 0.0
        hi_out[0] = _ppf(a, b, c, lbeta)
        return
    if b == 1.0:
        lo_out[0] = _ppf(a, b, 1.0 - c, lbeta)
        hi_out[0] = 1.0
        return
    mode = (a - 1.0) / (a + b - 2.0)
    if c <= 0.0:
        lo_out[0] = mode
        hi_out[0] = mode
        return
    gmode = _betainc(a, b, mode, lbeta)
    lo = _ppf(a, b, gmode - c if gmode - c > 0.0 else 0.0, lbeta)
    hi = _ppf(a, b, 1.0 - c, lbeta)
    if mode < hi:
        hi = mode
    # coverage of the interval starting at p is decreasing on [0, mode]
    while _open(lo, hi, it):
        mid = 0.5 * (lo + hi)
        if _coverage(a, b, mid, K_HD, lbeta) > c:
            lo = mid
        else:
            hi = mid
        it += 1
    # taking the upper end from the CDF keeps the mass exact even where the
    # equal-density condition is badly conditioned
    mid = 0.5 * (lo + hi)
    lo_out[0] = mid
    gmode = _betainc(a, b, mid, lbeta) + c
    hi_out[0] = 1.0 if gmode >= 1.0 else _ppf(a, b, gmode, lbeta)


def betainc_scalar(double a, double b, double x):
    return _betainc(a, b, x, _lbeta(a, b))


def ppf_scalar(double a, double b, double q):
    return _ppf(a, b, q, _lbeta(a, b))


def coverage_scalar(double a, double b, double x, int kind):
    return _coverage(a, b, x, kind, _lbeta(a, b))


def interval_scalar(double a, double b, double c, int kind):
    cdef double lo, hi
    _interval(a, b, c, kind, _lbeta(a, b), &lo, &hi)
    return lo, hi


def betainc_array(a, b, x):
    a, b, x = np.broadcast_arrays(np.asarray(a, dtype=np.float64),
                                  np.asarray(b, dtype=np.float64),
                                  np.asarray(x, dtype=np.float64))
    shape = a.shape
    cdef const double[::1] av = np.ascontiguousarray(a).ravel()
    cdef const double[::1] bv = np.ascontiguousarray(b).ravel()
    cdef const double[::1] xv = np.ascontiguousarray(x).ravel()
    out = np.empty(av.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(av.shape[0]):
            ov[i] = _betainc(av[i], bv[i], xv[i], _lbeta(av[i], bv[i]))
    return out.reshape(shape)


def ppf_array(a, b, q):
    a, b, q = np.broadcast_arrays(np.asarray(a, dtype=np.float64),
                                  np.asarray(b, dtype=np.float64),
                                  np.asarray(q, dtype=np.float64))
    shape = a.shape
    cdef const double[::1] av = np.ascontiguousarray(a).ravel()
    cdef const double[::1] bv = np.ascontiguousarray(b).ravel()
    cdef const double[::1] qv = np.ascontiguousarray(q).ravel()
    out = np.empty(av.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(av.shape[0]):
            ov[i] = _ppf(av[i], bv[i], qv[i], _lbeta(av[i], bv[i]))
    return out.reshape(shape)


def coverage_array(a, b, x, int kind):
    a, b, x = np.broadcast_arrays(np.asarray(a, dtype=np.float64),
                                  np.asarray(b, dtype=np.float64),
                                  np.asarray(x, dtype=np.float64))
    shape = a.shape
    cdef const double[::1] av = np.ascontiguousarray(a).ravel()
    cdef const double[::1] bv = np.ascontiguousarray(b).ravel()
    cdef const double[::1] xv = np.ascontiguousarray(x).ravel()
    out = np.empty(av.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(av.shape[0]):
            ov[i] = _coverage(av[i], bv[i], xv[i], kind, _lbeta(av[i], bv[i]))
    return out.reshape(shape)


def interval_array(a, b, c, int kind):
    a, b, c = np.broadcast_arrays(np.asarray(a, dtype=np.float64),
                                  np.asarray(b, dtype=np.float64),
                                  np.asarray(c, dtype=np.float64))
    shape = a.shape
    cdef const double[::1] av = np.ascontiguousarray(a).ravel()
    cdef const double[::1] bv = np.ascontiguousarray(b).ravel()
    cdef const double[::1] cv = np.ascontiguousarray(c).ravel()
    lo = np.empty(av.shape[0], dtype=np.float64)
    hi = np.empty(av.shape[0], dtype=np.float64)
    cdef double[::1] lv = lo
    cdef double[::1] hv = hi
    cdef Py_ssize_t i
    with nogil:
        for i in range(av.shape[0]):
            _interval(av[i], bv[i], cv[i], kind, _lbeta(av[i], bv[i]),
                      &lv[i], &hv[i])
    return lo.reshape(shape), hi.reshape(shape)


cdef double _hd_from_g(double a, double b, double x, double g, double mode,
                       double lbeta) noexcept nogil:
    # interior HD coverage reusing g = G(x)
    cdef double other, cov
    if x <= 0.0 or x >= 1.0:
        return 1.0
    if x == mode:
        return 0.0
    other = _partner(a, b, x, mode)
    if x < mode:
        cov = _betainc(a, b, other, lbeta) - g
    else:
        cov = g - _betainc(a, b, other, lbeta)
    if cov < 0.0:
        return 0.0
    if cov > 1.0:
        return 1.0
    return cov


def ln_statistics(u, int kind):
    """max_i coverage(Beta(i, n+1-i), u[r, i]) for each row of sorted uniforms.

    For highest density intervals an element is refined only when its cheap
    upper bound (the tail mass beyond it) exceeds the running maximum, which
    leaves the result unchanged.
    """
    cdef const double[:, ::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t reps = uv.shape[0], n = uv.shape[1], r, i, top
    out = np.empty(reps, dtype=np.float64)
    cdef double[::1] ov = out
    lbeta_np = np.array([_lbeta(i + 1.0, <double>(n - i)) for i in range(n)])
    mode_np = np.array([(i / (n - 1.0)) if n > 1 else 0.5 for i in range(n)])
    cdef double[::1] lb = lbeta_np
    cdef double[::1] md = mode_np
    gm_np = np.array([_betainc(i + 1.0, <double>(n - i), mode_np[i], lbeta_np[i])
                      for i in range(n)])
    cdef double[::1] gm = gm_np
    g_np = np.empty(n, dtype=np.float64)
    cdef double[::1] g = g_np
    cdef double best, cov, bound, lower, a, b
    with nogil:
        for r in range(reps):
            best = 0.0
            if kind == K_ET or n < 3:
                for i in range(n):
                    cov = _coverage(i + 1.0, <double>(n - i), uv[r, i], kind, lb[i])
                    if cov > best:
                        best = cov
                ov[r] = best
                continue
            # n >= 3: i = 0 and i = n-1 are the monotone shapes
            top = 0
            lower = -1.0
            for i in range(n):
                g[i] = _betainc(i + 1.0, <double>(n - i), uv[r, i], lb[i])
                bound = fabs(g[i] - gm[i])
                if bound > lower:
                    lower = bound
                    top = i
            for i in range(n):
                if i == 0:
                    cov = g[i]
                elif i == n - 1:
                    cov = 1.0 - g[i]
                else:
                    continue
                if cov > best:
                    best = cov
            if 0 < top < n - 1:
                cov = _hd_from_g(top + 1.0, <double>(n - top), uv[r, top], g[top],
                                 md[top], lb[top])
                if cov > best:
                    best = cov
            for i in range(1, n - 1):
                if i == top:
                    continue
                bound = 1.0 - g[i] if uv[r, i] < md[i] else g[i]
                if bound <= best:
                    continue
                cov = _hd_from_g(i + 1.0, <double>(n - i), uv[r, i], g[i], md[i], lb[i])
                if cov > best:
                    best = cov
            ov[r] = best
    return out


def ks_statistics(u):
    """Two-sided KS distance of each row of sorted uniforms from Uniform(0, 1)."""
    cdef const double[:, ::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t reps = uv.shape[0], n = uv.shape[1], r, i
    out = np.empty(reps, dtype=np.float64)
    cdef double[::1] ov = out
    cdef double best, d, fn = <double>n
    with nogil:
        for r in range(reps):
            best = 0.0
            for i in range(n):
                d = (i + 1.0) / fn - uv[r, i]
                if d > best:
                    best = d
                d = uv[r, i] - i / fn
                if d > best:
                    best = d
            ov[r] = best
    return out
