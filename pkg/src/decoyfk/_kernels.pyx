# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scalar kernels; see ``_fallback.py`` for the reference version."""

from libc.math cimport log, log1p, log2, exp, expm1, sqrt, fabs

cdef double LN2 = log(2.0)

OK = 0
NO_CONVERGENCE = -1
SATURATED = 1
BELOW_PREFACTOR = 2

cdef double _REL_TOL = 1e-15
cdef int _MAX_ITER = 300

ctypedef double (*rate_fn)(double x, double *args) noexcept nogil


cdef inline double _h(double x) noexcept nogil:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -(x * log(x) + (1.0 - x) * log1p(-x)) / LN2


cpdef double binary_entropy(double x):
    return _h(x)


cdef double _g2_series(double d) noexcept nogil:
    cdef double total = 0.0, power = d, sign = 1.0
    cdef int k
    for k in range(2, 16):
        power *= d
        total += sign * power / (k * (k - 1))
        sign = -sign
    return total


cpdef double g2(double delta):
    if fabs(delta) < 0.05:
        return _g2_series(delta)
    return (1.0 + delta) * log1p(delta) - delta


cdef double _lower_rate(double t, double *args) noexcept nogil:
    cdef double total = 0.0, term = -t
    cdef int k
    if t < 0.05:
        for k in range(2, 14):
            term *= -t / k
            total += term
        return total
    return t + expm1(-t)


cdef double _upper_rate(double s, double *args) noexcept nogil:
    cdef double total = 0.0, term = s
    cdef int k
    if s < 0.05:
        for k in range(2, 14):
            term *= s / k
            total += term
        return total
    return expm1(s) - s


cdef double _xi(double theta, double e, double q) noexcept nogil:
    return _h(e + theta - q * theta) - q * _h(e) - (1.0 - q) * _h(e + theta)


cdef double _scaled_xi(double theta, double *args) noexcept nogil:
    # args = (e, q, n)
    return args[2] * _xi(theta, args[0], args[1])


cdef int _solve_increasing(rate_fn func, double *args, double target,
                           double lo, double hi, double *root) noexcept nogil:
    cdef double flo = func(lo, args) - target
    cdef double fhi = func(hi, args) - target
    cdef double x, fx, mid, fmid, width
    cdef int side = 0, it
    if flo >= 0.0:
        root[0] = lo
        return 0
    if fhi <= 0.0:
        root[0] = hi
        return 0
    width = hi - lo
    for it in range(_MAX_ITER):
        x = hi - fhi * (hi - lo) / (fhi - flo)
        if not (lo < x < hi):
            x = 0.5 * (lo + hi)
        fx = func(x, args) - target
        if fx == 0.0:
            root[0] = x
            return 0
        if fx < 0.0:
            lo = x
            flo = fx
            if side == -1:
                fhi *= 0.5
            side = -1
        else:
            hi = x
            fhi = fx
            if side == 1:
                flo *= 0.5
            side = 1
        if hi - lo <= _REL_TOL * fabs(hi) + 1e-300:
            root[0] = 0.5 * (lo + hi)
            return 0
        if hi - lo > 0.5 * width:
            mid = 0.5 * (lo + hi)
            fmid = func(mid, args) - target
            if fmid < 0.0:
                lo = mid
                flo = fmid
            elif fmid > 0.0:
                hi = mid
                fhi = fmid
            else:
                root[0] = mid
                return 0
            side = 0
        width = hi - lo
    root[0] = 0.5 * (lo + hi)
    return -1


cdef int _lower_shift(double c, double *t) noexcept nogil:
    cdef double hi
    if c <= 0.0:
        t[0] = 0.0
        return 0
    hi = c + 1.0
    if c < 1.0 / 3.0:
        hi = min(hi, sqrt(3.0 * c))
    return _solve_increasing(_lower_rate, NULL, c, 0.0, hi, t)


cdef int _upper_shift(double c, double *s) noexcept nogil:
    cdef double hi
    if c <= 0.0:
        s[0] = 0.0
        return 0
    hi = min(sqrt(2.0 * c), log(2.0 + c + log1p(c)))
    return _solve_increasing(_upper_rate, NULL, c, 0.0, hi, s)


def lower_shift(double c):
    cdef double t
    cdef int status = _lower_shift(c, &t)
    return t, status


def upper_shift(double c):
    cdef double s
    cdef int status = _upper_shift(c, &s)
    return s, status


def invert_exact(double chi, double beta):
    cdef double t, s, c
    cdef int st_lo, st_hi
    if chi <= 0.0:
        return 0.0, beta, 0
    if beta > chi * 1e300:
        # beta/chi would overflow; the lower mean underflows anyway
        return 0.0, beta + chi * (1.0 + log(beta) - log(chi)), 0
    c = beta / chi
    st_lo = _lower_shift(c, &t)
    st_hi = _upper_shift(c, &s)
    # chi*e^s = beta + chi*(1+s) at the root, without overflow for large s
    return chi * exp(-t), beta + chi * (1.0 + s), (st_lo if st_lo != 0 else st_hi)


cpdef double sampling_xi(double theta, double e, double q):
    return _xi(theta, e, q)


def sampling_theta(double e, double nx, double nz, double log2_eps):
    cdef double n = nx + nz
    cdef double q = nx / n
    cdef double log2_pre = 0.5 * (log2(n) - log2(e * (1.0 - e) * nx * nz))
    cdef double excess = log2_pre - log2_eps
    cdef double top = 1.0 - e
    cdef double theta
    cdef double args[3]
    cdef int status
    if excess <= 0.0:
        return 0.0, BELOW_PREFACTOR
    if n * _xi(top, e, q) < excess:
        return top, SATURATED
    args[0] = e
    args[1] = q
    args[2] = n
    status = _solve_increasing(_scaled_xi, args, excess, 0.0, top, &theta)
    return theta, status
