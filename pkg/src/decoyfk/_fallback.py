"""Pure-Python implementations of the scalar kernels.

Mirrors ``_kernels.pyx`` line for line; used when the compiled module is
unavailable or ``DECOYFK_PURE_PYTHON=1`` is set.
"""

import math

LN2 = math.log(2.0)

# status codes shared with the compiled kernels
OK = 0
NO_CONVERGENCE = -1
SATURATED = 1
BELOW_PREFACTOR = 2

_REL_TOL = 1e-15
_MAX_ITER = 300


def binary_entropy(x):
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -(x * math.log(x) + (1.0 - x) * math.log1p(-x)) / LN2


def g2(delta):
    """(1+d) ln(1+d) - d, with a series near zero to avoid cancellation."""
    if abs(delta) < 0.05:
        return _g2_series(delta)
    return (1.0 + delta) * math.log1p(delta) - delta


def _g2_series(d):
    # sum_{k>=2} (-1)^k d^k / (k (k-1))
    total = 0.0
    power = d
    sign = 1.0
    for k in range(2, 16):
        power *= d
        total += sign * power / (k * (k - 1))
        sign = -sign
    return total


def _lower_rate(t):
    # t - 1 + exp(-t)
    if t < 0.05:
        total = 0.0
        term = -t
        for k in range(2, 14):
            term *= -t / k
            total += term
        return total
    return t + math.expm1(-t)


def _upper_rate(s):
    # exp(s) - 1 - s
    if s < 0.05:
        total = 0.0
        term = s
        for k in range(2, 14):
            term *= s / k
            total += term
        return total
    return math.expm1(s) - s


def _solve_increasing(func, target, lo, hi):
    """Root of func(x) = target on [lo, hi] for increasing func.

    Illinois-modified regula falsi; inserts a bisection step whenever an
    iteration fails to halve the bracket.
    """
    flo = func(lo) - target
    fhi = func(hi) - target
    if flo >= 0.0:
        return lo, OK
    if fhi <= 0.0:
        return hi, OK
    side = 0
    width = hi - lo
    for _ in range(_MAX_ITER):
        x = hi - fhi * (hi - lo) / (fhi - flo)
        if not (lo < x < hi):
            x = 0.5 * (lo + hi)
        fx = func(x) - target
        if fx == 0.0:
            return x, OK
        if fx < 0.0:
            lo, flo = x, fx
            if side == -1:
                fhi *= 0.5
            side = -1
        else:
            hi, fhi = x, fx
            if side == 1:
                flo *= 0.5
            side = 1
        if hi - lo <= _REL_TOL * abs(hi) + 1e-300:
            return 0.5 * (lo + hi), OK
        if hi - lo > 0.5 * width:
            mid = 0.5 * (lo + hi)
            fmid = func(mid) - target
            if fmid < 0.0:
                lo, flo = mid, fmid
            elif fmid > 0.0:
                hi, fhi = mid, fmid
            else:
                return mid, OK
            side = 0
        width = hi - lo
    return 0.5 * (lo + hi), NO_CONVERGENCE


def lower_shift(c):
    """Solve t - 1 + exp(-t) = c for t >= 0; the lower mean is chi*exp(-t)."""
    if c <= 0.0:
        return 0.0, OK
    hi = c + 1.0
    if c < 1.0 / 3.0:
        hi = min(hi, math.sqrt(3.0 * c))
    return _solve_increasing(_lower_rate, c, 0.0, hi)


def upper_shift(c):
    """Solve exp(s) - 1 - s = c for s >= 0; the upper mean is chi*exp(s)."""
    if c <= 0.0:
        return 0.0, OK
    hi = min(math.sqrt(2.0 * c), math.log(2.0 + c + math.log1p(c)))
    return _solve_increasing(_upper_rate, c, 0.0, hi)


def invert_exact(chi, beta):
    """Chernoff inversion of an observation; returns (lower, upper, status)."""
    if chi <= 0.0:
        return 0.0, beta, OK
    if beta > chi * 1e300:
        # beta/chi would overflow; the lower mean underflows anyway
        return 0.0, beta + chi * (1.0 + math.log(beta) - math.log(chi)), OK
    c = beta / chi
    t, st_lo = lower_shift(c)
    s, st_hi = upper_shift(c)
    status = st_lo if st_lo != OK else st_hi
    # chi*e^s = beta + chi*(1+s) at the root, without overflow for large s
    return chi * math.exp(-t), beta + chi * (1.0 + s), status


def sampling_xi(theta, e, q):
    return (binary_entropy(e + theta - q * theta)
            - q * binary_entropy(e)
            - (1.0 - q) * binary_entropy(e + theta))


def sampling_theta(e, nx, nz, log2_eps):
    """Random-sampling deviation for bit-error rate ``e`` on pools nx, nz.

    Returns (theta, status); status is BELOW_PREFACTOR when theta = 0
    already meets the target and SATURATED when no root exists below 1-e.
    """
    n = nx + nz
    q = nx / n
    log2_pre = 0.5 * (math.log2(n) - math.log2(e * (1.0 - e) * nx * nz))
    excess = log2_pre - log2_eps
    if excess <= 0.0:
        return 0.0, BELOW_PREFACTOR
    top = 1.0 - e
    if n * sampling_xi(top, e, q) < excess:
        return top, SATURATED

    def scaled(th):
        return n * sampling_xi(th, e, q)

    theta, status = _solve_increasing(scaled, excess, 0.0, top)
    return theta, status
