"""Scalar numerical kernels for binomial tails, KL inversion and bound evaluation.

Every function here takes and returns plain floats/ints (or 1-d numpy arrays
for the batch helpers) so that the same source runs under numba or the
interpreter.  Counts are carried as floats holding integral values; binomial
trial counts up to ~1e15 are exact in double precision.

Method codes: 0 exact, 1 Chernoff-KL, 2 Chernoff-Pinsker, 3 Chernoff-InfoGeo.
A NaN result from a bound routine means "method out of domain".
"""

from __future__ import annotations

import math

import numpy as np

from ._jit import njit

EXACT = 0
CHERNOFF_KL = 1
PINSKER = 2
INFO_GEO = 3

_LN_2PI = 1.8378770664093453
_HALF_LN_2PI = 0.9189385332046727
# relative size below which a further tail term cannot change the sum
_TAIL_EPS = 2.0**-60


# ---------------------------------------------------------------------------
# log binomial pmf (saddle-point form, accurate for very large n)
# ---------------------------------------------------------------------------


@njit
def stirlerr(n):
    """ln(n!) minus its Stirling approximation, for n >= 1."""
    if n <= 15.0:
        return math.lgamma(n + 1.0) - (n + 0.5) * math.log(n) + n - _HALF_LN_2PI
    nn = n * n
    s0 = 1.0 / 12.0
    s1 = 1.0 / 360.0
    s2 = 1.0 / 1260.0
    s3 = 1.0 / 1680.0
    s4 = 1.0 / 1188.0
    if n > 500.0:
        return (s0 - s1 / nn) / n
    if n > 80.0:
        return (s0 - (s1 - s2 / nn) / nn) / n
    if n > 35.0:
        return (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / n
    return (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / n


@njit
def bd0(x, m):
    """Deviance term x ln(x/m) + m - x without cancellation."""
    if abs(x - m) < 0.1 * (x + m):
        v = (x - m) / (x + m)
        s = (x - m) * v
        ej = 2.0 * x * v
        v2 = v * v
        j = 1
        while j < 1000:
            ej *= v2
            s1 = s + ej / (2 * j + 1)
            if s1 == s:
                return s1
            s = s1
            j += 1
        return s
    return x * math.log(x / m) + m - x


@njit
def log_dbinom(x, n, p):
    """ln P[X = x] for X ~ Bin(n, p)."""
    if x < 0.0 or x > n:
        return -math.inf
    if p <= 0.0:
        return 0.0 if x == 0.0 else -math.inf
    if p >= 1.0:
        return 0.0 if x == n else -math.inf
    if x == 0.0:
        return n * math.log1p(-p)
    if x == n:
        return n * math.log(p)
    q = 1.0 - p
    lc = (
        stirlerr(n)
        - stirlerr(x)
        - stirlerr(n - x)
        - bd0(x, n * p)
        - bd0(n - x, n * q)
    )
    lf = _LN_2PI + math.log(x) + math.log1p(-x / n)
    return lc - 0.5 * lf


# ---------------------------------------------------------------------------
# tails
# ---------------------------------------------------------------------------


@njit
def _log_sum_up(k, n, p):
    # ln sum_{i>=k} pmf(i); efficient when k lies right of the mode
    lt = log_dbinom(k, n, p)
    if lt == -math.inf:
        return -math.inf
    odds = p / (1.0 - p)
    s = 1.0
    t = 1.0
    i = k
    while i < n:
        t *= (n - i) / (i + 1.0) * odds
        s += t
        if t <= s * _TAIL_EPS:
            break
        i += 1.0
    return lt + math.log(s)


@njit
def _log_sum_down(k, n, p):
    # ln sum_{i<=k} pmf(i); efficient when k lies left of the mode
    lt = log_dbinom(k, n, p)
    if lt == -math.inf:
        return -math.inf
    odds = (1.0 - p) / p
    s = 1.0
    t = 1.0
    i = k
    while i > 0.0:
        t *= i / (n - i + 1.0) * odds
        s += t
        if t <= s * _TAIL_EPS:
            break
        i -= 1.0
    return lt + math.log(s)


@njit
def log_sf(k, n, p):
    """ln P[X >= k] for X ~ Bin(n, p)."""
    if k <= 0.0:
        return 0.0
    if k > n:
        return -math.inf
    if p <= 0.0:
        return -math.inf
    if p >= 1.0:
        return 0.0
    mode = math.floor((n + 1.0) * p)
    if k > mode:
        return _log_sum_up(k, n, p)
    return math.log1p(-math.exp(_log_sum_down(k - 1.0, n, p)))


@njit
def log_cdf(k, n, p):
    """ln P[X <= k] for X ~ Bin(n, p)."""
    if k < 0.0:
        return -math.inf
    if k >= n:
        return 0.0
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return -math.inf
    mode = math.floor((n + 1.0) * p)
    if k < mode:
        return _log_sum_down(k, n, p)
    return math.log1p(-math.exp(_log_sum_up(k + 1.0, n, p)))


# ---------------------------------------------------------------------------
# relative entropy and its inversions
# ---------------------------------------------------------------------------


@njit
def _log_ratio(x, y):
    """ln(x / y) for positive x, y; log1p near 1, difference of logs elsewhere."""
    r = (x - y) / y
    if -0.5 < r < 0.5:
        return math.log1p(r)
    return math.log(x) - math.log(y)


@njit
def kl_div(q, p):
    """D(q||p) in nats; +inf when p sits on the boundary and q differs."""
    if p <= 0.0:
        return 0.0 if q <= 0.0 else math.inf
    if p >= 1.0:
        return 0.0 if q >= 1.0 else math.inf
    t1 = 0.0
    if q > 0.0:
        t1 = q * _log_ratio(q, p)
    t2 = 0.0
    if q < 1.0:
        t2 = (1.0 - q) * _log_ratio(1.0 - q, 1.0 - p)
    d = t1 + t2
    return d if d > 0.0 else 0.0


@njit
def _converged(lo, hi, abs_tol, rel_tol):
    w = hi - lo
    return w <= abs_tol and w <= rel_tol * hi


@njit
def kl_root_below(p, c, abs_tol, rel_tol, max_iter):
    """Largest-safe q <= p with D(q||p) >= c (the lower Chernoff quantile)."""
    if p <= 0.0:
        return 0.0
    if c <= 0.0:
        return p
    if -math.log1p(-p) <= c:
        return 0.0
    lo = 0.0
    hi = p
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if kl_div(mid, p) > c:
            lo = mid
        else:
            hi = mid
        if _converged(lo, hi, abs_tol, rel_tol):
            break
    return lo


@njit
def kl_root_above(p, c, abs_tol, rel_tol, max_iter):
    """Smallest-safe q >= p with D(q||p) >= c (the upper Chernoff quantile)."""
    if p >= 1.0:
        return 1.0
    if c <= 0.0:
        return p
    if p <= 0.0 or -math.log(p) <= c:
        return 1.0
    lo = p
    hi = 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if kl_div(mid, p) > c:
            hi = mid
        else:
            lo = mid
        if _converged(lo, hi, abs_tol, rel_tol):
            break
    return hi


@njit
def kl_inv_lower(x, c, abs_tol, rel_tol, max_iter):
    """Lower confidence limit: p <= x with D(x||p) = c, rounded down."""
    if x <= 0.0:
        return 0.0
    if c <= 0.0:
        return x
    if x >= 1.0:
        return math.exp(-c)
    lo = 0.0
    hi = x
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if kl_div(x, mid) > c:
            lo = mid
        else:
            hi = mid
        if _converged(lo, hi, abs_tol, rel_tol):
            break
    return lo


@njit
def kl_inv_upper(x, c, abs_tol, rel_tol, max_iter):
    """Upper confidence limit: p >= x with D(x||p) = c, rounded up."""
    if x >= 1.0:
        return 1.0
    if c <= 0.0:
        return x
    if x <= 0.0:
        return -math.expm1(-c)
    lo = x
    hi = 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if kl_div(x, mid) > c:
            hi = mid
        else:
            lo = mid
        if _converged(lo, hi, abs_tol, rel_tol):
            break
    return hi


# ---------------------------------------------------------------------------
# exact percent points and confidence limits
# ---------------------------------------------------------------------------


@njit
def exact_pp_lower(n, p, log_alpha):
    """Largest integer x with P[X < x] <= alpha."""
    lo = 0.0
    hi = n + 1.0
    while hi - lo > 1.0:
        mid = math.floor(0.5 * (lo + hi))
        if log_cdf(mid - 1.0, n, p) <= log_alpha:
            lo = mid
        else:
            hi = mid
    return lo


@njit
def exact_pp_upper(n, p, log_alpha):
    """Smallest integer x with P[X > x] <= alpha."""
    lo = -1.0
    hi = n
    while hi - lo > 1.0:
        mid = math.floor(0.5 * (lo + hi))
        if log_sf(mid + 1.0, n, p) <= log_alpha:
            hi = mid
        else:
            lo = mid
    return hi


@njit
def exact_int_lower(n, k, log_alpha, rel_tol, max_iter):
    """Lower limit p with P_p[X >= k] <= alpha, rounded down."""
    if k <= 0.0:
        return 0.0
    if k >= n:
        return math.exp(log_alpha / n)
    lo = 0.0
    hi = 1.0
    x = k / n
    if log_sf(k, n, x) > log_alpha:
        hi = x
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if log_sf(k, n, mid) <= log_alpha:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rel_tol * hi:
            break
    return lo


@njit
def exact_int_upper(n, k, log_alpha, rel_tol, max_iter):
    """Upper limit p with P_p[X <= k] <= alpha, rounded up."""
    if k >= n:
        return 1.0
    if k <= 0.0:
        return -math.expm1(log_alpha / n)
    lo = 0.0
    hi = 1.0
    x = k / n
    if log_cdf(k, n, x) > log_alpha:
        lo = x
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if log_cdf(k, n, mid) <= log_alpha:
            hi = mid
        else:
            lo = mid
        if hi - lo <= rel_tol * hi:
            break
    return hi


# ---------------------------------------------------------------------------
# method dispatch
# ---------------------------------------------------------------------------


@njit
def pp_lower(n, p, log_alpha, method, abs_tol, rel_tol, max_iter):
    """Lower percent point by ``method``; NaN when out of domain."""
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return n
    if method == EXACT:
        return exact_pp_lower(n, p, log_alpha)
    c = -log_alpha / n
    if method == CHERNOFF_KL:
        v = n * kl_root_below(p, c, abs_tol, rel_tol, max_iter)
    elif method == PINSKER:
        v = n * (p - math.sqrt(0.5 * c))
    else:
        if p >= 0.5:
            return math.nan
        v = n * (p - math.sqrt(2.0 * c * p * (1.0 - p)))
    return min(max(v, 0.0), n * p)


@njit
def pp_upper(n, p, log_alpha, method, abs_tol, rel_tol, max_iter):
    """Upper percent point by ``method``; NaN when out of domain."""
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return n
    if method == EXACT:
        return exact_pp_upper(n, p, log_alpha)
    c = -log_alpha / n
    if method == CHERNOFF_KL:
        v = n * kl_root_above(p, c, abs_tol, rel_tol, max_iter)
    elif method == PINSKER:
        v = n * (p + math.sqrt(0.5 * c))
    else:
        q = (p + 2.0 * c + math.sqrt(2.0 * c * p * (1.0 - p))) / (1.0 + 2.0 * c)
        if q > 0.5:
            return math.nan
        v = n * q
    return min(max(v, n * p), n)


@njit
def int_lower(n, k, log_alpha, method, abs_tol, rel_tol, max_iter):
    """Lower one-sided confidence limit on p; NaN when out of domain."""
    if k <= 0.0:
        return 0.0
    if method == EXACT:
        return exact_int_lower(n, k, log_alpha, rel_tol, max_iter)
    x = k / n
    c = -log_alpha / n
    if method == CHERNOFF_KL:
        return kl_inv_lower(x, c, abs_tol, rel_tol, max_iter)
    if method == PINSKER:
        v = x - math.sqrt(0.5 * c)
    else:
        if x >= 0.5:
            return math.nan
        v = x - math.sqrt(2.0 * c * x * (1.0 - x))
    return min(max(v, 0.0), x)


@njit
def int_upper(n, k, log_alpha, method, abs_tol, rel_tol, max_iter):
    """Upper one-sided confidence limit on p; NaN when out of domain."""
    if k >= n:
        return 1.0
    if method == EXACT:
        return exact_int_upper(n, k, log_alpha, rel_tol, max_iter)
    x = k / n
    c = -log_alpha / n
    if method == CHERNOFF_KL:
        return kl_inv_upper(x, c, abs_tol, rel_tol, max_iter)
    if method == PINSKER:
        v = x + math.sqrt(0.5 * c)
    else:
        v = (x + 2.0 * c + math.sqrt(2.0 * c * x * (1.0 - x))) / (1.0 + 2.0 * c)
        if v > 0.5:
            return math.nan
    return min(max(v, x), 1.0)


# ---------------------------------------------------------------------------
# batch helpers for exhaustive sweeps
# ---------------------------------------------------------------------------


@njit
def pp_batch(ns, p, log_alpha, method, abs_tol, rel_tol, max_iter):
    """Lower and upper percent points for every trial count in ``ns``."""
    m = ns.shape[0]
    lower = np.empty(m)
    upper = np.empty(m)
    for i in range(m):
        n = float(ns[i])
        lower[i] = pp_lower(n, p, log_alpha, method, abs_tol, rel_tol, max_iter)
        upper[i] = pp_upper(n, p, log_alpha, method, abs_tol, rel_tol, max_iter)
    return lower, upper


@njit
def interval_batch(n, log_alpha, method, abs_tol, rel_tol, max_iter):
    """Lower and upper confidence limits for every count k = 0..n."""
    m = int(n) + 1
    lower = np.empty(m)
    upper = np.empty(m)
    for k in range(m):
        kf = float(k)
        lower[k] = int_lower(n, kf, log_alpha, method, abs_tol, rel_tol, max_iter)
        upper[k] = int_upper(n, kf, log_alpha, method, abs_tol, rel_tol, max_iter)
    return lower, upper


@njit
def pmf_vector(n, p):
    """Full pmf of Bin(n, p) as an array of length n + 1."""
    m = int(n) + 1
    out = np.empty(m)
    for k in range(m):
        out[k] = math.exp(log_dbinom(float(k), n, p))
    return out
