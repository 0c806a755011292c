"""Binomial percent points and one-sided interval estimation.

Two families of routines live here:

* percent points ``X-_per(N, p, alpha)`` / ``X+_per(N, p, alpha)``, the
  one-sided quantiles of ``Bin(N, p)``;
* confidence limits ``p-_est(N, k, alpha)`` / ``p+_est(N, k, alpha)`` for the
  success probability given an observed count ``k``.

Each is available exactly (log-space tail summation) or through one of three
Chernoff-type closed forms that are cheap and always on the conservative
side of the exact value.  All tail arithmetic is in nats; ``alpha`` may be
given directly or, when it would underflow, through ``log_alpha``.

Conventions
-----------
The exact lower percent point is the largest integer ``x`` with
``P[X < x] <= alpha``; the exact upper percent point is the smallest integer
``x`` with ``P[X > x] <= alpha``.  The exact lower limit solves
``P_p[X >= k] = alpha`` and the upper limit solves ``P_p[X <= k] = alpha``
(one-sided Clopper-Pearson).  Root-found values are rounded outward.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k

__all__ = [
    "BinomialModel",
    "BoundMethod",
    "Tolerance",
    "MethodDomainError",
    "InfiniteDivergenceError",
    "binom_tail_upper",
    "kl_div",
    "percent_point_lower",
    "percent_point_upper",
    "interval_lower",
    "interval_upper",
    "binary_entropy",
    "exact_admissible",
    "resolve_method",
    "percent_points_batch",
    "interval_limits_all",
    "coverage_exhaustive",
]

# exact tails are used below these thresholds when the method is "auto"
EXACT_MIN_LOG_ALPHA = -40.0 * math.log(2.0)
EXACT_MAX_TRIALS = 10**5


class MethodDomainError(ValueError):
    """A closed-form bound was asked for outside its validity region."""


class InfiniteDivergenceError(ValueError):
    """Relative entropy against a boundary distribution is infinite."""


class BoundMethod(enum.Enum):
    """How a percent point or confidence limit is evaluated."""

    EXACT = "exact"
    CHERNOFF_KL = "chernoff-kl"
    CHERNOFF_PINSKER = "pinsker"
    CHERNOFF_INFO_GEO = "info-geo"

    @property
    def code(self) -> int:
        return _CODES[self]

    @classmethod
    def parse(cls, value) -> "BoundMethod":
        """Accept a member, its value string, or its name (case-insensitive)."""
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower().replace("_", "-")
        for member in cls:
            if text in (member.value, member.name.lower().replace("_", "-")):
                return member
        raise ValueError(f"unknown bound method: {value!r}")


_CODES = {
    BoundMethod.EXACT: _k.EXACT,
    BoundMethod.CHERNOFF_KL: _k.CHERNOFF_KL,
    BoundMethod.CHERNOFF_PINSKER: _k.PINSKER,
    BoundMethod.CHERNOFF_INFO_GEO: _k.INFO_GEO,
}


@dataclass(frozen=True)
class BinomialModel:
    """``Bin(trials, success_prob)``."""

    trials: int
    success_prob: float

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError(f"trials must be a positive integer, got {self.trials!r}")
        if not 0.0 <= self.success_prob <= 1.0:
            raise ValueError(f"success_prob must lie in [0, 1], got {self.success_prob!r}")


@dataclass(frozen=True)
class Tolerance:
    """Stopping rule for the bisection solvers.

    Bisection stops once the bracket is narrower than both ``abs_tol`` and
    ``rel_tol`` times its upper end, or after ``max_iter`` halvings.
    """

    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    max_iter: int = 200

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


DEFAULT_TOL = Tolerance()


def _resolve_log_alpha(alpha, log_alpha) -> float:
    if log_alpha is not None:
        la = float(log_alpha)
        if not la < 0.0:
            raise ValueError("log_alpha must be negative")
        return la
    if alpha is None:
        raise ValueError("alpha or log_alpha is required")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    return math.log(alpha)


def exact_admissible(trials: float, log_alpha: float) -> bool:
    """Whether exact tails are used when the caller leaves the method open."""
    return log_alpha >= EXACT_MIN_LOG_ALPHA or trials <= EXACT_MAX_TRIALS


def resolve_method(method, trials: float, log_alpha: float) -> BoundMethod:
    """Map ``"auto"`` (or ``None``) to Exact or Chernoff-KL; pass others through."""
    if method is None or (isinstance(method, str) and method.lower() == "auto"):
        if exact_admissible(trials, log_alpha):
            return BoundMethod.EXACT
        return BoundMethod.CHERNOFF_KL
    return BoundMethod.parse(method)


def binom_tail_upper(model: BinomialModel, k: int) -> float:
    """``P[X >= k]`` for ``X ~ model``.

    Examples
    --------
    >>> round(binom_tail_upper(BinomialModel(10, 0.5), 9) * 1024, 9)
    11.0
    """
    n = model.trials
    if not 0 <= k <= n + 1:
        raise ValueError(f"k must lie in [0, N+1], got {k!r}")
    return math.exp(_k.log_sf(float(k), float(n), float(model.success_prob)))


def kl_div(q: float, p: float) -> float:
    """Relative entropy ``D(q||p)`` in nats.

    Raises
    ------
    InfiniteDivergenceError
        If ``p`` is 0 or 1 and ``q`` differs from it.
    """
    for name, v in (("q", q), ("p", p)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
    d = _k.kl_div(float(q), float(p))
    if math.isinf(d):
        raise InfiniteDivergenceError(f"D({q}||{p}) is infinite")
    return d


def _call(fn, n, x, log_alpha, method, tol, what):
    m = BoundMethod.parse(method)
    v = fn(float(n), float(x), log_alpha, m.code, tol.abs_tol, tol.rel_tol, tol.max_iter)
    if math.isnan(v):
        raise MethodDomainError(f"{m.value} {what} is out of domain for N={n}, x={x}")
    return v


def percent_point_lower(
    model: BinomialModel,
    alpha: float | None = None,
    method=BoundMethod.EXACT,
    tol: Tolerance = DEFAULT_TOL,
    *,
    log_alpha: float | None = None,
) -> float:
    """Lower percent point ``X-_per(N, p, alpha)``.

    Parameters
    ----------
    model : BinomialModel
    alpha : float, optional
        Tail probability; ignored when ``log_alpha`` is given.
    method : BoundMethod or str
        ``EXACT`` returns an integer-valued float; the Chernoff forms return
        a real no larger than the exact value, clamped to ``[0, N p]``.
    tol : Tolerance
    log_alpha : float, optional
        ``ln(alpha)``, for tail probabilities below the float range.

    Raises
    ------
    MethodDomainError
        Information-geometry bound with ``p >= 1/2``.
    """
    la = _resolve_log_alpha(alpha, log_alpha)
    return _call(_k.pp_lower, model.trials, model.success_prob, la, method, tol,
                 "lower percent point")


def percent_point_upper(
    model: BinomialModel,
    alpha: float | None = None,
    method=BoundMethod.EXACT,
    tol: Tolerance = DEFAULT_TOL,
    *,
    log_alpha: float | None = None,
) -> float:
    """Upper percent point ``X+_per(N, p, alpha)``.

    Bound methods return a value no smaller than the exact one, clamped to
    ``[N p, N]``.  The information-geometry form raises
    :class:`MethodDomainError` when its quantile exceeds 1/2.
    """
    la = _resolve_log_alpha(alpha, log_alpha)
    return _call(_k.pp_upper, model.trials, model.success_prob, la, method, tol,
                 "upper percent point")


def _check_count(n, k):
    if int(n) != n or n < 1:
        raise ValueError(f"N must be a positive integer, got {n!r}")
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, N], got {k!r}")


def interval_lower(
    n: int,
    k: int,
    alpha: float | None = None,
    method=BoundMethod.EXACT,
    tol: Tolerance = DEFAULT_TOL,
    *,
    log_alpha: float | None = None,
) -> float:
    """Lower confidence limit ``p-_est(N, k, alpha)``; ``X-_est = N * p``.

    Exact: the root of ``P_p[X >= k] = alpha`` (0 for ``k = 0``), so that
    ``P[p < p-_est(X)] <= alpha`` for every true ``p``.
    """
    _check_count(n, k)
    la = _resolve_log_alpha(alpha, log_alpha)
    return _call(_k.int_lower, n, k, la, method, tol, "lower confidence limit")


def interval_upper(
    n: int,
    k: int,
    alpha: float | None = None,
    method=BoundMethod.EXACT,
    tol: Tolerance = DEFAULT_TOL,
    *,
    log_alpha: float | None = None,
) -> float:
    """Upper confidence limit ``p+_est(N, k, alpha)``; ``X+_est = N * p``.

    Exact: the root of ``P_p[X <= k] = alpha`` (1 for ``k = N``).
    """
    _check_count(n, k)
    la = _resolve_log_alpha(alpha, log_alpha)
    return _call(_k.int_upper, n, k, la, method, tol, "upper confidence limit")


def binary_entropy(x: float) -> float:
    """``h(x) = -x log2 x - (1-x) log2 (1-x)`` with ``h(0) = h(1) = 0``."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -(x * math.log2(x) + (1.0 - x) * math.log1p(-x) / math.log(2.0))


def percent_points_batch(ns, p: float, alpha: float, method=BoundMethod.EXACT,
                         tol: Tolerance = DEFAULT_TOL):
    """Lower and upper percent points for each trial count in ``ns``.

    Out-of-domain entries of the information-geometry method are NaN.
    """
    m = BoundMethod.parse(method)
    ns = np.ascontiguousarray(ns, dtype=np.int64)
    return _k.pp_batch(ns, float(p), math.log(alpha), m.code,
                       tol.abs_tol, tol.rel_tol, tol.max_iter)


def interval_limits_all(n: int, alpha: float, method=BoundMethod.EXACT,
                        tol: Tolerance = DEFAULT_TOL):
    """Lower and upper confidence limits for every count ``k = 0..n``."""
    m = BoundMethod.parse(method)
    return _k.interval_batch(float(n), math.log(alpha), m.code,
                             tol.abs_tol, tol.rel_tol, tol.max_iter)


def coverage_exhaustive(n: int, p: float, alpha: float, method=BoundMethod.EXACT,
                        tol: Tolerance = DEFAULT_TOL) -> dict:
    """Exact violation probabilities of the four one-sided contracts under ``Bin(n, p)``.

    Sums the pmf over every outcome ``X = 0..n``: ``P[X < X-_per]``,
    ``P[X > X+_per]``, ``P[p < p-_est(X)]`` and ``P[p > p+_est(X)]``.
    Out-of-domain information-geometry entries count as no violation.
    """
    pmf = _k.pmf_vector(float(n), float(p))
    xs = np.arange(n + 1)
    lo, hi = interval_limits_all(n, alpha, method, tol)
    out = {
        "interval_lower": float(pmf[p < lo].sum()),
        "interval_upper": float(pmf[p > hi].sum()),
    }
    model = BinomialModel(n, p)
    try:
        out["percent_point_lower"] = float(pmf[xs < percent_point_lower(model, alpha, method, tol)].sum())
    except MethodDomainError:
        pass
    try:
        out["percent_point_upper"] = float(pmf[xs > percent_point_upper(model, alpha, method, tol)].sum())
    except MethodDomainError:
        pass
    return out
