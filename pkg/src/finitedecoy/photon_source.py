"""Photon-number expansion coefficients of coherent pulses.

A phase-randomized coherent pulse of intensity ``mu`` emits ``n`` photons
with probability ``e^{-mu} mu^n / n!``.  When the intensity itself fluctuates
according to a law ``P``, the relevant coefficients are the moments
``E[mu^n e^{-mu}]``.  The analysis only needs the vacuum, single-photon and
lumped multi-photon weights::

    m0 = E[e^{-mu}],  m1 = E[mu e^{-mu}],  m2 = E[mu^2 e^{-mu}],
    omega2 = (1 - m0 - m1) / m2

so that ``m0 + m1 + omega2 * m2 = 1``.

Gaussian intensities ``mu ~ N(mean, (t * mean)^2)`` have closed forms,
obtained by completing the square::

    E[mu^n e^{-mu}] = exp((s^2 - 2 mean) / 2) * E[Y^n],  Y ~ N(mean - s^2, s^2)

The Gaussian admits negative intensities with tiny probability; the closed
forms integrate over the whole real line and are used as is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

__all__ = [
    "SourceMoments",
    "Fixed",
    "Gaussian",
    "Moments",
    "IntensityLaw",
    "MomentNegativeError",
    "DegenerateSourceError",
    "AssumptionViolatedError",
    "moments",
    "omega2",
    "omega3_fixed",
    "raw_moment",
    "Omega3",
    "omega3_moments",
    "Dominance",
    "decoy_dominance_check",
]


class MomentNegativeError(ValueError):
    """Gaussian law with ``mean - sigma^2 <= 0``: the model leaves the physical regime."""


class DegenerateSourceError(ValueError):
    """Multi-photon moment vanishes so ``omega2`` is undefined."""


class AssumptionViolatedError(ValueError):
    """The decoy dominance assumption fails for some photon number."""


@dataclass(frozen=True)
class SourceMoments:
    """``E[e^{-mu}]``, ``E[mu e^{-mu}]`` and ``E[mu^2 e^{-mu}]`` of one intensity law."""

    m0: float
    m1: float
    m2: float
    label: str = ""

    def __post_init__(self):
        if not 0.0 < self.m0 <= 1.0:
            raise ValueError(f"m0 must lie in (0, 1], got {self.m0!r}")
        if self.m1 < 0.0 or self.m2 < 0.0:
            raise ValueError("m1 and m2 must be nonnegative")
        if self.m0 + self.m1 > 1.0:
            raise ValueError("m0 + m1 exceeds 1")

    @property
    def omega2(self) -> float:
        return omega2(self)


@dataclass(frozen=True)
class Fixed:
    """Constant intensity ``mu``."""

    mu: float

    def __post_init__(self):
        if not self.mu > 0.0:
            raise ValueError(f"intensity must be positive, got {self.mu!r}")

    @property
    def mean(self) -> float:
        return self.mu


@dataclass(frozen=True)
class Gaussian:
    """Intensity ``N(mean, (t * mean)^2)``."""

    mean: float
    t: float = 0.0

    def __post_init__(self):
        if not self.mean > 0.0:
            raise ValueError(f"mean intensity must be positive, got {self.mean!r}")
        if not self.t >= 0.0:
            raise ValueError(f"relative std must be nonnegative, got {self.t!r}")

    @property
    def sigma(self) -> float:
        return self.mean * self.t


@dataclass(frozen=True)
class Moments:
    """A law known only through its first three weighted moments."""

    moments: SourceMoments

    @property
    def mean(self) -> float:
        # E[mu] is not recoverable; the Poisson ratio m1/m0 is the natural proxy
        return self.moments.m1 / self.moments.m0


IntensityLaw = Union[Fixed, Gaussian, Moments]


def _gauss_shift(law: Gaussian):
    s2 = law.sigma**2
    shift = law.mean - s2
    if law.t > 0.0 and shift <= 0.0:
        raise MomentNegativeError(
            f"Gaussian(mean={law.mean}, t={law.t}) has mean - sigma^2 = {shift} <= 0"
        )
    return math.exp((s2 - 2.0 * law.mean) / 2.0), shift, s2


def moments(law: IntensityLaw) -> SourceMoments:
    """Vacuum, single- and two-photon weights of ``law``.

    Examples
    --------
    >>> m = moments(Fixed(0.1))
    >>> round(m.m1 / m.m0, 12)
    0.1
    """
    if isinstance(law, Moments):
        return law.moments
    if isinstance(law, Fixed):
        e = math.exp(-law.mu)
        return SourceMoments(e, law.mu * e, law.mu**2 * e, label=f"fixed({law.mu})")
    if isinstance(law, Gaussian):
        if law.t == 0.0:
            return moments(Fixed(law.mean))
        scale, shift, s2 = _gauss_shift(law)
        return SourceMoments(
            scale,
            scale * shift,
            scale * (shift * shift + s2),
            label=f"gaussian({law.mean},{law.t})",
        )
    raise TypeError(f"unsupported intensity law: {law!r}")


def _series_tail(mu: float, start: int) -> float:
    # sum_{n>=start} mu^(n-2) / n!
    if mu > 1.0:
        head = sum(mu**n / math.factorial(n) for n in range(start))
        return (math.exp(mu) - head) / mu**2
    term = mu ** (start - 2) / math.factorial(start)
    total = 0.0
    n = start
    while term > 0.0 and term > 1e-18 * total:
        total += term
        n += 1
        term *= mu / n
    return total


def omega2(m) -> float:
    """``(1 - m0 - m1) / m2``; for a fixed intensity this is ``(e^mu - 1 - mu) / mu^2``.

    Parameters
    ----------
    m : SourceMoments or IntensityLaw
        A ``Fixed`` law is evaluated by its power series, which avoids the
        cancellation in ``1 - m0 - m1`` at small intensities.

    Raises
    ------
    DegenerateSourceError
        If ``m2 == 0``.
    """
    if isinstance(m, Fixed):
        return _series_tail(m.mu, 2)
    if isinstance(m, Gaussian) and m.t == 0.0:
        return _series_tail(m.mean, 2)
    if not isinstance(m, SourceMoments):
        m = moments(m)
    if m.m2 <= 0.0:
        raise DegenerateSourceError("m2 = 0, omega2 undefined")
    return (1.0 - m.m0 - m.m1) / m.m2


def omega3_fixed(mu1: float, mu2: float) -> float:
    """``(e^mu2 - 1 - mu2 - mu2^2/2)/mu2^2 - (e^mu1 - 1 - mu1 - mu1^2/2)/mu1^2``.

    Raises
    ------
    ValueError
        If ``mu1 >= mu2`` or either is nonpositive.
    """
    if not 0.0 < mu1 < mu2:
        raise ValueError(f"need 0 < mu1 < mu2, got mu1={mu1}, mu2={mu2}")
    return _series_tail(mu2, 3) - _series_tail(mu1, 3)


def raw_moment(law: IntensityLaw, n: int) -> float:
    """``E[mu^n e^{-mu}]`` for a fixed or Gaussian law."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if isinstance(law, Fixed):
        return math.exp(-law.mu) * law.mu**n
    if isinstance(law, Gaussian):
        if law.t == 0.0:
            return raw_moment(Fixed(law.mean), n)
        scale, shift, s2 = _gauss_shift(law)
        prev, cur = 0.0, 1.0
        for j in range(1, n + 1):
            prev, cur = cur, shift * cur + (j - 1) * s2 * prev
        return scale * cur
    raise TypeError("higher moments need a Fixed or Gaussian law")


def _abs_gauss_moment(m: float, s: float, n: int) -> float:
    # upper bound on E|m + s G|^n via the binomial expansion of (|m| + s|G|)^n
    total = 0.0
    for j in range(n + 1):
        ag = 2.0 ** (j / 2.0) * math.gamma((j + 1) / 2.0) / math.sqrt(math.pi)
        total += math.comb(n, j) * abs(m) ** (n - j) * s**j * ag
    return total


def _remainder(law: IntensityLaw, k: int) -> float:
    """Bound on ``sum_{n>k} |E[mu^n e^{-mu}]| / n!``."""
    if isinstance(law, Gaussian) and law.t > 0.0:
        s = law.sigma
        direct = _abs_gauss_moment(law.mean, s, k + 1)
        tilted = math.exp(2.0 * s * s - 2.0 * law.mean) * _abs_gauss_moment(
            law.mean - 2.0 * s * s, s, k + 1
        )
        return (direct + tilted) / math.factorial(k + 1)
    mu = law.mu if isinstance(law, Fixed) else law.mean
    return mu ** (k + 1) / math.factorial(k + 1)


@dataclass(frozen=True)
class Dominance:
    """Outcome of :func:`decoy_dominance_check`."""

    passed: bool
    first_failure: int | None
    n_max: int


def decoy_dominance_check(law1: IntensityLaw, law2: IntensityLaw, n_max: int = 50) -> Dominance:
    """Check ``E2[n] E1[2] >= E1[n] E2[2]`` for ``n = 3..n_max``.

    ``Ei[n]`` denotes ``E[mu_i^n e^{-mu_i}]``.  Only finitely many ``n`` are
    examined, so a pass is evidence rather than proof.
    """
    if n_max < 3:
        raise ValueError("n_max must be at least 3")
    e12 = raw_moment(law1, 2)
    e22 = raw_moment(law2, 2)
    for n in range(3, n_max + 1):
        if raw_moment(law2, n) * e12 < raw_moment(law1, n) * e22:
            return Dominance(False, n, n_max)
    return Dominance(True, None, n_max)


@dataclass(frozen=True)
class Omega3:
    """Truncated series value and a bound on the neglected tail."""

    value: float
    remainder: float


def omega3_moments(law1: IntensityLaw, law2: IntensityLaw, n_max: int = 60) -> Omega3:
    """``sum_{n>=3} (E2[n] E1[2] - E1[n] E2[2]) / (n! E1[2])`` truncated at ``n_max``.

    For fixed intensities the exact value is
    ``e^{-mu2} mu2^2 * omega3_fixed(mu1, mu2)``, which makes the expansion of
    the ``mu2`` pulse sum to one.

    Raises
    ------
    AssumptionViolatedError
        If :func:`decoy_dominance_check` fails up to ``n_max``.
    """
    dom = decoy_dominance_check(law1, law2, max(n_max, 3))
    if not dom.passed:
        raise AssumptionViolatedError(f"dominance fails at n={dom.first_failure}")
    e12 = raw_moment(law1, 2)
    e22 = raw_moment(law2, 2)
    total = 0.0
    for n in range(3, n_max + 1):
        total += (raw_moment(law2, n) * e12 - raw_moment(law1, n) * e22) / (
            math.factorial(n) * e12
        )
    rem = _remainder(law2, n_max) + (e22 / e12) * _remainder(law1, n_max)
    return Omega3(total, rem)
