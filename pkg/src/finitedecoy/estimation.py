"""Sacrifice bit-length for finite-length decoy BB84.

The pipeline turns observed detection counts into the number ``S`` of bits
that privacy amplification must remove:

1. interval-estimate the expected counts ``M0..M3``;
2. lower percent points of the photon-number partition ``N-hat``;
3. solve the decoy linear system for the vacuum rate ``q0``, the
   single-photon phase-error-free rate ``a`` and phase-error rate ``b``;
4. lower percent points of the vacuum and single-photon raw-key counts
   ``J0``, ``J1`` and an upper bound ``r`` on the single-photon phase-error
   ratio;
5. leaked information ``phi2 = Ms - J0 - J1 (1 - h(min(r, 1/2)))``;
6. ``S = ceil(phi2) + 2 beta + 5`` when the three sanity conditions hold,
   ``S = code_dim`` (abort) otherwise.

Two failure-probability schedules are provided (``NON_IMPROVED`` and
``IMPROVED``).  Conditions 2 and 3 quantify over the partition box
``Omega1`` and are certified with outward-rounded interval arithmetic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

from . import _kernels as _k
from .interval import Interval, ZeroDivisionInterval
from .photon_source import (
    Fixed,
    IntensityLaw,
    SourceMoments,
    moments,
    omega2,
)
from .stats_bounds import (
    DEFAULT_TOL,
    BoundMethod,
    Tolerance,
    binary_entropy,
    resolve_method,
)

__all__ = [
    "Variant",
    "ProtocolParams",
    "ObservedCounts",
    "CountsError",
    "EpsilonSchedule",
    "CountEstimates",
    "Partition",
    "PartitionBox",
    "ChannelEstimates",
    "ConditionReport",
    "SacrificeResult",
    "ConditionViolated",
    "VacuumAdjustError",
    "NumericalError",
    "step1_counts",
    "step2_partition",
    "step3_channel",
    "step4_rawkey",
    "step5_leak",
    "step6_sacrifice",
    "build_omega1",
    "check_condition1",
    "check_condition2",
    "check_condition3",
    "vacuum_adjust_q0",
    "existing_method_q1",
    "ExistingComparison",
    "compare_existing",
    "pipeline",
]


class ConditionViolated(ValueError):
    """A pipeline sanity condition fails; the protocol must abort."""


class VacuumAdjustError(ValueError):
    """Observed vacuum count is below the contamination percent point."""


class NumericalError(ArithmeticError):
    """A bound evaluation produced a non-finite value."""


class CountsError(ValueError):
    """Observed counts violate a structural invariant."""


class Variant(enum.Enum):
    NON_IMPROVED = "non-improved"
    IMPROVED = "improved"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower().replace("_", "-")
        for member in cls:
            if text == member.value:
                return member
        raise ValueError(f"unknown variant: {value!r}")


# ---------------------------------------------------------------------------
# data model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProtocolParams:
    """Protocol design choices.

    Attributes
    ----------
    beta : int
        Security exponent; the key is ``2^-beta``-secure.
    law1, law2 : IntensityLaw
        Intensity laws of the weaker and stronger pulses.
    N0, N1, N2, Ns : int
        Numbers of vacuum, ``mu1``, ``mu2`` and raw-key pulses sent.
    signal_index : {1, 2}
        Which intensity generates raw keys.
    eta : float
        Error-correction inefficiency.
    code_dim : int or None
        Sacrifice length reported on abort; ``None`` means ``Ms``.
    """

    beta: int
    law1: IntensityLaw
    law2: IntensityLaw
    N0: int
    N1: int
    N2: int
    Ns: int
    signal_index: int = 2
    eta: float = 1.1
    code_dim: int | None = None

    def __post_init__(self):
        if int(self.beta) != self.beta or self.beta < 1:
            raise ValueError("beta must be a positive integer")
        if 2 * self.beta + 8 > 1000:
            raise ValueError("beta too large for double-precision tail probabilities")
        for name in ("N0", "N1", "N2", "Ns"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.signal_index not in (1, 2):
            raise ValueError("signal_index must be 1 or 2")
        if not self.eta >= 1.0:
            raise ValueError("eta must be at least 1")
        if self.code_dim is not None and self.code_dim < 1:
            raise ValueError("code_dim must be positive")
        m1, m2 = _law_mean(self.law1), _law_mean(self.law2)
        if not m1 < m2:
            raise ValueError(f"law1 mean {m1} must be below law2 mean {m2}")

    @property
    def signal_law(self) -> IntensityLaw:
        return self.law2 if self.signal_index == 2 else self.law1


def _law_mean(law) -> float:
    return law.mu if isinstance(law, Fixed) else law.mean


@dataclass(frozen=True)
class ObservedCounts:
    """Detection counts; ``M1``/``M2`` are phase-error-free, ``M3``/``M4`` phase-error."""

    Ms: int
    M0: int
    M1: int
    M2: int
    M3: int
    M4: int = 0

    def __post_init__(self):
        for name in ("Ms", "M0", "M1", "M2", "M3", "M4"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise CountsError(f"{name} must be a nonnegative integer, got {v!r}")

    def validate(self, params: ProtocolParams) -> None:
        """Raise :class:`CountsError` naming the first violated invariant."""
        checks = (
            (self.M0 <= params.N0, "M0 <= N0"),
            (self.M1 + self.M3 <= params.N1, "M1 + M3 <= N1"),
            (self.M2 + self.M4 <= params.N2, "M2 + M4 <= N2"),
            (self.Ms <= params.Ns, "Ms <= Ns"),
        )
        for ok, text in checks:
            if not ok:
                raise CountsError(f"counts violate {text}")


@dataclass(frozen=True)
class EpsilonSchedule:
    """Failure probabilities of the individual estimation steps."""

    eps_M0: float
    eps_M1: float
    eps_M2: float
    eps_M3: float
    eps_N: float
    eps_J0: float
    eps_J1: float
    eps_r: float

    def __post_init__(self):
        for name in self.names():
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v!r}")

    @staticmethod
    def names():
        return ("eps_M0", "eps_M1", "eps_M2", "eps_M3", "eps_N", "eps_J0", "eps_J1", "eps_r")

    def log(self, name: str) -> float:
        return math.log(getattr(self, name))

    @classmethod
    def uniform(cls, eps: float) -> "EpsilonSchedule":
        return cls(*([eps] * 8))

    @classmethod
    def non_improved(cls, beta: int) -> "EpsilonSchedule":
        return cls.uniform(2.0 ** (-2 * beta - 8))

    @classmethod
    def improved(cls, beta: int) -> "EpsilonSchedule":
        wide = 2.0 ** (-beta - 6)
        tight = 2.0 ** (-2 * beta - 7)
        return cls(
            eps_M0=wide, eps_M1=tight, eps_M2=tight, eps_M3=tight,
            eps_N=wide, eps_J0=wide, eps_J1=wide, eps_r=tight,
        )

    @classmethod
    def for_variant(cls, variant, beta: int) -> "EpsilonSchedule":
        if Variant.parse(variant) is Variant.IMPROVED:
            return cls.improved(beta)
        return cls.non_improved(beta)


@dataclass(frozen=True)
class CountEstimates:
    """Interval estimates of the expected counts (``M4`` only for the comparison)."""

    M0: float
    M1: float
    M2: float
    M3: float
    M4: float | None = None


@dataclass(frozen=True)
class Partition:
    """A point ``(N1^0, N1^1, N2^0, N2^1, N2^2)`` of the partition space."""

    N1_0: float
    N1_1: float
    N2_0: float
    N2_1: float
    N2_2: float

    def N1_2(self, N1: float) -> float:
        return N1 - self.N1_0 - self.N1_1


@dataclass(frozen=True)
class PartitionBox:
    """The box ``Omega1`` of plausible partitions."""

    N1_0: Interval
    N1_1: Interval
    N2_0: Interval
    N2_1: Interval
    N2_2: Interval
    N1: int
    N2: int

    @staticmethod
    def coords():
        return ("N1_0", "N1_1", "N2_0", "N2_1", "N2_2")

    @property
    def N1_2(self) -> Interval:
        return self.N1 - self.N1_0 - self.N1_1

    @property
    def lower(self) -> Partition:
        return Partition(*(getattr(self, c).lo for c in self.coords()))

    @property
    def upper(self) -> Partition:
        return Partition(*(getattr(self, c).hi for c in self.coords()))

    def contains(self, point: Partition) -> bool:
        return all(getattr(self, c).contains(getattr(point, c)) for c in self.coords())

    def split(self):
        """Halve the coordinate with the largest relative width."""
        def rel(c):
            iv = getattr(self, c)
            return iv.width / max(abs(iv.hi), 1.0)

        c = max(self.coords(), key=rel)
        a, b = getattr(self, c).split()
        return replace(self, **{c: a}), replace(self, **{c: b})


@dataclass(frozen=True)
class ChannelEstimates:
    q0: float
    a1: float
    b1: float


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of one condition; ``margins`` are certified slack values (> 0 passes)."""

    name: str
    passed: bool
    margins: dict = field(default_factory=dict)
    detail: str = ""


@dataclass(frozen=True)
class SacrificeResult:
    J0_hat: float
    J1_hat: float
    r1_hat: float
    phi2_hat: float
    S: int
    conditions: dict
    aborted: bool
    variant: str
    method: str
    schedule: EpsilonSchedule
    counts_hat: CountEstimates | None = None
    channel: ChannelEstimates | None = None
    notes: tuple = ()

    def to_dict(self) -> dict:
        out = {
            "S": self.S,
            "phi2_hat": self.phi2_hat,
            "J0_hat": self.J0_hat,
            "J1_hat": self.J1_hat,
            "r1_hat": self.r1_hat,
            "aborted": self.aborted,
            "variant": self.variant,
            "method": self.method,
            "schedule_log2": {
                n: -math.log2(getattr(self.schedule, n)) for n in EpsilonSchedule.names()
            },
            "conditions": {
                k: {"passed": v.passed, "margins": v.margins, "detail": v.detail}
                for k, v in self.conditions.items()
            },
            "notes": list(self.notes),
        }
        if self.counts_hat is not None:
            out["counts_hat"] = {
                k: getattr(self.counts_hat, k) for k in ("M0", "M1", "M2", "M3")
            }
        if self.channel is not None:
            out["channel"] = {"q0": self.channel.q0, "a1": self.channel.a1, "b1": self.channel.b1}
        return out


# ---------------------------------------------------------------------------
# bound helpers (method resolution, InfoGeo fallback, NaN guard)
# ---------------------------------------------------------------------------


def _bound(fn, n, x, log_alpha, method, tol):
    m = resolve_method(method, n, log_alpha)
    v = fn(float(n), float(x), log_alpha, m.code, tol.abs_tol, tol.rel_tol, tol.max_iter)
    if math.isnan(v) and m is BoundMethod.CHERNOFF_INFO_GEO:
        v = fn(float(n), float(x), log_alpha, BoundMethod.CHERNOFF_KL.code,
               tol.abs_tol, tol.rel_tol, tol.max_iter)
    if not math.isfinite(v):
        raise NumericalError(f"non-finite bound for N={n}, x={x}")
    return v


def _pp_lo(n, p, la, method, tol):
    return _bound(_k.pp_lower, n, min(max(p, 0.0), 1.0), la, method, tol)


def _pp_hi(n, p, la, method, tol):
    return _bound(_k.pp_upper, n, min(max(p, 0.0), 1.0), la, method, tol)


def _est_lo(n, k, la, method, tol):
    return n * _bound(_k.int_lower, n, k, la, method, tol)


def _est_hi(n, k, la, method, tol):
    return n * _bound(_k.int_upper, n, k, la, method, tol)


def _method_name(method) -> str:
    if method is None or (isinstance(method, str) and method.lower() == "auto"):
        return "auto"
    return BoundMethod.parse(method).value


# ---------------------------------------------------------------------------
# steps
# ---------------------------------------------------------------------------


def step1_counts(params: ProtocolParams, counts: ObservedCounts, sched: EpsilonSchedule,
                 method="auto", tol: Tolerance = DEFAULT_TOL,
                 with_m4: bool = False) -> CountEstimates:
    """Interval estimates of the expected counts.

    Lower limits for ``M0``, ``M1`` (the leak decreases in them), upper limits
    for ``M2``, ``M3``.  With ``with_m4`` an upper limit for ``M4`` at
    ``eps_M2`` is added for the existing-method comparison.
    """
    p = params
    m4 = None
    if with_m4:
        m4 = _est_hi(p.N2, counts.M4, sched.log("eps_M2"), method, tol)
    return CountEstimates(
        M0=_est_lo(p.N0, counts.M0, sched.log("eps_M0"), method, tol),
        M1=_est_lo(p.N1, counts.M1, sched.log("eps_M1"), method, tol),
        M2=_est_hi(p.N2, counts.M2, sched.log("eps_M2"), method, tol),
        M3=_est_hi(p.N1, counts.M3, sched.log("eps_M3"), method, tol),
        M4=m4,
    )


def _coefficients(mom1: SourceMoments, mom2: SourceMoments, w2: float | None):
    if w2 is None:
        w2 = omega2(mom1)
    return (mom1.m0, mom1.m1, mom2.m0, mom2.m1, w2 * mom2.m2)


def build_omega1(params: ProtocolParams, mom1: SourceMoments, mom2: SourceMoments,
                 sched: EpsilonSchedule, method="auto", tol: Tolerance = DEFAULT_TOL,
                 w2: float | None = None) -> PartitionBox:
    """Box of partitions between the lower and upper percent points at ``eps_N``.

    ``w2`` is the multi-photon weight of the ``mu1`` law; it defaults to
    ``omega2(mom1)``.
    """
    la = sched.log("eps_N")
    coeffs = _coefficients(mom1, mom2, w2)
    trials = (params.N1, params.N1, params.N2, params.N2, params.N2)
    ivs = [
        Interval(_pp_lo(n, c, la, method, tol), _pp_hi(n, c, la, method, tol))
        for n, c in zip(trials, coeffs)
    ]
    return PartitionBox(*ivs, N1=params.N1, N2=params.N2)


def step2_partition(params: ProtocolParams, mom1: SourceMoments, mom2: SourceMoments,
                    sched: EpsilonSchedule, method="auto", tol: Tolerance = DEFAULT_TOL,
                    w2: float | None = None) -> Partition:
    """Lower percent points of the five partition counts at ``eps_N``."""
    la = sched.log("eps_N")
    coeffs = _coefficients(mom1, mom2, w2)
    trials = (params.N1, params.N1, params.N2, params.N2, params.N2)
    return Partition(*(_pp_lo(n, c, la, method, tol) for n, c in zip(trials, coeffs)))


def _denominator(N1_1, N2_2, N2_1, N1_2):
    return N1_1 * N2_2 - N2_1 * N1_2


def step3_channel(params: ProtocolParams, Mh: CountEstimates, Nh: Partition,
                  q0: float | None = None) -> ChannelEstimates:
    """Solve the decoy system for ``(q0, a, b)`` with ``[.]+`` clamps.

    Raises
    ------
    ConditionViolated
        If the determinant ``N1^1 N2^2 - N2^1 N1^2`` is not positive.
    """
    if q0 is None:
        q0 = Mh.M0 / params.N0
    N1_2 = Nh.N1_2(params.N1)
    det = _denominator(Nh.N1_1, Nh.N2_2, Nh.N2_1, N1_2)
    if not det > 0.0:
        raise ConditionViolated(f"nonpositive determinant {det}")
    x1 = Mh.M1 - q0 * Nh.N1_0 / 2.0
    x2 = Mh.M2 - q0 * Nh.N2_0 / 2.0
    a = (Nh.N2_2 * x1 - N1_2 * x2) / det
    if not Nh.N1_1 > 0.0:
        raise ConditionViolated("no single-photon pulses in the mu1 partition")
    b = (Mh.M3 - q0 * Nh.N1_0 / 2.0) / Nh.N1_1
    return ChannelEstimates(q0=q0, a1=max(a, 0.0), b1=max(b, 0.0))


def step4_rawkey(params: ProtocolParams, est: ChannelEstimates, mom_s: SourceMoments,
                 sched: EpsilonSchedule, method="auto", tol: Tolerance = DEFAULT_TOL):
    """Return ``(J0, J1, r)``: vacuum and single-photon raw-key counts, phase-error bound.

    ``r`` is ``X+_per(n, b/(a+b), eps_r) / n`` with ``n = floor(J1)``; it is
    1/2 when ``n == 0`` or ``a + b == 0``.
    """
    Ns = params.Ns
    J0 = _pp_lo(Ns, mom_s.m0 * est.q0, sched.log("eps_J0"), method, tol)
    rate = est.a1 + est.b1
    J1 = _pp_lo(Ns, mom_s.m1 * rate, sched.log("eps_J1"), method, tol)
    n = math.floor(J1)
    if rate <= 0.0 or n <= 0:
        return J0, J1, 0.5
    r = _pp_hi(n, est.b1 / rate, sched.log("eps_r"), method, tol) / n
    return J0, J1, min(r, 1.0)


def step5_leak(Ms: int, J0: float, J1: float, r: float) -> float:
    """``Ms - J0 - J1 (1 - h(min(r, 1/2)))``, clamped at zero."""
    phi = Ms - J0 - J1 * (1.0 - binary_entropy(min(r, 0.5)))
    return max(phi, 0.0)


def step6_sacrifice(params: ProtocolParams, phi2: float, conditions_ok: bool, Ms: int) -> int:
    """``ceil(phi2) + 2 beta + 5`` clamped to ``[0, Ms]``; ``code_dim`` on abort."""
    if not conditions_ok:
        return params.code_dim if params.code_dim is not None else Ms
    S = math.ceil(phi2) + 2 * params.beta + 5
    return int(min(max(S, 0), Ms))


# ---------------------------------------------------------------------------
# conditions
# ---------------------------------------------------------------------------


def check_condition1(box: PartitionBox) -> ConditionReport:
    """The three percent-point inequalities that keep the decoy system well posed.

    Evaluated on the box endpoints; each margin is ``lhs - rhs`` and must be
    strictly positive.
    """
    lo, hi = box.lower, box.upper
    rest = box.N1 - lo.N1_0 - lo.N1_1
    m1 = lo.N1_1 * lo.N2_2 - rest * hi.N2_1
    m2 = lo.N2_2 * lo.N1_0 - rest * hi.N2_0
    if rest > 0.0 and hi.N1_0 > 0.0 and lo.N1_1 > 0.0:
        m3 = lo.N2_2 / rest + lo.N2_0 / hi.N1_0 - 2.0 * hi.N2_1 / lo.N1_1
    elif lo.N1_1 > 0.0:
        m3 = math.inf
    else:
        m3 = -math.inf
    margins = {"ineq1": m1, "ineq2": m2, "ineq3": m3}
    return ConditionReport("condition1", all(v > 0.0 for v in margins.values()), margins)


def _c2_terms(Mh: CountEstimates, q0: float, box: PartitionBox):
    N10, N11, N20, N21, N22 = (box.N1_0, box.N1_1, box.N2_0, box.N2_1, box.N2_2)
    N12 = box.N1_2
    x1 = Mh.M1 - q0 * N10 / 2.0
    x2 = Mh.M2 - q0 * N20 / 2.0
    det = N11 * N22 - N21 * N12
    a = (N22 * x1 - N12 * x2) / det
    return {
        "A1_0": Mh.M2 - q0 * (N20 + N22) / 2.0 - N21 * a,
        "A1_1": x2 - (N22 + N21) * a,
        "A2_1": N12 * a,
        "A2_2": x1 - N11 * a,
        "B1_1": Mh.M3 - q0 * N10 / 2.0,
    }


def _certify(evaluate, box: PartitionBox, depth: int):
    """Certified lower bounds of each named quantity over ``box``.

    ``evaluate`` maps a box to ``{name: Interval}``.  Boxes whose bound is
    not positive are bisected up to ``depth`` times; the returned value per
    name is the minimum certified lower bound over the final cover.  The
    search stops at the first sub-box that cannot be certified, so the
    values of a failing result cover only the part visited.
    """
    try:
        vals = {k: v.lo for k, v in evaluate(box).items()}
    except ZeroDivisionInterval:
        vals = None
    ok = vals is not None and all(v > 0.0 for v in vals.values())
    if ok or depth <= 0:
        return vals
    left, right = box.split()
    a = _certify(evaluate, left, depth - 1)
    if a is None or not all(v > 0.0 for v in a.values()):
        return a
    b = _certify(evaluate, right, depth - 1)
    if b is None:
        return None
    return {k: min(a[k], b[k]) for k in a}


def check_condition2(Mh: CountEstimates, q0: float, box: PartitionBox,
                     refine_depth: int = 0) -> ConditionReport:
    """Certify that A1^0, A1^1, A2^1, A2^2 and B1^1 are positive on all of ``box``.

    Fails when the determinant interval touches zero or any enclosure has a
    nonpositive lower end (after up to ``refine_depth`` box bisections).
    """
    lows = _certify(lambda b: _c2_terms(Mh, q0, b), box, refine_depth)
    if lows is None:
        return ConditionReport("condition2", False, {}, "determinant interval contains zero")
    return ConditionReport("condition2", all(v > 0.0 for v in lows.values()), lows)


def _c3_terms(Mh: CountEstimates, q0: float, box: PartitionBox):
    N10, N11, N20, N21, N22 = (box.N1_0, box.N1_1, box.N2_0, box.N2_1, box.N2_2)
    N12 = box.N1_2
    x1 = Mh.M1 - q0 * N10 / 2.0
    x2 = Mh.M2 - q0 * N20 / 2.0
    a = ((N22 * x1 - N12 * x2) / (N11 * N22 - N21 * N12)).clamp_nonneg()
    b = ((Mh.M3 - q0 * N10 / 2.0) / N11).clamp_nonneg()
    # b/(a+b) <= 1/8  <=>  a - 7b >= 0 with a > 0
    return {"a_lower": a, "slack": Interval(a.lo, a.lo) - 7.0 * b, "b_upper": b}


def check_condition3(Mh: CountEstimates, q0: float, box: PartitionBox,
                     refine_depth: int = 0) -> ConditionReport:
    """Certify ``b / (a + b) <= 1/8`` for every partition in ``box``.

    Uses the equivalent ``7 b <= a`` with ``a > 0``; the reported
    ``ratio_max`` is the certified upper bound on the ratio over the cover.
    """
    lows = _certify_c3(Mh, q0, box, refine_depth)
    if lows is None:
        return ConditionReport("condition3", False, {}, "a + b interval contains zero")
    return ConditionReport("condition3", _c3_ok(lows),
                           {k: lows[k] for k in ("ratio_max", "slack", "a_lower")})


def _c3_ok(vals) -> bool:
    return vals is not None and vals["a_lower"] > 0.0 and vals["slack"] >= 0.0


def _certify_c3(Mh, q0, box, depth):
    try:
        t = _c3_terms(Mh, q0, box)
        a_lo, b_hi = t["a_lower"].lo, t["b_upper"].hi
        ratio = b_hi / (a_lo + b_hi) if a_lo + b_hi > 0.0 else math.inf
        vals = {"a_lower": a_lo, "slack": t["slack"].lo, "ratio_max": ratio}
    except ZeroDivisionInterval:
        vals = None
    if _c3_ok(vals) or depth <= 0:
        return vals
    left, right = box.split()
    a = _certify_c3(Mh, q0, left, depth - 1)
    if not _c3_ok(a):
        return a
    b = _certify_c3(Mh, q0, right, depth - 1)
    if b is None:
        return None
    return {"a_lower": min(a["a_lower"], b["a_lower"]), "slack": min(a["slack"], b["slack"]),
            "ratio_max": max(a["ratio_max"], b["ratio_max"])}


# ---------------------------------------------------------------------------
# vacuum adjustment and existing-method comparison
# ---------------------------------------------------------------------------


def vacuum_adjust_q0(params: ProtocolParams, M0: int, q: float, sched: EpsilonSchedule,
                     method="auto", tol: Tolerance = DEFAULT_TOL) -> float:
    """Vacuum rate when a vacuum pulse turns non-vacuum with probability ``q``.

    ``X = X+_per(N0, q, eps_M0)`` contaminated pulses are removed from both
    the sample and the count (rounded up to an integer), and the upper
    confidence limit of the reduced sample is returned.

    Raises
    ------
    VacuumAdjustError
        If ``M0 < X``.
    """
    if not 0.0 <= q < 1.0:
        raise ValueError("q must lie in [0, 1)")
    la = sched.log("eps_M0")
    x = math.ceil(_pp_hi(params.N0, q, la, method, tol))
    if M0 < x:
        raise VacuumAdjustError(f"M0={M0} below contamination percent point {x}")
    n = params.N0 - x
    if n <= 0:
        raise VacuumAdjustError("no uncontaminated vacuum pulses remain")
    return _bound(_k.int_upper, n, M0 - x, la, method, tol)


def existing_method_q1(Mh: CountEstimates, q0: float, Nh: Partition, N1: int) -> float:
    """Detection rate ``q1`` of single photons from the summed bases.

    ``(N2^2 (M1+M3 - q0 N1^0) - N1^2 (M2+M4 - q0 N2^0)) / det`` where ``q0``
    plays the role of ``M0/N0``.  Requires ``Mh.M4``.
    """
    if Mh.M4 is None:
        raise ValueError("M4 estimate required")
    N1_2 = Nh.N1_2(N1)
    det = _denominator(Nh.N1_1, Nh.N2_2, Nh.N2_1, N1_2)
    if not det > 0.0:
        raise ConditionViolated(f"nonpositive determinant {det}")
    return (Nh.N2_2 * (Mh.M1 + Mh.M3 - q0 * Nh.N1_0)
            - N1_2 * (Mh.M2 + Mh.M4 - q0 * Nh.N2_0)) / det


@dataclass(frozen=True)
class ExistingComparison:
    q1: float
    phi_existing: float
    phi_proposed: float


def compare_existing(params: ProtocolParams, counts: ObservedCounts,
                     sched: EpsilonSchedule | None = None, method="auto",
                     variant=Variant.IMPROVED, tol: Tolerance = DEFAULT_TOL) -> ExistingComparison:
    """Leaked information with ``a = [q1 - b]+`` versus the proposed estimate.

    ``q1`` is computed from a lower limit of ``M1 + M3`` and an upper limit
    of ``M2 + M4``, the total detection counts of the two intensities;
    ``q0``, ``b`` and the partition are shared with the proposed estimate.
    """
    p = params
    if sched is None:
        sched = EpsilonSchedule.for_variant(variant, p.beta)
    Mh = step1_counts(p, counts, sched, method, tol)
    mom1, mom2 = moments(p.law1), moments(p.law2)
    w2 = omega2(p.law1)
    Nh = step2_partition(p, mom1, mom2, sched, method, tol, w2)
    est = step3_channel(p, Mh, Nh)
    # the existing method sees only total detections per intensity, so the
    # sums M1 + M3 and M2 + M4 get their own one-sided limits
    summed = CountEstimates(
        M0=Mh.M0,
        M1=_est_lo(p.N1, counts.M1 + counts.M3, sched.log("eps_M1"), method, tol),
        M2=_est_hi(p.N2, counts.M2 + counts.M4, sched.log("eps_M2"), method, tol),
        M3=0.0,
        M4=0.0,
    )
    q1 = existing_method_q1(summed, est.q0, Nh, p.N1)
    mom_s = moments(p.signal_law)
    old = replace(est, a1=max(q1 - est.b1, 0.0))
    phi_new = step5_leak(counts.Ms, *step4_rawkey(p, est, mom_s, sched, method, tol))
    phi_old = step5_leak(counts.Ms, *step4_rawkey(p, old, mom_s, sched, method, tol))
    return ExistingComparison(q1, phi_old, phi_new)


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------


def pipeline(params: ProtocolParams, counts: ObservedCounts,
             sched: EpsilonSchedule | None = None, method="auto",
             variant=Variant.IMPROVED, adjust: float | None = None,
             theta_set=None, tol: Tolerance = DEFAULT_TOL,
             refine_depth: int = 0) -> SacrificeResult:
    """Run Steps 1-6.

    Parameters
    ----------
    params, counts
        Protocol parameters and observed counts (validated here).
    sched : EpsilonSchedule, optional
        Defaults to the preset of ``variant``.
    method : BoundMethod, str or "auto"
        ``"auto"`` picks exact tails where admissible, Chernoff-KL otherwise.
    variant : Variant
    adjust : float, optional
        Vacuum contamination probability; replaces ``q0`` by
        :func:`vacuum_adjust_q0`.
    theta_set : sequence of (IntensityLaw, IntensityLaw), optional
        Candidate intensity-law pairs when the true law is unknown.  Every
        condition must hold for every pair and the largest leak is used.
    refine_depth : int
        Maximum box bisections when certifying Conditions 2 and 3.

    Returns
    -------
    SacrificeResult
        ``aborted`` is set exactly when some condition fails, in which case
        ``S = code_dim`` (``Ms`` by default).
    """
    p = params
    counts.validate(p)
    variant = Variant.parse(variant)
    if sched is None:
        sched = EpsilonSchedule.for_variant(variant, p.beta)
    notes = []
    conditions = {}
    Mh = step1_counts(p, counts, sched, method, tol)

    q0 = Mh.M0 / p.N0
    if adjust is not None:
        try:
            q0 = vacuum_adjust_q0(p, counts.M0, adjust, sched, method, tol)
            conditions["vacuum"] = ConditionReport("vacuum", True, {"q0": q0})
        except VacuumAdjustError as exc:
            conditions["vacuum"] = ConditionReport("vacuum", False, {}, str(exc))

    thetas = list(theta_set) if theta_set else [(p.law1, p.law2)]
    best = None
    for idx, (law1, law2) in enumerate(thetas):
        tag = "" if len(thetas) == 1 else f"[{idx}]"
        mom1, mom2 = moments(law1), moments(law2)
        w2 = omega2(law1)
        box = build_omega1(p, mom1, mom2, sched, method, tol, w2)
        c1 = check_condition1(box)
        c2 = check_condition2(Mh, q0, box, refine_depth)
        c3 = check_condition3(Mh, q0, box, refine_depth)
        for c in (c1, c2, c3):
            conditions[c.name + tag] = c
        if not (c1.passed and c2.passed and c3.passed):
            continue
        est = step3_channel(p, Mh, box.lower, q0)
        mom_s = mom2 if p.signal_index == 2 else mom1
        J0, J1, r = step4_rawkey(p, est, mom_s, sched, method, tol)
        raw = counts.Ms - J0 - J1 * (1.0 - binary_entropy(min(r, 0.5)))
        phi = max(raw, 0.0)
        if raw < 0.0:
            notes.append(f"phi2{tag} clamped at 0 from {raw}")
        if best is None or phi > best[0]:
            best = (phi, J0, J1, r, est)

    ok = all(c.passed for c in conditions.values())
    if not ok or best is None:
        S = step6_sacrifice(p, 0.0, False, counts.Ms)
        return SacrificeResult(
            J0_hat=math.nan, J1_hat=math.nan, r1_hat=math.nan, phi2_hat=math.nan, S=S,
            conditions=conditions, aborted=True, variant=variant.value,
            method=_method_name(method), schedule=sched, counts_hat=Mh,
            notes=tuple(notes),
        )
    phi, J0, J1, r, est = best
    S = step6_sacrifice(p, phi, True, counts.Ms)
    if math.ceil(phi) + 2 * p.beta + 5 > counts.Ms:
        notes.append("S clamped to Ms; no key remains")
    return SacrificeResult(
        J0_hat=J0, J1_hat=J1, r1_hat=r, phi2_hat=phi, S=S, conditions=conditions,
        aborted=False, variant=variant.value, method=_method_name(method),
        schedule=sched, counts_hat=Mh, channel=est, notes=tuple(notes),
    )
