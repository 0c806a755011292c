"""Expected and sampled detection counts from a lossy, noisy channel model.

A pulse of intensity ``mu`` is detected with probability
``p = 1 - E[e^{-alpha mu}] + p0`` and produces a phase error with
probability ``s_rate = s (1 - E[e^{-alpha mu}]) + p0 / 2``, where ``alpha`` is
the total transmission, ``p0`` the dark-count probability and ``s`` the
misalignment error fraction.  Both bases share the same rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimation import ObservedCounts, ProtocolParams
from .photon_source import Fixed, Gaussian, IntensityLaw, Moments

__all__ = [
    "ChannelModel",
    "RatePack",
    "attenuation_factor",
    "expected_rates",
    "expected_counts",
    "sample_counts",
    "protocol_for_raw_key",
]


@dataclass(frozen=True)
class ChannelModel:
    """Transmission ``alpha``, dark counts ``p0``, misalignment ``s`` and intensity laws."""

    alpha: float
    p0: float
    s: float
    law1: IntensityLaw
    law2: IntensityLaw

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if not 0.0 <= self.p0 < 1.0:
            raise ValueError(f"p0 must lie in [0, 1), got {self.p0!r}")
        if not 0.0 <= self.s < 0.5:
            raise ValueError(f"s must lie in [0, 1/2), got {self.s!r}")


@dataclass(frozen=True)
class RatePack:
    """Detection rates ``p`` and phase-error rates ``s`` per intensity (index 0 = vacuum)."""

    p: tuple
    s: tuple


def attenuation_factor(law: IntensityLaw | None, alpha: float) -> float:
    """``E[e^{-alpha mu}]``; ``None`` stands for the vacuum."""
    if law is None:
        return 1.0
    if isinstance(law, Fixed):
        return math.exp(-alpha * law.mu)
    if isinstance(law, Gaussian):
        sig = law.sigma
        return math.exp((alpha * alpha * sig * sig - 2.0 * alpha * law.mean) / 2.0)
    if isinstance(law, Moments):
        raise TypeError("a moments-only law does not determine the attenuation factor")
    raise TypeError(f"unsupported intensity law: {law!r}")


def expected_rates(model: ChannelModel) -> RatePack:
    """Rates for the vacuum, ``law1`` and ``law2`` pulses."""
    ps, ss = [], []
    for law in (None, model.law1, model.law2):
        loss = -math.expm1(math.log(attenuation_factor(law, model.alpha)))
        ps.append(loss + model.p0)
        ss.append(model.s * loss + model.p0 / 2.0)
    return RatePack(tuple(ps), tuple(ss))


def protocol_for_raw_key(model: ChannelModel, Ms: int, beta: int = 80,
                         decoy_fraction: float = 0.1, signal_index: int = 2,
                         eta: float = 1.1, code_dim: int | None = None) -> ProtocolParams:
    """Pulse budgets for a target raw-key length.

    ``Ns = round(Ms / p_signal)`` and ``N0 = N1 = N2 = round(decoy_fraction * Ns)``.
    """
    rates = expected_rates(model)
    Ns = int(round(Ms / rates.p[signal_index]))
    Nd = max(int(round(decoy_fraction * Ns)), 1)
    return ProtocolParams(beta=beta, law1=model.law1, law2=model.law2, N0=Nd, N1=Nd, N2=Nd,
                          Ns=Ns, signal_index=signal_index, eta=eta, code_dim=code_dim)


def expected_counts(model: ChannelModel, params: ProtocolParams,
                    Ms: int | None = None) -> ObservedCounts:
    """Counts equal to their expectations, rounded to the nearest integer.

    ``Ms`` defaults to ``round(p_signal * Ns)``.
    """
    r = expected_rates(model)
    p = params
    if Ms is None:
        Ms = int(round(r.p[p.signal_index] * p.Ns))
    return ObservedCounts(
        Ms=int(Ms),
        M0=int(round(r.p[0] * p.N0)),
        M1=int(round((r.p[1] - r.s[1]) * p.N1)),
        M2=int(round((r.p[2] - r.s[2]) * p.N2)),
        M3=int(round(r.s[1] * p.N1)),
        M4=int(round(r.s[2] * p.N2)),
    )


def sample_counts(model: ChannelModel, params: ProtocolParams, seed: int) -> ObservedCounts:
    """Binomially sampled counts, reproducible from ``seed``.

    Each intensity class is split three ways (no error / phase error / not
    detected) with a multinomial draw so that ``M1 + M3 <= N1`` holds.
    """
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) % 2**64))
    r = expected_rates(model)
    p = params

    def split(n, i):
        m = rng.multinomial(n, [r.p[i] - r.s[i], r.s[i], 1.0 - r.p[i]])
        return int(m[0]), int(m[1])

    m1, m3 = split(p.N1, 1)
    m2, m4 = split(p.N2, 2)
    return ObservedCounts(
        Ms=int(rng.binomial(p.Ns, r.p[p.signal_index])),
        M0=int(rng.binomial(p.N0, r.p[0])),
        M1=m1, M2=m2, M3=m3, M4=m4,
    )
