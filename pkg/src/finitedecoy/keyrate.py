"""Finite-length key rates and parameter sweeps.

``R = (Ms - S - eta h(e) Ms) / Ns`` where ``e`` is the signal-basis error
rate of the channel model.  Aborted runs report ``R = 0``.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

from .channel_sim import ChannelModel, expected_counts, expected_rates, protocol_for_raw_key
from .estimation import ProtocolParams, Variant, pipeline
from .photon_source import Fixed, Gaussian, moments, omega2
from .stats_bounds import binary_entropy

__all__ = [
    "KeyRatePoint",
    "RateSetup",
    "key_rate",
    "asymptotic_rate",
    "sweep",
    "SWEEP_AXES",
]

SWEEP_AXES = ("mu1", "mu2", "t", "Ms", "beta")


@dataclass(frozen=True)
class KeyRatePoint:
    """One evaluated operating point; ``R_raw`` keeps the unclamped rate."""

    mu1: float
    mu2: float
    t: float
    Ms: int
    beta: int
    variant: str
    S: int
    R: float
    aborted: bool
    R_raw: float = 0.0
    Ns: int = 0

    def row(self):
        return (self.mu1, self.mu2, self.t, self.Ms, self.beta, self.variant,
                self.S, self.R, self.aborted)


def _ec_ratio(model: ChannelModel, index: int) -> float:
    r = expected_rates(model)
    return r.s[index] / r.p[index]


def key_rate(model: ChannelModel, params: ProtocolParams, variant=Variant.IMPROVED,
             method="auto", ec_index: int | None = None, Ms: int | None = None,
             refine_depth: int = 0) -> KeyRatePoint:
    """Rate per signal pulse from expected counts.

    Parameters
    ----------
    model : ChannelModel
    params : ProtocolParams
    variant : Variant
    method : BoundMethod, str or "auto"
    ec_index : {1, 2}, optional
        Intensity whose error rate enters the error-correction cost; the
        signal intensity by default.
    Ms : int, optional
        Raw-key length; ``round(p_signal * Ns)`` by default.
    """
    variant = Variant.parse(variant)
    idx = params.signal_index if ec_index is None else ec_index
    counts = expected_counts(model, params, Ms)
    res = pipeline(params, counts, method=method, variant=variant, refine_depth=refine_depth)
    Ms_ = counts.Ms
    raw = (Ms_ - res.S - params.eta * binary_entropy(_ec_ratio(model, idx)) * Ms_) / params.Ns
    R = 0.0 if res.aborted else max(raw, 0.0)
    t = model.law2.t if isinstance(model.law2, Gaussian) else 0.0
    return KeyRatePoint(
        mu1=_mean(model.law1), mu2=_mean(model.law2), t=t, Ms=Ms_, beta=params.beta,
        variant=variant.value, S=res.S, R=R, aborted=res.aborted, R_raw=raw, Ns=params.Ns,
    )


def _mean(law) -> float:
    return law.mu if isinstance(law, Fixed) else law.mean


def asymptotic_rate(model: ChannelModel, signal_index: int = 2, eta: float = 1.1,
                    ec_index: int | None = None) -> float:
    """Infinite-length limit of :func:`key_rate`.

    Every percent point is replaced by its mean, every confidence limit by
    the observed ratio, and the ``2 beta + 5`` overhead is dropped.  The
    value is per signal pulse and may be negative.
    """
    r = expected_rates(model)
    m1, m2 = moments(model.law1), moments(model.law2)
    w2 = omega2(model.law1)
    q0 = r.p[0]
    # unit pulse budgets: the decoy system is homogeneous in N1 and N2
    n10, n11 = m1.m0, m1.m1
    n12 = 1.0 - n10 - n11
    n20, n21, n22 = m2.m0, m2.m1, w2 * m2.m2
    x1 = (r.p[1] - r.s[1]) - q0 * n10 / 2.0
    x2 = (r.p[2] - r.s[2]) - q0 * n20 / 2.0
    a = max((n22 * x1 - n12 * x2) / (n11 * n22 - n21 * n12), 0.0)
    b = max((r.s[1] - q0 * n10 / 2.0) / n11, 0.0)
    ms = m2 if signal_index == 2 else m1
    ratio = b / (a + b) if a + b > 0.0 else 0.5
    kept = ms.m0 * q0 + ms.m1 * (a + b) * (1.0 - binary_entropy(min(ratio, 0.5)))
    idx = signal_index if ec_index is None else ec_index
    return kept - eta * binary_entropy(_ec_ratio(model, idx)) * r.p[signal_index]


@dataclass(frozen=True)
class RateSetup:
    """Operating point defaults: transmission 1e-3, dark counts 4e-7, misalignment 0.03."""

    alpha: float = 1e-3
    p0: float = 4e-7
    s: float = 0.03
    eta: float = 1.1
    beta: int = 80
    mu1: float = 0.1
    mu2: float = 0.5
    t: float = 0.0
    Ms: int = 10**7
    decoy_fraction: float = 0.1
    signal_index: int = 2
    ec_index: int | None = None
    variant: str = "improved"
    method: str = "auto"
    refine_depth: int = 0

    def model(self) -> ChannelModel:
        if self.t > 0.0:
            l1, l2 = Gaussian(self.mu1, self.t), Gaussian(self.mu2, self.t)
        else:
            l1, l2 = Fixed(self.mu1), Fixed(self.mu2)
        return ChannelModel(self.alpha, self.p0, self.s, l1, l2)

    def params(self) -> ProtocolParams:
        return protocol_for_raw_key(self.model(), self.Ms, beta=self.beta,
                                    decoy_fraction=self.decoy_fraction,
                                    signal_index=self.signal_index, eta=self.eta)

    def evaluate(self) -> KeyRatePoint:
        """:func:`key_rate` at this setup, or an aborted point if it is invalid."""
        try:
            model, params = self.model(), self.params()
        except ValueError:
            return KeyRatePoint(self.mu1, self.mu2, self.t, self.Ms, self.beta,
                                Variant.parse(self.variant).value, self.Ms, 0.0, True)
        return key_rate(model, params, self.variant, self.method, self.ec_index,
                        Ms=self.Ms, refine_depth=self.refine_depth)

    def to_dict(self) -> dict:
        return asdict(self)


def _evaluate(setup: RateSetup) -> KeyRatePoint:
    return setup.evaluate()


def sweep(grid: dict, setup: RateSetup = RateSetup(), jobs: int = 1) -> list:
    """Evaluate the cartesian product of ``grid`` over ``setup``.

    Parameters
    ----------
    grid : dict
        Maps axis names from ``SWEEP_AXES`` to sequences of values.  Points
        are ordered with the first listed axis varying slowest.
    setup : RateSetup
        Values for axes not in ``grid``.
    jobs : int
        Worker processes; results keep the input order either way.

    Returns
    -------
    list of KeyRatePoint
        Invalid or aborted points appear with ``R = 0`` and ``aborted = True``.
    """
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("sweep grid must be nonempty")
    unknown = set(grid) - set(SWEEP_AXES)
    if unknown:
        raise ValueError(f"unknown sweep axes: {sorted(unknown)}")
    axes = [a for a in SWEEP_AXES if a in grid]
    setups = []
    for combo in itertools.product(*(grid[a] for a in axes)):
        kw = dict(zip(axes, combo))
        if "Ms" in kw:
            kw["Ms"] = int(kw["Ms"])
        if "beta" in kw:
            kw["beta"] = int(kw["beta"])
        setups.append(replace(setup, **kw))
    if jobs <= 1 or len(setups) == 1:
        return [s.evaluate() for s in setups]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_evaluate, setups, chunksize=max(1, len(setups) // (4 * jobs))))
