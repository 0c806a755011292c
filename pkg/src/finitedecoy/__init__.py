"""Finite-length decoy-state BB84: sacrifice bit-length and key rate.

Modules
-------
stats_bounds
    Binomial percent points and confidence limits (exact, Chernoff-KL,
    Pinsker, information-geometric).
photon_source
    Photon-number moments of fixed and fluctuating intensity laws.
estimation
    The six-step sacrifice pipeline and its sanity conditions.
channel_sim
    Expected and sampled counts from a lossy channel model.
keyrate
    Key rates and parameter sweeps.
"""

from ._jit import JIT_ENABLED
from .channel_sim import ChannelModel, expected_counts, protocol_for_raw_key, sample_counts
from .estimation import (
    EpsilonSchedule,
    ObservedCounts,
    ProtocolParams,
    SacrificeResult,
    Variant,
    pipeline,
)
from .keyrate import KeyRatePoint, RateSetup, asymptotic_rate, key_rate, sweep
from .photon_source import Fixed, Gaussian, Moments, moments, omega2
from .stats_bounds import (
    BinomialModel,
    BoundMethod,
    interval_lower,
    interval_upper,
    percent_point_lower,
    percent_point_upper,
)

__version__ = "0.1.0"

__all__ = [
    "JIT_ENABLED",
    "BinomialModel",
    "BoundMethod",
    "percent_point_lower",
    "percent_point_upper",
    "interval_lower",
    "interval_upper",
    "Fixed",
    "Gaussian",
    "Moments",
    "moments",
    "omega2",
    "ProtocolParams",
    "ObservedCounts",
    "EpsilonSchedule",
    "Variant",
    "SacrificeResult",
    "pipeline",
    "ChannelModel",
    "expected_counts",
    "sample_counts",
    "protocol_for_raw_key",
    "KeyRatePoint",
    "RateSetup",
    "key_rate",
    "asymptotic_rate",
    "sweep",
    "__version__",
]
