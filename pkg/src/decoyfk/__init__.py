"""Finite-key decoy-state BB84 estimation with exact Chernoff intervals."""

from ._backend import COMPILED
from .channel_model import ChannelParams, expected_tallies, sample_tallies
from .decoy_estimator import ObservedTallies, PulseEnsemble, Tally, estimate
from .errors import (ConfigParseError, DecoyFKError, DomainError, InsufficientCounts, NumericalFailure,
                     PreconditionError, ValidationError)
from .key_rate import KeyRateResult, asymptotic_key_rate, finite_key_length, key_rate
from .optimizer import max_secure_distance, optimize_protocol
from .stat_bounds import BoundMethod, FailureProbability, MeanBounds, mean_bounds

__version__ = "0.1.0"

__all__ = [
    "COMPILED", "ChannelParams", "expected_tallies", "sample_tallies", "ObservedTallies", "PulseEnsemble",
    "Tally", "estimate", "ConfigParseError", "DecoyFKError", "DomainError", "InsufficientCounts",
    "NumericalFailure", "PreconditionError", "ValidationError", "KeyRateResult", "asymptotic_key_rate",
    "finite_key_length", "key_rate", "max_secure_distance", "optimize_protocol", "BoundMethod",
    "FailureProbability", "MeanBounds", "mean_bounds",
]
