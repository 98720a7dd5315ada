"""Finite-key length from certified single-photon estimates.

Keys come from signal-state detections only.  Per key basis

    K = M1s * (1 - h(e_phase)) - M_signal * f * h(E_signal)

clamped at zero; the rate sums both bases and divides by the pulses sent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Mapping

from . import stat_bounds as sb
from .channel_model import ChannelParams, gain_and_qber, photon_yield_and_error, total_transmittance
from .decoy_estimator import (BASES, ObservedTallies, PulseEnsemble, SinglePhotonEstimate,
                              estimate as estimate_single_photons)
from .errors import DomainError

DEFAULT_EC_INEFFICIENCY = 1.22


@dataclass(frozen=True)
class BasisKey:
    """Key accounting of one basis before and after clamping."""

    privacy_term: float
    ec_cost: float

    @property
    def raw(self) -> float:
        return self.privacy_term - self.ec_cost

    @property
    def bits(self) -> float:
        return max(self.raw, 0.0)


@dataclass(frozen=True)
class KeyRateResult:
    """Certified key bits of both bases and the rate per pulse sent.

    ``raw_key`` keeps the pre-clamp totals so callers can tell a barely
    infeasible point from a hopeless one.
    """

    key_bits_z: float
    key_bits_x: float
    rate: float
    ec_cost_z: float
    ec_cost_x: float
    raw_key_z: float
    raw_key_x: float
    budget: float
    flags: frozenset = field(default_factory=frozenset)
    estimates: Mapping[str, SinglePhotonEstimate] = field(default=None, compare=False, repr=False)

    @property
    def raw_key(self) -> float:
        return self.raw_key_z + self.raw_key_x

    @classmethod
    def zero(cls, flags=frozenset()) -> "KeyRateResult":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, frozenset(flags))


def _check_f(f: float) -> None:
    if not f >= 1.0:
        raise DomainError(f"error-correction inefficiency must be >= 1, got {f!r}")


def basis_key(estimate: SinglePhotonEstimate, tallies: ObservedTallies,
              f: float = DEFAULT_EC_INEFFICIENCY) -> BasisKey:
    _check_f(f)
    sig = tallies.get(estimate.basis, "signal")
    qber = sig.errors / sig.detections if sig.detections > 0 else 0.0
    ec = sig.detections * f * sb.binary_entropy(qber)
    e_ph = estimate.phase_error_upper
    privacy = 0.0 if e_ph >= 0.5 else estimate.m1_signal_lower * (1.0 - sb.binary_entropy(e_ph))
    return BasisKey(privacy, ec)


def finite_key_length(estimate: SinglePhotonEstimate, tallies: ObservedTallies,
                      f: float = DEFAULT_EC_INEFFICIENCY) -> float:
    """Secure bits extractable from the signal detections of ``estimate.basis``."""
    return basis_key(estimate, tallies, f).bits


def key_rate_from_estimates(estimates: Mapping[str, SinglePhotonEstimate], tallies: ObservedTallies,
                            total_pulses: float, f: float = DEFAULT_EC_INEFFICIENCY) -> KeyRateResult:
    keys: Dict[str, BasisKey] = {b: basis_key(estimates[b], tallies, f) for b in BASES}
    flags = set()
    for b in BASES:
        flags.update(estimates[b].flags)
        if keys[b].raw < 0.0:
            flags.add(f"{b}:key-clamped")
    total = keys["Z"].bits + keys["X"].bits
    rate = total / total_pulses if total_pulses > 0 else 0.0
    return KeyRateResult(
        key_bits_z=keys["Z"].bits,
        key_bits_x=keys["X"].bits,
        rate=rate,
        ec_cost_z=keys["Z"].ec_cost,
        ec_cost_x=keys["X"].ec_cost,
        raw_key_z=keys["Z"].raw,
        raw_key_x=keys["X"].raw,
        budget=sum(e.budget_spent for e in estimates.values()),
        flags=frozenset(flags),
        estimates=dict(estimates),
    )


def key_rate(tallies: ObservedTallies, ensemble: PulseEnsemble, eps_step: float,
             method: sb.BoundMethod = sb.BoundMethod.EXACT,
             f: float = DEFAULT_EC_INEFFICIENCY) -> KeyRateResult:
    """Run the estimator on ``tallies`` and turn it into a key rate per pulse."""
    _check_f(f)
    est = estimate_single_photons(tallies, ensemble, eps_step, method)
    return key_rate_from_estimates(est, tallies, ensemble.total_pulses, f)


def asymptotic_key_rate(ensemble: PulseEnsemble, params: ChannelParams,
                        f: float = DEFAULT_EC_INEFFICIENCY, basis_prob: float = 0.5) -> float:
    """Infinite-decoy rate per pulse with exact single-photon yield and error.

    With infinitely many decoys the decoy pulses cost nothing, so every
    pulse counts as a signal pulse; the sifting factor sums both bases.
    """
    _check_f(f)
    eta = total_transmittance(params)
    y0, ed = params.background_yield, params.misalignment
    mu = ensemble.signal_intensity
    q, eq = gain_and_qber(mu, eta, y0, ed)
    y1, e1y1 = photon_yield_and_error(1, eta, y0, ed)
    e_sig = eq / q if q > 0 else 0.0
    e1 = e1y1 / y1 if y1 > 0 else 0.5
    per_signal = mu * math.exp(-mu) * y1 * (1.0 - sb.binary_entropy(e1)) - q * f * sb.binary_entropy(e_sig)
    sift = basis_prob ** 2 + (1.0 - basis_prob) ** 2
    return max(0.0, sift * per_signal)
