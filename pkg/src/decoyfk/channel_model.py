"""Fiber-channel simulation of decoy-state tallies.

Detection and error gains follow the standard Eve-free model with
background yield ``Y0`` (error rate 1/2), misalignment ``e_d`` and total
transmittance ``eta``.  Both parties pick basis Z with probability
``basis_prob``, so a pulse survives sifting in basis g with probability
``q_g ** 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, Tuple

import numpy as np

from .decoy_estimator import BASES, ObservedTallies, PulseEnsemble, Tally
from .errors import ValidationError

BACKGROUND_ERROR = 0.5


@dataclass(frozen=True)
class ChannelParams:
    detector_efficiency: float = 0.045
    background_yield: float = 1.7e-6
    misalignment: float = 0.033
    loss_coefficient: float = 0.21  # dB/km
    distance: float = 0.0  # km

    def __post_init__(self):
        for name in ("detector_efficiency", "background_yield", "misalignment"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must be a probability, got {v!r}", field=name)
        if not self.loss_coefficient >= 0.0:
            raise ValidationError("loss_coefficient must be non-negative", field="loss_coefficient")
        if not self.distance >= 0.0:
            raise ValidationError("distance must be non-negative", field="distance")

    def at(self, distance: float) -> "ChannelParams":
        return replace(self, distance=float(distance))


def total_transmittance(params: ChannelParams) -> float:
    return params.detector_efficiency * 10.0 ** (-params.loss_coefficient * params.distance / 10.0)


def gain_and_qber(mu_a: float, eta: float, y0: float, ed: float) -> Tuple[float, float]:
    """Gain ``Q`` and error gain ``E*Q`` of a coherent state of intensity ``mu_a``."""
    q = y0 + (1.0 - y0) * -math.expm1(-eta * mu_a)
    return q, BACKGROUND_ERROR * y0 + ed * (q - y0)


def photon_yield_and_error(i: int, eta: float, y0: float, ed: float) -> Tuple[float, float]:
    """Yield ``Y_i`` and error yield ``e_i Y_i`` of the ``i``-photon channel."""
    if i < 0:
        raise ValueError("photon number must be non-negative")
    y = 1.0 - (1.0 - y0) * (1.0 - eta) ** i
    return y, BACKGROUND_ERROR * y0 + ed * (y - y0)


def _sift(basis_prob: float) -> Dict[str, float]:
    if not 0.0 <= basis_prob <= 1.0:
        raise ValidationError(f"basis_prob must be a probability, got {basis_prob!r}", field="basis_prob")
    return {"Z": basis_prob ** 2, "X": (1.0 - basis_prob) ** 2}


def expected_tallies(ensemble: PulseEnsemble, params: ChannelParams,
                     basis_prob: float = 0.5) -> ObservedTallies:
    """Deterministic tallies equal to their expectation values."""
    eta = total_transmittance(params)
    sift = _sift(basis_prob)
    counts = {}
    for basis in BASES:
        for state, mu_a, q_a in ensemble.states:
            pulses = ensemble.total_pulses * q_a * sift[basis]
            q, eq = gain_and_qber(mu_a, eta, params.background_yield, params.misalignment)
            counts[(basis, state)] = Tally(pulses, pulses * q, pulses * eq)
    return ObservedTallies(counts)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_tallies(ensemble: PulseEnsemble, params: ChannelParams, basis_prob: float = 0.5,
                   seed=None) -> ObservedTallies:
    """Binomially sampled tallies; identical for identical seeds."""
    rng = _rng(seed)
    eta = total_transmittance(params)
    sift = _sift(basis_prob)
    counts = {}
    for basis in BASES:
        for state, mu_a, q_a in ensemble.states:
            pulses = int(round(ensemble.total_pulses * q_a * sift[basis]))
            q, eq = gain_and_qber(mu_a, eta, params.background_yield, params.misalignment)
            det = int(rng.binomial(pulses, q)) if pulses > 0 and q > 0.0 else 0
            err = int(rng.binomial(det, min(eq / q, 1.0))) if det > 0 else 0
            counts[(basis, state)] = Tally(pulses, det, err)
    return ObservedTallies(counts)


@dataclass(frozen=True)
class SampleTruth:
    """Hidden single-photon quantities of a photon-resolved sample, per basis."""

    signal_single_photon_detections: Dict[str, int]
    signal_single_photon_phase_errors: Dict[str, int]

    def phase_error_rate(self, basis: str) -> float:
        m = self.signal_single_photon_detections[basis]
        return self.signal_single_photon_phase_errors[basis] / m if m else 0.0


def sample_tallies_with_truth(ensemble: PulseEnsemble, params: ChannelParams, basis_prob: float = 0.5,
                              seed=None, max_photons: int = 40) -> Tuple[ObservedTallies, SampleTruth]:
    """Sample tallies photon number by photon number, keeping the hidden truth.

    The photon-number split of each state's pulses is multinomial with
    Poisson weights (tail lumped into ``max_photons``); detections and
    errors per photon number follow the ``i``-photon yields.  The
    single-photon phase errors of the signal state are drawn at the
    single-photon error rate, which equals the phase-error rate of this
    symmetric channel.
    """
    rng = _rng(seed)
    eta = total_transmittance(params)
    y0, ed = params.background_yield, params.misalignment
    sift = _sift(basis_prob)
    yields = [photon_yield_and_error(i, eta, y0, ed) for i in range(max_photons + 1)]
    counts = {}
    m1s, ph1s = {}, {}
    for basis in BASES:
        for state, mu_a, q_a in ensemble.states:
            pulses = int(round(ensemble.total_pulses * q_a * sift[basis]))
            weights = np.array([math.exp(-mu_a + i * math.log(mu_a) - math.lgamma(i + 1)) if mu_a > 0
                                else float(i == 0) for i in range(max_photons + 1)])
            weights[-1] = max(0.0, 1.0 - weights[:-1].sum())
            split = rng.multinomial(pulses, weights / weights.sum())
            det_total = err_total = 0
            for i, n_i in enumerate(split):
                if n_i == 0:
                    continue
                y_i, ey_i = yields[i]
                d = int(rng.binomial(n_i, y_i))
                e = int(rng.binomial(d, ey_i / y_i)) if d else 0
                det_total += d
                err_total += e
                if i == 1 and state == "signal":
                    m1s[basis] = d
                    ph1s[basis] = int(rng.binomial(d, ey_i / y_i)) if d else 0
            m1s.setdefault(basis, 0)
            ph1s.setdefault(basis, 0)
            counts[(basis, state)] = Tally(pulses, det_total, err_total)
    return ObservedTallies(counts), SampleTruth(m1s, ph1s)
