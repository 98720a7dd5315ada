"""Vacuum+weak decoy-state estimation of single-photon quantities.

Observed per-state tallies are turned into expectation-value bounds by a
pluggable fluctuation engine, then into a lower bound on the single-photon
yield and an upper bound on the single-photon error gain via the closed
form two-decoy relations.  Each key basis finally gets its signal-state
single-photon count (mean -> observation conversion) and a phase-error
bound drawn from the complementary basis through random sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Tuple

from . import stat_bounds as sb
from .errors import DomainError, InsufficientCounts, ValidationError

BASES = ("Z", "X")
STATES = ("signal", "weak", "vacuum")
STEPS_PER_KEY = 4


def other_basis(basis: str) -> str:
    return "X" if basis == "Z" else "Z"


@dataclass(frozen=True)
class PulseEnsemble:
    """Intensities and mixing shares of the three transmitted states.

    ``vacuum_share`` defaults to the remainder ``1 - signal - weak``.
    """

    signal_intensity: float
    weak_intensity: float
    signal_share: float
    weak_share: float
    total_pulses: float
    vacuum_share: float = None

    def __post_init__(self):
        if self.vacuum_share is None:
            object.__setattr__(self, "vacuum_share", 1.0 - self.signal_share - self.weak_share)
        if not self.signal_intensity > self.weak_intensity > 0.0:
            raise ValidationError(
                f"need mu > nu > 0, got mu={self.signal_intensity!r}, nu={self.weak_intensity!r}",
                field="intensities")
        shares = (self.signal_share, self.weak_share, self.vacuum_share)
        if min(shares) < 0.0 or abs(sum(shares) - 1.0) > 1e-9:
            raise ValidationError(f"state shares must be non-negative and sum to 1, got {shares}",
                                  field="shares")
        if not self.total_pulses >= 0:
            raise ValidationError(f"total pulses must be non-negative, got {self.total_pulses!r}",
                                  field="N")

    def intensity(self, state: str) -> float:
        return {"signal": self.signal_intensity, "weak": self.weak_intensity, "vacuum": 0.0}[state]

    def share(self, state: str) -> float:
        return {"signal": self.signal_share, "weak": self.weak_share,
                "vacuum": self.vacuum_share}[state]

    @property
    def states(self) -> Tuple[Tuple[str, float, float], ...]:
        return tuple((s, self.intensity(s), self.share(s)) for s in STATES)


@dataclass(frozen=True)
class Tally:
    """Sifted pulses sent, detections and error-weighted detections of one state."""

    pulses: float
    detections: float
    errors: float

    def __post_init__(self):
        for name in ("pulses", "detections", "errors"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ValidationError(f"{name} must be finite and non-negative, got {v!r}", field=name)
        if self.errors > self.detections:
            raise ValidationError("errors cannot exceed detections", field="errors")


@dataclass(frozen=True)
class ObservedTallies:
    """Per-basis, per-state tallies keyed by ``(basis, state)``."""

    counts: Mapping[Tuple[str, str], Tally]

    def __post_init__(self):
        for key in self.counts:
            if key[0] not in BASES or key[1] not in STATES:
                raise ValidationError(f"unknown tally key {key!r}", field="basis/state")

    def get(self, basis: str, state: str) -> Tally:
        try:
            return self.counts[(basis, state)]
        except KeyError:
            raise ValidationError(f"missing tally for basis {basis}, state {state}",
                                  field="basis/state") from None

    def bases(self) -> Tuple[str, ...]:
        return tuple(b for b in BASES if all((b, s) in self.counts for s in STATES))

    def total_detections(self, basis: str) -> float:
        return sum(self.get(basis, s).detections for s in STATES)

    def total_errors(self, basis: str) -> float:
        return sum(self.get(basis, s).errors for s in STATES)

    @classmethod
    def from_records(cls, records: Iterable[Tuple[str, str, float, float, float]]) -> "ObservedTallies":
        """Build from ``(basis, state, pulses, detections, errors)`` rows."""
        counts = {}
        for basis, state, pulses, det, err in records:
            key = (basis.upper(), state.lower())
            if key in counts:
                raise ValidationError(f"duplicate tally for {key}", field="basis/state")
            counts[key] = Tally(float(pulses), float(det), float(err))
        return cls(counts)


@dataclass(frozen=True)
class PoissonConditional:
    """Probabilities ``p_i^a`` that an ``i``-photon pulse came from state ``a``."""

    photon_number: int
    probabilities: Mapping[str, float]


def poisson_conditional(i: int, ensemble: PulseEnsemble) -> PoissonConditional:
    if i < 0:
        raise DomainError(f"photon number must be non-negative, got {i!r}")
    weights = {}
    for state, mu_a, q_a in ensemble.states:
        if mu_a == 0.0:
            weights[state] = q_a if i == 0 else 0.0
        elif q_a == 0.0:
            weights[state] = 0.0
        else:
            # i! cancels in the ratio
            weights[state] = math.exp(math.log(q_a) - mu_a + i * math.log(mu_a))
    total = sum(weights.values())
    return PoissonConditional(i, {s: w / total for s, w in weights.items()})


def signal_single_photon_fraction(ensemble: PulseEnsemble) -> float:
    """``p_1^s``: chance a single-photon pulse was a signal pulse."""
    return poisson_conditional(1, ensemble).probabilities["signal"]


@dataclass(frozen=True)
class StateGainBounds:
    gain: sb.MeanBounds
    error_gain: sb.MeanBounds


def mean_gain_bounds(tallies: ObservedTallies, basis: str, eps_step: float,
                     method: sb.BoundMethod = sb.BoundMethod.EXACT) -> Dict[str, StateGainBounds]:
    """Bounds on the expected gain ``Q^a`` and error gain ``E^a Q^a`` of every state.

    Counts are bounded with the chosen engine, then divided by the sifted
    pulses of the state.  ``eps_step`` is the two-sided budget of each
    interval.  For the Chernoff+Hoeffding engine the trial count is the
    total detections (or errors) of the basis.
    """
    method = sb.BoundMethod.parse(method)
    n_det = tallies.total_detections(basis)
    n_err = tallies.total_errors(basis)
    out = {}
    for state in STATES:
        t = tallies.get(basis, state)
        if not t.pulses > 0:
            raise ValidationError(f"no pulses recorded for basis {basis}, state {state}", field="pulses")
        m = sb.mean_bounds(t.detections, eps_step, method, n=n_det)
        em = sb.mean_bounds(t.errors, eps_step, method, n=n_err)
        out[state] = StateGainBounds(m.scaled(1.0 / t.pulses), em.scaled(1.0 / t.pulses))
    return out


def single_photon_yield_lower(qbounds: Mapping[str, StateGainBounds], ensemble: PulseEnsemble,
                              clamp: bool = True) -> float:
    """Lower bound on the single-photon yield from weak, signal and vacuum gains."""
    mu, nu = ensemble.signal_intensity, ensemble.weak_intensity
    if mu == nu:
        raise DomainError("signal and weak intensities coincide")
    raw = mu / (mu * nu - nu * nu) * (
        qbounds["weak"].gain.lower * math.exp(nu)
        - qbounds["signal"].gain.upper * math.exp(mu) * nu * nu / (mu * mu)
        - (mu * mu - nu * nu) / (mu * mu) * qbounds["vacuum"].gain.upper
    )
    return max(raw, 0.0) if clamp else raw


def single_photon_error_product_upper(eqbounds: Mapping[str, StateGainBounds], ensemble: PulseEnsemble,
                                      clamp: bool = True) -> float:
    """Upper bound on ``e_1 Y_1`` from the weak and vacuum error gains."""
    nu = ensemble.weak_intensity
    raw = ((eqbounds["weak"].error_gain.upper - eqbounds["vacuum"].error_gain.lower * math.exp(-nu))
           / (nu * math.exp(-nu)))
    return max(raw, 0.0) if clamp else raw


def single_photon_counts_and_error(y1_lower: float, e1y1_upper: float, ensemble: PulseEnsemble,
                                   signal_pulses: float, weak_pulses: float) -> Tuple[float, float]:
    """``(M_1^L, e_1^U)`` for a basis with the given sifted signal and weak pulses.

    Without single-photon credit (``y1_lower == 0``) the count is 0 and the
    error bound is 1/2.
    """
    if y1_lower <= 0.0:
        return 0.0, 0.5
    mu, nu = ensemble.signal_intensity, ensemble.weak_intensity
    ones = math.exp(-mu) * mu * signal_pulses + math.exp(-nu) * nu * weak_pulses
    return y1_lower * ones, e1y1_upper / y1_lower


def signal_single_photon_lower(m1_lower_basis: float, p1_signal: float, eps_step: float) -> float:
    """Lower bound on single-photon signal detections given their mean ``p1 * M1``."""
    if m1_lower_basis < 0.0 or not 0.0 <= p1_signal <= 1.0:
        raise DomainError("need m1_lower_basis >= 0 and p1_signal in [0, 1]")
    return sb.observation_bounds_from_mean(p1_signal * m1_lower_basis, eps_step).lower


def phase_error_upper(e1_bit_upper_x: float, m1_lower_x: float, m1_signal_lower_z: float,
                      eps_step: float) -> Tuple[float, float, frozenset]:
    """Phase-error bound ``e_bit + theta`` for the key basis, capped at 1/2.

    Returns ``(phase_error, theta, flags)``.  Raises
    :class:`InsufficientCounts` when either pool holds less than one count.
    """
    if m1_lower_x < 1.0 or m1_signal_lower_z < 1.0:
        raise InsufficientCounts(
            f"sampling pools too small: {m1_lower_x!r} and {m1_signal_lower_z!r}")
    if e1_bit_upper_x >= 0.5:
        return 0.5, 0.0, frozenset({"phase-error-capped"})
    theta, flags = sb.random_sampling_deviation(e1_bit_upper_x, m1_lower_x, m1_signal_lower_z, eps_step)
    phase = e1_bit_upper_x + theta
    if phase >= 0.5:
        return 0.5, theta, flags | {"phase-error-capped"}
    return phase, theta, flags


@dataclass(frozen=True)
class BasisBounds:
    """Single-photon bounds derived from one basis' tallies."""

    y1_lower: float
    e1y1_upper: float
    m1_lower: float
    e1_upper: float
    flags: frozenset


@dataclass(frozen=True)
class SinglePhotonEstimate:
    """Certified single-photon quantities for the key extracted from ``basis``.

    ``e1_bit_upper`` is the bit-error bound of the *complementary* basis,
    which seeds the phase-error bound below.
    """

    basis: str
    m1_lower: float
    e1_bit_upper: float
    m1_signal_lower: float
    phase_error_upper: float
    theta: float
    budget_spent: float
    flags: frozenset = field(default_factory=frozenset)


def basis_bounds(tallies: ObservedTallies, ensemble: PulseEnsemble, basis: str, eps_step: float,
                 method: sb.BoundMethod = sb.BoundMethod.EXACT) -> BasisBounds:
    gains = mean_gain_bounds(tallies, basis, eps_step, method)
    flags = set()
    for state, g in gains.items():
        flags.update(f"{basis}:{state}:{f}" for f in g.gain.flags | g.error_gain.flags)
    y1_raw = single_photon_yield_lower(gains, ensemble, clamp=False)
    e1y1_raw = single_photon_error_product_upper(gains, ensemble, clamp=False)
    if y1_raw <= 0.0:
        flags.add(f"{basis}:y1-clamped")
    if e1y1_raw < 0.0:
        flags.add(f"{basis}:e1y1-clamped")
    y1, e1y1 = max(y1_raw, 0.0), max(e1y1_raw, 0.0)
    m1, e1 = single_photon_counts_and_error(
        y1, e1y1, ensemble, tallies.get(basis, "signal").pulses, tallies.get(basis, "weak").pulses)
    return BasisBounds(y1, e1y1, m1, e1, frozenset(flags))


def estimate(tallies: ObservedTallies, ensemble: PulseEnsemble, eps_step: float,
             method: sb.BoundMethod = sb.BoundMethod.EXACT) -> Dict[str, SinglePhotonEstimate]:
    """Single-photon estimates for every key basis present in ``tallies``.

    Per key basis four budgeted steps run: count bounds with the decoy
    relations, error-tally bounds, the signal-state conversion and the
    random-sampling deviation, each at ``eps_step``.  The phase error of
    one basis comes from the bit errors and single-photon pool of the
    other.  Empty sampling pools give a zero-key estimate.
    """
    method = sb.BoundMethod.parse(method)
    bases = tallies.bases()
    if set(bases) != set(BASES):
        raise ValidationError("tallies for both bases are required", field="basis")
    per_basis = {b: basis_bounds(tallies, ensemble, b, eps_step, method) for b in bases}
    p1s = signal_single_photon_fraction(ensemble)
    collapsed = method is sb.BoundMethod.INFINITE
    out = {}
    for key in bases:
        own, conj = per_basis[key], per_basis[other_basis(key)]
        flags = set(own.flags | conj.flags)
        if collapsed:
            m1s = p1s * own.m1_lower
            phase, theta = min(conj.e1_upper, 0.5), 0.0
        else:
            m1s = signal_single_photon_lower(own.m1_lower, p1s, eps_step)
            try:
                phase, theta, pflags = phase_error_upper(conj.e1_upper, conj.m1_lower, m1s, eps_step)
                flags.update(pflags)
            except InsufficientCounts:
                phase, theta = 0.5, 0.0
                flags.add("insufficient-counts")
        out[key] = SinglePhotonEstimate(
            basis=key,
            m1_lower=own.m1_lower,
            e1_bit_upper=conj.e1_upper,
            m1_signal_lower=m1s,
            phase_error_upper=phase,
            theta=theta,
            budget_spent=0.0 if collapsed else STEPS_PER_KEY * eps_step,
            flags=frozenset(flags),
        )
    return out
