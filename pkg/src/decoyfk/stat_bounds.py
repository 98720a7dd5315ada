"""Statistical-fluctuation primitives for Bernoulli tallies.

Two directions are covered:

* observation -> mean: given an observed tally ``chi`` (a sum of independent
  Bernoulli variables), bound its unknown expectation from below and above
  (exact Chernoff inversion, its closed-form simplifications, and the
  Gaussian and Chernoff+Hoeffding baselines);
* mean -> observation: given a known mean, bound the tally it produces
  (symmetric Chernoff form), plus the random-sampling deviation between
  the bit-error rate of one pool and the phase-error rate of another.

Every ``eps`` argument is the failure probability of a *two-sided*
interval; each one-sided bound therefore carries ``eps / 2`` and
``beta = -ln(eps / 2)``.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

from ._backend import kernels
from .errors import DomainError, NumericalFailure, PreconditionError

__all__ = [
    "BoundMethod",
    "CHBudget",
    "DeviationPair",
    "FailureProbability",
    "MeanBounds",
    "ObservationBounds",
    "SamplingDeviation",
    "binary_entropy",
    "ch_mean_bounds",
    "chernoff_g",
    "exact_deviations",
    "fixed_deviation_failure",
    "g2",
    "gaussian_mean_bounds",
    "gaussian_sigma_multiplier",
    "hoeffding_lower_mean",
    "interval_failure_probability",
    "invert_mean_bounds_asymptotic",
    "invert_mean_bounds_exact",
    "invert_mean_bounds_simplified",
    "mean_bounds",
    "observation_bounds_from_mean",
    "random_sampling_deviation",
]


@dataclass(frozen=True)
class FailureProbability:
    """Two-sided failure probability ``epsilon`` with derived ``beta``."""

    epsilon: float

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")

    @property
    def one_sided(self) -> float:
        return 0.5 * self.epsilon

    @property
    def beta(self) -> float:
        return -math.log(0.5 * self.epsilon)


EpsLike = Union[float, FailureProbability]


def _fp(eps: EpsLike) -> FailureProbability:
    return eps if isinstance(eps, FailureProbability) else FailureProbability(float(eps))


@dataclass(frozen=True)
class MeanBounds:
    """Confidence interval ``[lower, upper]`` on an expectation value.

    ``epsilon`` is the total failure probability of the interval and
    ``flags`` records any fallback or clamp applied while computing it.
    """

    lower: float
    upper: float
    epsilon: float
    flags: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.lower < 0.0 or self.lower > self.upper:
            raise DomainError(f"invalid interval [{self.lower!r}, {self.upper!r}]")

    def scaled(self, factor: float) -> "MeanBounds":
        return MeanBounds(self.lower * factor, self.upper * factor, self.epsilon, self.flags)


@dataclass(frozen=True)
class ObservationBounds:
    """Interval ``[lower, upper]`` holding the observed tally for a known mean."""

    lower: float
    upper: float
    epsilon: float
    delta: float


@dataclass(frozen=True)
class DeviationPair:
    """Relative deviations of the lower-mean and upper-mean branches."""

    delta_lower: float
    delta_upper: float

    def __post_init__(self):
        if not self.delta_lower > 0.0:
            raise DomainError(f"delta_lower must be positive, got {self.delta_lower!r}")
        if not 0.0 < self.delta_upper < 1.0:
            raise DomainError(f"delta_upper must lie in (0, 1), got {self.delta_upper!r}")


@dataclass(frozen=True)
class CHBudget:
    """Failure budgets for the Chernoff+Hoeffding baseline.

    Attributes
    ----------
    eps1 : float
        Hoeffding pre-estimate of the mean (selects the branches).
    eps2 : float
        Upper bound on the mean.
    eps3 : float
        Lower bound on the mean.
    n : float
        Number of Bernoulli trials the tally is summed over.
    """

    eps1: float
    eps2: float
    eps3: float
    n: float

    def __post_init__(self):
        for name in ("eps1", "eps2", "eps3"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise DomainError(f"{name} must lie in (0, 1), got {value!r}")
        if not self.n >= 1:
            raise DomainError(f"n must be at least 1, got {self.n!r}")

    @classmethod
    def equal_split(cls, eps: float, n: float) -> "CHBudget":
        """Every sub-budget set to the one-sided share ``eps / 2``."""
        half = 0.5 * eps
        return cls(half, half, half, max(float(n), 1.0))


class BoundMethod(str, enum.Enum):
    EXACT = "exact"
    SIMPLIFIED = "simplified"
    ASYMPTOTIC = "asymptotic"
    GAUSSIAN = "gaussian"
    CHERNOFF_HOEFFDING = "chernoff-hoeffding"
    # no fluctuation at all: bounds collapse onto the observation
    INFINITE = "infinite"

    @classmethod
    def parse(cls, name: Union[str, "BoundMethod"]) -> "BoundMethod":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "-")
        aliases = {"new": "exact", "chernoff": "exact", "ch": "chernoff-hoeffding",
                   "c+h": "chernoff-hoeffding", "gauss": "gaussian", "none": "infinite"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise DomainError(f"unknown bound method {name!r} (choose from {choices})") from None


# ---------------------------------------------------------------------------
# elementary functions


def binary_entropy(x: float) -> float:
    """Shannon binary entropy in bits, with ``0 log 0 = 0``."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"binary entropy needs x in [0, 1], got {x!r}")
    return kernels.binary_entropy(x)


def g2(delta: float) -> float:
    """Per-mean Chernoff exponent ``(1+delta) ln(1+delta) - delta``.

    ``chernoff_g(delta, mean) == exp(-mean * g2(delta))``.
    """
    if not delta > -1.0:
        raise DomainError(f"g2 needs delta > -1, got {delta!r}")
    return kernels.g2(delta)


def chernoff_g(delta: float, mean: float) -> float:
    """Chernoff tail ``[e^delta / (1+delta)^(1+delta)]^mean``, via log space."""
    if mean < 0.0:
        raise DomainError(f"mean must be non-negative, got {mean!r}")
    if mean == 0.0:
        return 1.0
    return math.exp(-mean * g2(delta))


# ---------------------------------------------------------------------------
# observation -> mean


def _exact_shifts(chi: float, beta: float):
    c = beta / chi
    t, st_lo = kernels.lower_shift(c)
    s, st_hi = kernels.upper_shift(c)
    if st_lo != 0 or st_hi != 0:
        raise NumericalFailure(f"Chernoff inversion did not converge for chi={chi!r}")
    return t, s


def exact_deviations(chi: float, eps: EpsLike) -> DeviationPair:
    """Deviations ``(delta_L, delta_U)`` solving the inversion for ``chi > 0``."""
    if not chi > 0.0:
        raise PreconditionError("exact deviations need chi > 0")
    t, s = _exact_shifts(chi, _fp(eps).beta)
    return DeviationPair(math.expm1(t), -math.expm1(-s))


def invert_mean_bounds_exact(chi: float, eps: EpsLike) -> MeanBounds:
    """Tightest Chernoff interval on the mean of an observed tally.

    For ``chi > 0`` the lower (upper) mean is ``chi / (1 + delta)`` where
    ``delta`` makes the upper (lower) Chernoff tail of that mean equal to
    ``eps / 2``.  The two equations are solved in logarithmic coordinates
    ``t = ln(1 + delta_L)`` and ``s = -ln(1 - delta_U)``, where they read
    ``t - 1 + e^-t = beta/chi`` and ``e^s - 1 - s = beta/chi``; both sides
    are monotone with analytic brackets, and the bounds are ``chi e^-t`` and
    ``chi e^s``.  ``chi = 0`` gives ``(0, beta)``.
    """
    fp = _fp(eps)
    if chi < 0.0:
        raise PreconditionError(f"chi must be non-negative, got {chi!r}")
    beta = fp.beta
    if chi == 0.0:
        return MeanBounds(0.0, beta, fp.epsilon)
    lower, upper, status = kernels.invert_exact(chi, beta)
    if status != 0:
        raise NumericalFailure(f"Chernoff inversion did not converge for chi={chi!r}")
    return MeanBounds(lower, upper, fp.epsilon)


def invert_mean_bounds_simplified(chi: float, eps: EpsLike, symmetric: bool = True) -> MeanBounds:
    """Closed-form interval from the symmetric Chernoff tail, for ``chi > 6 beta``.

    The symmetric mode uses the lower-branch deviation for both sides; the
    asymmetric mode uses the (smaller) dedicated upper-branch root.
    """
    fp = _fp(eps)
    beta = fp.beta
    if not chi > 6.0 * beta:
        raise PreconditionError(
            f"simplified inversion needs chi > 6*beta = {6 * beta:.6g}, got {chi!r}")
    d_lo = (3.0 * beta + math.sqrt(8.0 * beta * chi + beta * beta)) / (2.0 * (chi - beta))
    if symmetric:
        d_hi = d_lo
    else:
        d_hi = (math.sqrt(8.0 * beta * chi + 9.0 * beta * beta) - beta) / (2.0 * (chi + beta))
    return MeanBounds(chi / (1.0 + d_lo), chi / (1.0 - d_hi), fp.epsilon)


def invert_mean_bounds_asymptotic(chi: float, eps: EpsLike) -> MeanBounds:
    """Large-tally limit ``chi -/+ sqrt(2 beta chi)``; needs ``chi >= 2 beta``."""
    fp = _fp(eps)
    beta = fp.beta
    if not chi >= 2.0 * beta:
        raise PreconditionError(
            f"asymptotic inversion needs chi >= 2*beta = {2 * beta:.6g}, got {chi!r}")
    half = math.sqrt(2.0 * beta * chi)
    return MeanBounds(max(chi - half, 0.0), chi + half, fp.epsilon)


def interval_failure_probability(chi: float, deltas: DeviationPair) -> float:
    """Total failure probability of the interval ``[chi/(1+dL), chi/(1-dU)]``.

    Each side contributes the Chernoff tail of its own endpoint mean.  The
    sum can exceed 1 for narrow intervals, meaning no confidence at all.
    """
    if not chi > 0.0:
        raise PreconditionError("chi must be positive")
    mean_lo = chi / (1.0 + deltas.delta_lower)
    mean_hi = chi / (1.0 - deltas.delta_upper)
    return (math.exp(-mean_lo * kernels.g2(deltas.delta_lower))
            + math.exp(-mean_hi * kernels.g2(-deltas.delta_upper)))


# ---------------------------------------------------------------------------
# mean -> observation


def observation_bounds_from_mean(mean: float, eps: EpsLike) -> ObservationBounds:
    """Interval holding the tally of a known ``mean`` with probability ``1 - eps``.

    ``delta`` solves ``2 exp(-delta^2 mean / (2 + delta)) = eps``.  A zero
    mean yields the degenerate interval ``(0, 0)``.
    """
    fp = _fp(eps)
    if mean < 0.0:
        raise PreconditionError(f"mean must be non-negative, got {mean!r}")
    if mean == 0.0:
        return ObservationBounds(0.0, 0.0, fp.epsilon, 0.0)
    beta = fp.beta
    delta = (beta + math.sqrt(beta * beta + 8.0 * beta * mean)) / (2.0 * mean)
    return ObservationBounds(max((1.0 - delta) * mean, 0.0), (1.0 + delta) * mean, fp.epsilon, delta)


# ---------------------------------------------------------------------------
# baselines


@functools.lru_cache(maxsize=256)
def gaussian_sigma_multiplier(eps: float) -> float:
    """Number of standard deviations ``n`` with ``erfc(n / sqrt(2)) = eps``."""
    eps = _fp(eps).epsilon
    lo, hi = 0.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if math.erfc(mid / math.sqrt(2.0)) > eps:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


def gaussian_mean_bounds(chi: float, eps: EpsLike) -> MeanBounds:
    """Gaussian-approximation interval ``chi -/+ n sqrt(chi)`` (not rigorous)."""
    fp = _fp(eps)
    if chi < 0.0:
        raise PreconditionError(f"chi must be non-negative, got {chi!r}")
    half = gaussian_sigma_multiplier(fp.epsilon) * math.sqrt(chi)
    flags = frozenset({"clamped-lower"}) if half > chi else frozenset()
    return MeanBounds(max(chi - half, 0.0), chi + half, fp.epsilon, flags)


def hoeffding_lower_mean(chi: float, n: float, eps1: float) -> float:
    """Hoeffding lower estimate ``chi - sqrt(n ln(1/eps1) / 2)``; may be negative."""
    if not 0.0 < eps1 <= 1.0:
        raise DomainError(f"eps1 must lie in (0, 1], got {eps1!r}")
    return chi - math.sqrt(n * math.log(1.0 / eps1) / 2.0)


def _ch_width(x: float, y: float) -> float:
    return math.sqrt(2.0 * x * math.log(1.0 / y))


def ch_mean_bounds(chi: float, budget: CHBudget) -> MeanBounds:
    """Chernoff+Hoeffding interval with branch selection by three tests.

    A Hoeffding pre-estimate ``mu_L`` of the mean picks, per side, either a
    Chernoff-type width ``sqrt(2 chi ln(1/y))`` or the Hoeffding width
    ``sqrt(n ln(1/eps) / 2)``.  The tests are evaluated in log form
    exactly as stated, including the third test that always holds for
    ``eps3 < 1``.  A non-positive pre-estimate leaves the tests undefined;
    both sides then use the Hoeffding width and the result is flagged.
    """
    if chi < 0.0:
        raise PreconditionError(f"chi must be non-negative, got {chi!r}")
    e1, e2, e3, n = budget.eps1, budget.eps2, budget.eps3, budget.n
    hoeff_up = math.sqrt(n / 2.0 * math.log(1.0 / e2))
    hoeff_lo = math.sqrt(n / 2.0 * math.log(1.0 / e3))
    mu_lower = hoeffding_lower_mean(chi, n, e1)
    total = e1 + e2 + e3
    if mu_lower <= 0.0:
        return MeanBounds(max(chi - hoeff_lo, 0.0), chi + hoeff_up, total,
                          frozenset({"ch-degenerate-hoeffding"}))
    # (2/eps2)^(1/mu) <= e^((4/(4 sqrt 2))^2) = e^(1/2)
    test1 = math.log(2.0 / e2) / mu_lower <= 0.5
    test2 = math.log(1.0 / e3) / mu_lower < 1.0 / 3.0
    test3 = math.log(e3) / mu_lower < ((2.0 * math.e - 1.0) / 2.0) ** 2
    flags = set()
    if test1:
        up = _ch_width(chi, e2 ** 4 / 16.0)
    else:
        up = hoeff_up
        flags.add("ch-upper-hoeffding")
    if test2:
        lo = _ch_width(chi, e3 ** 1.5)
    elif test3:
        lo = _ch_width(chi, e3 ** 2)
        flags.add("ch-lower-test3")
    else:
        lo = hoeff_lo
        flags.add("ch-lower-hoeffding")
    return MeanBounds(max(chi - lo, 0.0), chi + up, total, frozenset(flags))


def mean_bounds(chi: float, eps: EpsLike, method: BoundMethod = BoundMethod.EXACT,
                n: Optional[float] = None) -> MeanBounds:
    """Bound the mean of tally ``chi`` with the selected engine.

    The closed-form engines fall back to the exact inversion outside
    their validity range (flagged).  ``n`` is required only by the
    Chernoff+Hoeffding engine.
    """
    method = BoundMethod.parse(method)
    fp = _fp(eps)
    if method is BoundMethod.EXACT:
        return invert_mean_bounds_exact(chi, fp)
    if method is BoundMethod.SIMPLIFIED:
        if chi > 6.0 * fp.beta:
            return invert_mean_bounds_simplified(chi, fp)
        b = invert_mean_bounds_exact(chi, fp)
        return MeanBounds(b.lower, b.upper, b.epsilon, frozenset({"simplified-to-exact"}))
    if method is BoundMethod.ASYMPTOTIC:
        if chi >= 2.0 * fp.beta:
            return invert_mean_bounds_asymptotic(chi, fp)
        b = invert_mean_bounds_exact(chi, fp)
        return MeanBounds(b.lower, b.upper, b.epsilon, frozenset({"asymptotic-to-exact"}))
    if method is BoundMethod.GAUSSIAN:
        return gaussian_mean_bounds(chi, fp)
    if method is BoundMethod.CHERNOFF_HOEFFDING:
        if n is None:
            raise PreconditionError("the Chernoff+Hoeffding engine needs the trial count n")
        return ch_mean_bounds(chi, CHBudget.equal_split(fp.epsilon, max(n, chi, 1.0)))
    return MeanBounds(chi, chi, 0.0)


# ---------------------------------------------------------------------------
# fixed-deviation failure probabilities (large-tally limit)


def fixed_deviation_failure(n_sigma: float, method: BoundMethod, *,
                            ch_form: str = "operational") -> float:
    """Total failure probability of an interval of half-width ``n_sigma * sqrt(chi)``.

    Evaluated in the limit ``chi -> infinity``.  For the Chernoff+Hoeffding
    baseline the two sub-budgets are equal (``eps2 = eps3 = eps / 2``) and
    the mean of the two one-sided half-widths is matched to
    ``n_sigma * sqrt(chi)``.  ``ch_form="operational"`` uses the upper width
    ``sqrt(2 chi ln(16/eps2^4))``; ``ch_form="corollary"`` uses the printed
    asymptotic restatement ``2 sqrt((2 beta - ln 2) chi)``.
    """
    method = BoundMethod.parse(method)
    if method in (BoundMethod.EXACT, BoundMethod.SIMPLIFIED, BoundMethod.ASYMPTOTIC):
        return 2.0 * math.exp(-0.5 * n_sigma * n_sigma)
    if method is BoundMethod.GAUSSIAN:
        return math.erfc(n_sigma / math.sqrt(2.0))
    if method is not BoundMethod.CHERNOFF_HOEFFDING:
        raise DomainError(f"no fixed-deviation failure for {method.value!r}")

    if ch_form == "operational":
        def upper(beta):
            return 2.0 * math.sqrt(2.0 * (beta + math.log(2.0)))
        beta_min = 0.0
    elif ch_form == "corollary":
        def upper(beta):
            return 2.0 * math.sqrt(2.0 * beta - math.log(2.0))
        beta_min = 0.5 * math.log(2.0)
    else:
        raise DomainError(f"unknown ch_form {ch_form!r}")

    def half_width(beta):
        return 0.5 * (math.sqrt(3.0 * beta) + upper(beta))

    if half_width(beta_min) >= n_sigma:
        return 1.0
    lo, hi = beta_min, max(1.0, n_sigma * n_sigma)
    while half_width(hi) < n_sigma:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if half_width(mid) < n_sigma:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    return 2.0 * math.exp(-0.5 * (lo + hi))


# ---------------------------------------------------------------------------
# random sampling


class SamplingDeviation(NamedTuple):
    theta: float
    flags: frozenset


def random_sampling_deviation(e_bx: float, n_x: float, n_z: float, eps: float) -> SamplingDeviation:
    """Deviation ``theta`` between a sampled bit-error rate and the phase-error rate.

    Solves ``eps = sqrt(n/(e(1-e) n_x n_z)) * 2^(-n xi(theta))`` with
    ``n = n_x + n_z`` on ``(0, 1 - e]``.  ``xi`` increases on that range, so
    the root is unique.  Returns ``theta = 0`` (flag ``theta-zero``) when
    the prefactor alone already meets ``eps`` and the saturation value
    ``1 - e`` (flag ``theta-saturated``) when no root exists.  A boundary
    error rate is regularized to ``1/(2 n_x)`` from the edge.
    """
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps!r}")
    if not (n_x >= 1.0 and n_z >= 1.0):
        raise PreconditionError(f"sampling pools need at least one count, got {n_x!r}, {n_z!r}")
    if not 0.0 <= e_bx <= 1.0:
        raise DomainError(f"error rate must lie in [0, 1], got {e_bx!r}")
    flags = set()
    edge = 0.5 / n_x
    if e_bx < edge:
        e_bx = edge
        flags.add("error-rate-regularized")
    elif e_bx > 1.0 - edge:
        e_bx = 1.0 - edge
        flags.add("error-rate-regularized")
    theta, status = kernels.sampling_theta(e_bx, float(n_x), float(n_z), math.log2(eps))
    if status == kernels.NO_CONVERGENCE:
        raise NumericalFailure("random-sampling deviation did not converge")
    if status == kernels.SATURATED:
        flags.add("theta-saturated")
    elif status == kernels.BELOW_PREFACTOR:
        flags.add("theta-zero")
    return SamplingDeviation(theta, frozenset(flags))
