"""Coordinate-descent optimization of intensities and mixing shares.

The search runs over ``(mu, nu, q_signal, q_weak)`` with the vacuum share
taking the remainder.  ``local_search`` is generic over a box of named
variables; ``optimize_protocol`` plugs in the deterministic
expected-tallies pipeline, and ``max_secure_distance`` brackets the
distance at which the optimized rate drops to zero.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple, Union

from . import stat_bounds as sb
from .channel_model import ChannelParams, expected_tallies
from .decoy_estimator import PulseEnsemble
from .errors import ValidationError
from .key_rate import DEFAULT_EC_INEFFICIENCY, KeyRateResult, asymptotic_key_rate, key_rate

# rate model for the infinite-decoy asymptote; only mu is optimized
ASYMPTOTE = "asymptote"

VACUUM_FLOOR = 0.01
STOP_STEP = 1e-4

Point = Tuple[float, ...]


@dataclass(frozen=True)
class Variable:
    name: str
    lower: float
    upper: float
    initial: float
    initial_step: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValidationError(f"{self.name}: need lower < upper", field=self.name)
        if not self.lower <= self.initial <= self.upper:
            raise ValidationError(f"{self.name}: initial value outside the box", field=self.name)
        if not self.initial_step > 0.0:
            raise ValidationError(f"{self.name}: initial step must be positive", field=self.name)

    def clip(self, x: float) -> float:
        return min(max(x, self.lower), self.upper)

    def levels(self, count: int) -> Tuple[float, ...]:
        """``count`` evenly spaced interior points of the range."""
        width = self.upper - self.lower
        return tuple(self.lower + width * (k + 1) / (count + 1) for k in range(count))


def _protocol_feasible(point: Point) -> bool:
    mu, nu, qs, qw = point
    return mu > nu > 0.0 and qs >= 0.0 and qw >= 0.0 and qs + qw <= 1.0 - VACUUM_FLOOR + 1e-12


@dataclass(frozen=True)
class SearchBox:
    """Variables of the search plus a feasibility predicate over points."""

    variables: Tuple[Variable, ...]
    feasible: Callable[[Point], bool] = field(default=lambda p: True, compare=False)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def initial(self) -> Point:
        return tuple(v.initial for v in self.variables)

    def contains(self, point: Point) -> bool:
        return (all(v.lower <= x <= v.upper for v, x in zip(self.variables, point))
                and self.feasible(point))

    def lattice(self, levels: int = 3) -> List[Point]:
        """Feasible multi-start points on a ``levels ** d`` grid."""
        grid = itertools.product(*(v.levels(levels) for v in self.variables))
        return [p for p in grid if self.feasible(p)]

    def with_initial(self, point: Point) -> "SearchBox":
        vs = tuple(replace(v, initial=v.clip(x)) for v, x in zip(self.variables, point))
        return replace(self, variables=vs)

    @classmethod
    def protocol(cls) -> "SearchBox":
        """Default box over ``(mu, nu, q_signal, q_weak)``."""
        return cls((
            Variable("mu", 0.05, 0.9, 0.45, 0.1),
            Variable("nu", 0.01, 0.3, 0.1, 0.05),
            Variable("q_signal", 0.1, 0.95, 0.6, 0.1),
            Variable("q_weak", 0.02, 0.6, 0.25, 0.1),
        ), _protocol_feasible)

    @classmethod
    def asymptote(cls) -> "SearchBox":
        return cls((Variable("mu", 0.05, 0.9, 0.45, 0.1),))


@dataclass(frozen=True)
class Schedule:
    """Search schedule.

    ``levels`` sets the multi-start lattice (``levels ** d`` points, 0 for
    a single start at the box's initial point).  Steps halve whenever a
    full sweep finds no improvement, until all fall below ``stop_step``.
    """

    levels: int = 3
    stop_step: float = STOP_STEP
    max_evaluations: int = 20000


@dataclass(frozen=True)
class SearchResult:
    point: Point
    value: float
    evaluations: int
    trace: Tuple[Tuple[Point, float], ...] = ()


def _descend(objective, box: SearchBox, start: Point, schedule: Schedule) -> SearchResult:
    point = tuple(start)
    value = objective(point)
    steps = [v.initial_step for v in box.variables]
    trace = [(point, value)]
    evals = 1
    while max(steps) >= schedule.stop_step and evals < schedule.max_evaluations:
        improved = False
        for i, var in enumerate(box.variables):
            if steps[i] < schedule.stop_step:
                continue
            for sign in (1.0, -1.0):
                x = var.clip(point[i] + sign * steps[i])
                if x == point[i]:
                    continue
                cand = point[:i] + (x,) + point[i + 1:]
                if not box.feasible(cand):
                    continue
                val = objective(cand)
                evals += 1
                if val > value:
                    point, value = cand, val
                    trace.append((point, value))
                    improved = True
                    break
        if not improved:
            steps = [s * 0.5 for s in steps]
    return SearchResult(point, value, evals, tuple(trace))


def _better(a: SearchResult, b: SearchResult) -> bool:
    # larger value wins; equal values fall back to the lexicographically smaller point
    if a.value != b.value:
        return a.value > b.value
    return a.point < b.point


def local_search(objective: Callable[[Point], float], box: SearchBox,
                 schedule: Schedule = Schedule(), starts: Optional[Sequence[Point]] = None) -> SearchResult:
    """Maximize ``objective`` over ``box`` by multi-start coordinate descent.

    Each start probes ``+step`` then ``-step`` along every coordinate and
    moves on the first strict improvement.  Results are deterministic for
    a given box and schedule; evaluation counts are summed over starts and
    the trace is that of the winning start.
    """
    if starts is None:
        starts = box.lattice(schedule.levels) if schedule.levels > 0 else [box.initial]
    starts = [p for p in starts if box.contains(p)] or [box.initial]
    best = None
    total = 0
    for start in starts:
        res = _descend(objective, box, start, schedule)
        total += res.evaluations
        if best is None or _better(res, best):
            best = res
    return replace(best, evaluations=total)


# ---------------------------------------------------------------------------
# protocol optimization


def ensemble_from_point(point: Point, total_pulses: float) -> PulseEnsemble:
    mu, nu, qs, qw = point
    return PulseEnsemble(mu, nu, qs, qw, total_pulses, vacuum_share=max(0.0, 1.0 - qs - qw))


Method = Union[sb.BoundMethod, str]


def _parse_method(method: Method):
    if isinstance(method, str) and method.strip().lower() == ASYMPTOTE:
        return ASYMPTOTE
    return sb.BoundMethod.parse(method)


def protocol_objective(params: ChannelParams, total_pulses: float, eps_step: float, method: Method,
                       f: float = DEFAULT_EC_INEFFICIENCY, basis_prob: float = 0.5):
    """Objective over points of :meth:`SearchBox.protocol`.

    Positive rates are returned as is.  Zero-key points return a tiny
    negative value proportional to the pre-clamp key deficit, so a search
    stuck in an infeasible region still drifts toward positive key.
    """
    method = _parse_method(method)
    if method == ASYMPTOTE:
        def asym(point):
            ens = PulseEnsemble(point[0], point[0] * 0.5, 1.0, 0.0, total_pulses, vacuum_share=0.0)
            return asymptotic_key_rate(ens, params, f, basis_prob)
        return asym

    def objective(point):
        ens = ensemble_from_point(point, total_pulses)
        res = key_rate(expected_tallies(ens, params, basis_prob), ens, eps_step, method, f)
        if res.rate > 0.0:
            return res.rate
        return 1e-9 * min(res.raw_key, 0.0) / max(total_pulses, 1.0)

    return objective


@dataclass(frozen=True)
class OptimizedProtocol:
    ensemble: PulseEnsemble
    result: KeyRateResult
    evaluations: int
    diagnostic: str = ""

    @property
    def rate(self) -> float:
        return self.result.rate


def _asymptote_result(rate: float) -> KeyRateResult:
    return KeyRateResult(0.0, 0.0, rate, 0.0, 0.0, 0.0, 0.0, 0.0)


def optimize_protocol(params: ChannelParams, total_pulses: float, eps_step: float,
                      method: Method = sb.BoundMethod.EXACT, *, f: float = DEFAULT_EC_INEFFICIENCY,
                      basis_prob: float = 0.5, box: Optional[SearchBox] = None,
                      schedule: Schedule = Schedule(), warm_start: Optional[Point] = None) -> OptimizedProtocol:
    """Optimized ensemble and key rate at one channel configuration.

    With ``warm_start`` the search first descends from that point alone;
    a positive rate there is accepted, otherwise the full lattice runs.
    The asymptote model optimizes ``mu`` only.
    """
    method = _parse_method(method)
    objective = protocol_objective(params, total_pulses, eps_step, method, f, basis_prob)
    if method == ASYMPTOTE:
        box = box or SearchBox.asymptote()
    else:
        box = box or SearchBox.protocol()
    evals = 0
    res = None
    if warm_start is not None:
        start = tuple(warm_start)[:len(box.variables)]
        if box.contains(start):
            res = local_search(objective, box, schedule, starts=[start])
            evals = res.evaluations
            if res.value <= 0.0:
                res = None
    if res is None:
        res = local_search(objective, box, schedule)
        evals += res.evaluations
    if method == ASYMPTOTE:
        mu = res.point[0]
        ens = PulseEnsemble(mu, mu * 0.5, 1.0, 0.0, total_pulses, vacuum_share=0.0)
        rate = max(res.value, 0.0)
        return OptimizedProtocol(ens, _asymptote_result(rate), evals,
                                 "" if rate > 0.0 else "no positive-key point found")
    ens = ensemble_from_point(res.point, total_pulses)
    result = key_rate(expected_tallies(ens, params, basis_prob), ens, eps_step, method, f)
    diag = "" if result.rate > 0.0 else "no positive-key point found"
    return OptimizedProtocol(ens, result, evals, diag)


def _point_of(ensemble: PulseEnsemble) -> Point:
    return (ensemble.signal_intensity, ensemble.weak_intensity, ensemble.signal_share, ensemble.weak_share)


@dataclass(frozen=True)
class DistanceSearch:
    distance: float
    probes: Tuple[Tuple[float, float], ...]


def max_secure_distance(total_pulses: float, eps_step: float, method: Method, params: ChannelParams,
                        *, f: float = DEFAULT_EC_INEFFICIENCY, basis_prob: float = 0.5,
                        scan_step: float = 5.0, resolution: float = 0.5, max_distance: float = 300.0,
                        schedule: Schedule = Schedule()) -> DistanceSearch:
    """Largest distance with positive optimized key, to ``resolution`` km.

    A scan in ``scan_step`` increments brackets the zero-key transition,
    then bisection narrows it.  Each probe warm-starts from the optimum of
    the last positive probe.  Returns 0 when even zero distance gives no
    key.
    """
    probes = []
    warm = None

    def positive(d):
        nonlocal warm
        opt = optimize_protocol(params.at(d), total_pulses, eps_step, method, f=f, basis_prob=basis_prob,
                                schedule=schedule, warm_start=warm)
        probes.append((d, opt.rate))
        if opt.rate > 0.0:
            warm = _point_of(opt.ensemble)
            return True
        return False

    if not positive(0.0):
        return DistanceSearch(0.0, tuple(probes))
    lo = 0.0
    hi = None
    d = scan_step
    while d <= max_distance:
        if positive(d):
            lo = d
            d += scan_step
        else:
            hi = d
            break
    if hi is None:
        return DistanceSearch(lo, tuple(probes))
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if positive(mid):
            lo = mid
        else:
            hi = mid
    return DistanceSearch(lo, tuple(probes))
