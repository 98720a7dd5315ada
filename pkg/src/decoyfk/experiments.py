"""Table builders behind the CLI modes.

Every builder returns a :class:`Table`; the CLI only formats and writes.
Fan-out work takes a ``workers`` count and always assembles results in
input order, so output does not depend on the pool size.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from . import stat_bounds as sb
from .channel_model import ChannelParams, sample_tallies_with_truth
from .decoy_estimator import BASES, PulseEnsemble, estimate
from .optimizer import ASYMPTOTE, max_secure_distance, optimize_protocol, _point_of

SWEEP_CURVES = (ASYMPTOTE, sb.BoundMethod.EXACT.value, sb.BoundMethod.GAUSSIAN.value,
                sb.BoundMethod.CHERNOFF_HOEFFDING.value)
FINITE_METHODS = SWEEP_CURVES[1:]
# engines compared in the fixed-deviation failure table
TABLE2_METHODS = (sb.BoundMethod.GAUSSIAN, sb.BoundMethod.EXACT, sb.BoundMethod.CHERNOFF_HOEFFDING)


@dataclass(frozen=True)
class Table:
    name: str
    columns: Tuple[str, ...]
    rows: Tuple[tuple, ...]
    metadata: Tuple[Tuple[str, str], ...] = ()

    def column(self, name: str) -> List:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


def fan_out(func: Callable, tasks: Sequence, workers: int = 1) -> List:
    """``[func(t) for t in tasks]``, optionally across processes."""
    if workers == 0:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(func, tasks))


def _log10(x: float) -> float:
    return math.log10(x) if x > 0.0 else -math.inf


# ---------------------------------------------------------------------------
# fluctuation-engine tables


def table2(n_sigmas: Sequence[float] = (3, 5, 7, 9)) -> Table:
    """Failure probability of a fixed ``n * sqrt(chi)`` deviation, large-count limit."""
    rows = []
    for n in n_sigmas:
        g = sb.fixed_deviation_failure(n, sb.BoundMethod.GAUSSIAN)
        e = sb.fixed_deviation_failure(n, sb.BoundMethod.EXACT)
        c_op = sb.fixed_deviation_failure(n, sb.BoundMethod.CHERNOFF_HOEFFDING, ch_form="operational")
        c_co = sb.fixed_deviation_failure(n, sb.BoundMethod.CHERNOFF_HOEFFDING, ch_form="corollary")
        rows.append((float(n), g, e, c_op, c_co, _log10(g), _log10(e), _log10(c_op), _log10(c_co)))
    meta = (
        ("ch_budget", "eps1 = eps2 = eps3 = eps/2 (equal split of the two-sided budget)"),
        ("ch_deviation", "half-width (lower + upper)/2 of the Chernoff+Hoeffding interval"),
        ("ch_operational", "upper width sqrt(2 chi ln(16/eps2^4)) = 2 sqrt(2 (beta + ln 2) chi)"),
        ("ch_corollary", "upper width 2 sqrt((2 beta - ln 2) chi), the printed large-count form"),
    )
    return Table("table2", ("n_sigma", "gaussian", "exact", "ch_operational", "ch_corollary",
                            "log10_gaussian", "log10_exact", "log10_ch_operational", "log10_ch_corollary"),
                 tuple(rows), meta)


def bounds_table(chis: Sequence[float], epsilon: float,
                 methods: Sequence = (sb.BoundMethod.EXACT, sb.BoundMethod.GAUSSIAN,
                                      sb.BoundMethod.CHERNOFF_HOEFFDING),
                 trials: float = None) -> Table:
    """Mean bounds of each observation under each engine.

    ``trials`` is the Bernoulli trial count handed to the
    Chernoff+Hoeffding engine; by default the observation itself.
    """
    rows = []
    for chi in chis:
        for m in methods:
            m = sb.BoundMethod.parse(m)
            b = sb.mean_bounds(chi, epsilon, m, n=trials if trials is not None else max(chi, 1.0))
            rows.append((float(chi), m.value, b.lower, b.upper, b.epsilon, ";".join(sorted(b.flags))))
    return Table("bounds", ("chi", "method", "lower", "upper", "epsilon_spent", "flags"), tuple(rows),
                 (("epsilon", repr(epsilon)), ("beta", repr(sb.FailureProbability(epsilon).beta))))


def lower_bound_crossover(epsilon: float = 1e-10, lo: float = 10.0, hi: float = 1e5,
                          tol: float = 1e-3) -> float:
    """Smallest ``chi`` at which the Gaussian lower bound overtakes the exact one.

    Bisection on the sign of the difference; the bracket must straddle a
    single crossing.
    """
    def diff(chi):
        return (sb.mean_bounds(chi, epsilon, sb.BoundMethod.GAUSSIAN).lower
                - sb.mean_bounds(chi, epsilon, sb.BoundMethod.EXACT).lower)

    if diff(lo) > 0.0 or diff(hi) <= 0.0:
        raise ValueError("bracket does not straddle the crossover")
    while hi - lo > tol * lo:
        mid = 0.5 * (lo + hi)
        if diff(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return hi


def figure1(epsilons: Sequence[float] = tuple(10.0 ** -k for k in range(2, 21)),
            chi: float = 1e8) -> Table:
    """Half-width of each interval in units of ``sqrt(chi)`` against ``epsilon``.

    The Chernoff+Hoeffding trial count equals ``chi``.
    """
    rows = []
    sigma = math.sqrt(chi)
    for eps in epsilons:
        row = [eps]
        for m in TABLE2_METHODS:
            b = sb.mean_bounds(chi, eps, m, n=chi)
            row.append((b.upper - b.lower) / (2.0 * sigma))
        rows.append(tuple(row))
    return Table("fig1", ("epsilon",) + tuple(m.value for m in TABLE2_METHODS), tuple(rows),
                 (("chi", repr(chi)),))


def figure2(chis: Sequence[float] = tuple(float(c) for c in range(0, 3001, 50)),
            epsilon: float = 1e-10) -> Table:
    """Lower and upper mean bounds of the Gaussian and exact engines for small observations."""
    methods = (sb.BoundMethod.GAUSSIAN, sb.BoundMethod.EXACT)
    rows = []
    for chi in chis:
        row = [float(chi)]
        for m in methods:
            b = sb.mean_bounds(chi, epsilon, m)
            row += [b.lower, b.upper]
        rows.append(tuple(row))
    cols = ("chi",) + tuple(f"{m.value}_{side}" for m in methods for side in ("lower", "upper"))
    return Table("fig2", cols, tuple(rows), (("epsilon", repr(epsilon)),))


def figure3(chis: Sequence[float] = tuple(10.0 ** (k / 4) for k in range(8, 41)),
            n_sigmas: Sequence[float] = (3, 5, 7, 9)) -> Table:
    """Two-sided failure probability of a fixed ``n * sqrt(chi)`` interval against ``chi``.

    Cells are empty where the lower deviation would reach zero.
    """
    rows = []
    for chi in chis:
        row = [chi]
        for n in n_sigmas:
            d = n / math.sqrt(chi)
            row.append(sb.interval_failure_probability(chi, sb.DeviationPair(d, d)) if d < 1.0 else "")
        rows.append(tuple(row))
    return Table("fig3", ("chi",) + tuple(f"n{n:g}" for n in n_sigmas), tuple(rows))


# ---------------------------------------------------------------------------
# optimized sweeps


def _sweep_curve(task):
    method, params, distances, total_pulses, eps, f, basis_prob = task
    out = []
    for d in distances:
        opt = optimize_protocol(params.at(d), total_pulses, eps, method, f=f, basis_prob=basis_prob)
        out.append((opt.rate, opt.ensemble))
    return out


def sweep(params: ChannelParams, total_pulses: float, epsilon: float, distances: Sequence[float],
          curves: Sequence[str] = SWEEP_CURVES, f: float = 1.22, basis_prob: float = 0.5,
          workers: int = 1) -> Table:
    """Optimized key rate per pulse against distance, one column per curve.

    Every distance runs the full multi-start search.  The exact curve also
    reports its optimized intensities and shares.
    """
    tasks = [(c, params, tuple(distances), total_pulses, epsilon, f, basis_prob) for c in curves]
    results = dict(zip(curves, fan_out(_sweep_curve, tasks, workers)))
    cols = ("distance",) + tuple(f"rate_{c}" for c in curves)
    extra = sb.BoundMethod.EXACT.value in results
    if extra:
        cols += ("exact_mu", "exact_nu", "exact_q_signal", "exact_q_weak")
    rows = []
    for i, d in enumerate(distances):
        row = [float(d)] + [results[c][i][0] for c in curves]
        if extra:
            row += list(_point_of(results[sb.BoundMethod.EXACT.value][i][1]))
        rows.append(tuple(row))
    return Table("sweep", cols, tuple(rows), (("n", repr(total_pulses)), ("epsilon", repr(epsilon))))


def _maxdist_task(task):
    method, n, eps, params, f, basis_prob = task
    return max_secure_distance(n, eps, method, params, f=f, basis_prob=basis_prob).distance


def maxdist(params: ChannelParams, epsilon: float, n_values: Sequence[float],
            curves: Sequence[str] = FINITE_METHODS, f: float = 1.22, basis_prob: float = 0.5,
            workers: int = 1) -> Table:
    """Maximum secure distance against pulses sent, plus the asymptote."""
    tasks = [(c, n, epsilon, params, f, basis_prob) for c in curves for n in n_values]
    dists = fan_out(_maxdist_task, tasks, workers)
    asym = max_secure_distance(1.0, epsilon, ASYMPTOTE, params, f=f, basis_prob=basis_prob).distance
    k = len(n_values)
    rows = []
    for j, n in enumerate(n_values):
        rows.append((float(n),) + tuple(dists[i * k + j] for i in range(len(curves))) + (asym,))
    cols = ("n",) + tuple(f"distance_{c}" for c in curves) + (f"distance_{ASYMPTOTE}",)
    return Table("maxdist", cols, tuple(rows),
                 (("epsilon", repr(epsilon)), ("resolution_km", "0.5")))


# ---------------------------------------------------------------------------
# Monte-Carlo coverage

# Bernoulli trials per sample, as a multiple of the mean (at least 100)
COVERAGE_TRIAL_FACTOR = 10
_CHUNKS = 16


def coverage_allowance(eps: float, trials: int) -> float:
    """Largest miss rate consistent with ``eps`` at three standard errors."""
    return eps + 3.0 * math.sqrt(eps / trials)


def interval_misses(method, mean: float, eps: float, trials: int, seed) -> int:
    """Trials whose interval misses ``mean`` when the count is Binomial with that mean.

    Each sample sums ``max(10 * mean, 100)`` Bernoulli trials; the
    Chernoff+Hoeffding engine receives that trial count.
    """
    method = sb.BoundMethod.parse(method)
    rng = np.random.default_rng(seed)
    n = max(int(math.ceil(COVERAGE_TRIAL_FACTOR * mean)), 100)
    draws = rng.binomial(n, mean / n, size=trials)
    values, counts = np.unique(draws, return_counts=True)
    misses = 0
    for v, c in zip(values, counts):
        b = sb.mean_bounds(float(v), eps, method, n=float(n))
        if not b.lower <= mean <= b.upper:
            misses += int(c)
    return misses


def _coverage_task(task):
    method, mean, eps, trials, seed = task
    return interval_misses(method, mean, eps, trials, seed)


def _split(trials: int, chunks: int) -> List[int]:
    base, extra = divmod(trials, chunks)
    return [base + (1 if i < extra else 0) for i in range(chunks) if base or i < extra]


def interval_coverage(means: Sequence[float], eps: float, trials: int, seed: int,
                      methods: Sequence = TABLE2_METHODS, workers: int = 1) -> Table:
    """Empirical miss rates of each engine's interval at several true means."""
    root = np.random.SeedSequence(seed)
    cells = [(sb.BoundMethod.parse(m), mean) for m in methods for mean in means]
    chunks = _split(trials, _CHUNKS)
    tasks = []
    for (m, mean), ss in zip(cells, root.spawn(len(cells))):
        tasks += [(m, mean, eps, n, child) for n, child in zip(chunks, ss.spawn(len(chunks)))]
    misses = fan_out(_coverage_task, tasks, workers)
    allowed = coverage_allowance(eps, trials)
    rows = []
    for i, (m, mean) in enumerate(cells):
        miss = sum(misses[i * len(chunks):(i + 1) * len(chunks)])
        rate = miss / trials
        rows.append((m.value, float(mean), trials, miss, rate, allowed, "pass" if rate <= allowed else "fail"))
    return Table("coverage", ("method", "mean", "trials", "misses", "miss_rate", "allowed", "verdict"),
                 tuple(rows), (("epsilon", repr(eps)), ("seed", str(seed))))


@dataclass(frozen=True)
class SoundnessCount:
    trials: int
    failures: int
    m1_failures: int
    phase_failures: int
    skipped: int = 0


def _soundness_task(task):
    ensemble, params, eps, trials, seed, method, basis_prob = task
    rng = np.random.default_rng(seed)
    fails = m1_fails = ph_fails = 0
    for _ in range(trials):
        tallies, truth = sample_tallies_with_truth(ensemble, params, basis_prob, seed=rng)
        est = estimate(tallies, ensemble, eps, method)
        bad_m1 = any(est[b].m1_signal_lower > truth.signal_single_photon_detections[b] for b in BASES)
        bad_ph = any(est[b].phase_error_upper < truth.phase_error_rate(b) for b in BASES)
        m1_fails += bad_m1
        ph_fails += bad_ph
        fails += bad_m1 or bad_ph
    return SoundnessCount(trials, fails, m1_fails, ph_fails)


def estimator_soundness(ensemble: PulseEnsemble, params: ChannelParams, eps: float, trials: int,
                        seed: int, method=sb.BoundMethod.EXACT, basis_prob: float = 0.5,
                        workers: int = 1) -> SoundnessCount:
    """Sample photon-resolved tallies and count trials where a certified bound fails.

    A trial fails when, in either basis, the signal single-photon count
    bound exceeds the hidden count or the phase-error bound falls below
    the hidden phase-error rate.
    """
    method = sb.BoundMethod.parse(method)
    chunks = _split(trials, _CHUNKS)
    seeds = np.random.SeedSequence(seed).spawn(len(chunks))
    tasks = [(ensemble, params, eps, n, s, method, basis_prob) for n, s in zip(chunks, seeds)]
    parts = fan_out(_soundness_task, tasks, workers)
    return SoundnessCount(sum(p.trials for p in parts), sum(p.failures for p in parts),
                          sum(p.m1_failures for p in parts), sum(p.phase_failures for p in parts))


SOUNDNESS_ENSEMBLE = dict(signal_intensity=0.37, weak_intensity=0.126, signal_share=0.65, weak_share=0.25)


def soundness_table(params: ChannelParams, total_pulses: float, eps: float, trials: int, seed: int,
                    method=sb.BoundMethod.EXACT, basis_prob: float = 0.5, workers: int = 1,
                    ensemble: PulseEnsemble = None) -> Table:
    ensemble = ensemble or PulseEnsemble(total_pulses=total_pulses, **SOUNDNESS_ENSEMBLE)
    s = estimator_soundness(ensemble, params, eps, trials, seed, method, basis_prob, workers)
    success = 1.0 - s.failures / s.trials
    need = 1.0 - 8.0 * eps
    return Table("soundness",
                 ("method", "trials", "failures", "m1_failures", "phase_failures", "success_rate",
                  "required", "verdict"),
                 ((sb.BoundMethod.parse(method).value, s.trials, s.failures, s.m1_failures, s.phase_failures,
                   success, need, "pass" if success >= need else "fail"),),
                 (("epsilon_step", repr(eps)), ("budget", repr(8.0 * eps)), ("distance", repr(params.distance)),
                  ("n", repr(total_pulses)), ("seed", str(seed))))
