"""Reproduction checks, one PASS/FAIL line per criterion.

Lines are collected in ``RESULTS`` and printed in the terminal summary by
``conftest.py``.  Run ``python tests/test_acceptance.py`` to print them
without pytest.
"""

import math

import mpmath as mp
import numpy as np
import pytest

from decoyfk import stat_bounds as sb
from decoyfk.channel_model import ChannelParams, gain_and_qber
from decoyfk.decoy_estimator import PulseEnsemble
from decoyfk.experiments import (interval_coverage, estimator_soundness, lower_bound_crossover, maxdist,
                                 sweep, table2)
from decoyfk.optimizer import optimize_protocol

import oracles

RESULTS = []

EPS = 1e-10
CH = sb.BoundMethod.CHERNOFF_HOEFFDING.value
GAUSSIAN_TARGETS = (-2.56, -6.24, -11.59, -18.64)
EXACT_TARGETS = (-1.65, -5.12, -10.33, -17.28)
CH_TARGETS = (-0.57, -1.90, -3.90, -6.57)
REFERENCE_RATE = 3.04e-6
REFERENCE_POINT = dict(signal_intensity=0.370, weak_intensity=0.126, weak_share=0.250, signal_share=0.650)
PULSE_COUNTS = tuple(10.0 ** k for k in range(7, 15))


def verdict(criterion, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _fmt(xs):
    return "[" + ", ".join(f"{x:.3f}" for x in xs) + "]"


@pytest.fixture(scope="module")
def failure_table():
    t = table2()
    return {c: t.column(c) for c in t.columns}


@pytest.fixture(scope="module")
def max_distances():
    t = maxdist(ChannelParams(), EPS, PULSE_COUNTS)
    return {c: t.column(c) for c in t.columns}


@pytest.fixture(scope="module")
def rate_sweep():
    t = sweep(ChannelParams(), 1e10, EPS, tuple(float(d) for d in range(0, 151, 10)))
    return {c: t.column(c) for c in t.columns}


def test_criterion_1_gaussian_column(failure_table):
    got = failure_table["log10_gaussian"]
    ok = all(abs(g - w) <= 0.02 for g, w in zip(got, GAUSSIAN_TARGETS))
    verdict(1, ok, f"log10 failure {_fmt(got)} vs {list(GAUSSIAN_TARGETS)} (tol 0.02)")


def test_criterion_2_new_method_column(failure_table):
    got = failure_table["log10_exact"]
    ok = all(abs(g - w) <= 0.02 for g, w in zip(got, EXACT_TARGETS))
    chi = 1e10
    finite = []
    for n in failure_table["n_sigma"]:
        d = n / math.sqrt(chi)
        finite.append(math.log10(sb.interval_failure_probability(chi, sb.DeviationPair(d, d))))
    ok_finite = all(abs(a - b) <= 0.01 for a, b in zip(finite, got))
    verdict(2, ok and ok_finite,
            f"asymptotic {_fmt(got)} vs {list(EXACT_TARGETS)} (tol 0.02); at chi=1e10 {_fmt(finite)} (tol 0.01)")


def test_criterion_3_chernoff_hoeffding_column(failure_table):
    got = failure_table["log10_ch_operational"]
    alt = failure_table["log10_ch_corollary"]
    ok = all(abs(g - w) <= 0.5 for g, w in zip(got, CH_TARGETS))
    verdict(3, ok, f"operational {_fmt(got)}, corollary {_fmt(alt)} vs {list(CH_TARGETS)} (tol 0.5), "
                   "budget eps1 = eps2 = eps3 = eps/2")


def test_criterion_4_beta():
    beta = sb.FailureProbability(EPS).beta
    upper = sb.invert_mean_bounds_exact(0.0, EPS).upper
    ok = round(beta, 4) == 23.7190 and round(upper, 4) == 23.7190
    verdict(4, ok, f"beta = {beta:.6f}, zero-count upper bound = {upper:.6f}")


def test_criterion_5_lower_bound_crossover():
    chi = lower_bound_crossover(EPS)
    ok = 2100 <= chi <= 2400
    verdict(5, ok, f"Gaussian lower bound overtakes the exact one at chi = {chi:.1f} (want [2100, 2400])")


@pytest.mark.slow
def test_criterion_6_optimized_reference_point():
    opt = optimize_protocol(ChannelParams(distance=100), 1e10, EPS, "exact")
    e = opt.ensemble
    got = {k: getattr(e, k) for k in REFERENCE_POINT}
    ok_rate = 2.6e-6 <= opt.rate <= 3.5e-6
    ok_point = all(abs(got[k] - v) <= 0.05 for k, v in REFERENCE_POINT.items())
    verdict(6, ok_rate and ok_point,
            f"rate {opt.rate:.4e} (want [2.6e-6, 3.5e-6], reference {REFERENCE_RATE:.2e}); "
            f"mu {e.signal_intensity:.4f} nu {e.weak_intensity:.4f} "
            f"q_weak {e.weak_share:.4f} q_signal {e.signal_share:.4f} (tol 0.05)")


@pytest.mark.slow
def test_criterion_7_distance_sweep(rate_sweep, max_distances):
    asym, exact, ch = rate_sweep["rate_asymptote"], rate_sweep["rate_exact"], rate_sweep[f"rate_{CH}"]
    ordered = all(a >= x * (1 - 1e-12) and x >= c * (1 - 1e-12) for a, x, c in zip(asym, exact, ch))
    row = PULSE_COUNTS.index(1e10)
    gap = max_distances["distance_exact"][row] - max_distances[f"distance_{CH}"][row]
    short = [mu for d, mu in zip(rate_sweep["distance"], rate_sweep["exact_mu"]) if d <= 20]
    ok_mu = all(abs(mu - 0.45) <= 0.05 for mu in short)
    verdict(7, ordered and abs(gap - 7) <= 2 and ok_mu,
            f"asymptote >= exact >= C+H at all {len(asym)} distances: {ordered}; "
            f"max-distance gap {gap:.2f} km (want 7 +- 2); mu at 0-20 km {_fmt(short)} (want 0.45 +- 0.05)")


@pytest.mark.slow
def test_criterion_8_max_distance_endpoints(max_distances):
    asym = max_distances["distance_asymptote"][0]
    at_1e7 = {m: max_distances[f"distance_{m}"][0] for m in ("exact", "gaussian", CH)}
    mono = all(all(a <= b for a, b in zip(max_distances[f"distance_{m}"], max_distances[f"distance_{m}"][1:]))
               for m in ("exact", "gaussian", CH))
    ok = abs(asym - 142) <= 2 and all(v == 0 for v in at_1e7.values()) and mono
    verdict(8, ok, f"asymptote {asym:.2f} km (want 142 +- 2); at N=1e7 "
                   + ", ".join(f"{m} {v:.2f} km" for m, v in at_1e7.items())
                   + f" (want 0); nondecreasing in N: {mono}")


def _round_trip_residual(chi):
    b = sb.invert_mean_bounds_exact(chi, EPS)
    beta = oracles.beta(EPS)
    chi_mp = mp.mpf(chi)
    res = []
    for m in (b.lower, b.upper):
        if m > 0:
            m = mp.mpf(m)
            res.append(abs(chi_mp * mp.log(chi_mp / m) - chi_mp + m - beta) / beta)
    return float(max(res))


@pytest.mark.slow
def test_criterion_9_property_suites():
    residual = max(_round_trip_residual(c) for c in np.logspace(-6, 11, 150))
    eps, trials = 1e-2, 100_000
    cover = interval_coverage((10.0, 100.0, 1e4), eps, trials, seed=2024, methods=("exact",))
    worst = max(cover.column("miss_rate"))
    allowed = cover.column("allowed")[0]
    mixture = 0.0
    for mu in (0.05, 0.126, 0.37, 0.9, 2.0):
        q, eq = gain_and_qber(mu, 3.6e-4, 1.7e-6, 0.033)
        oq, oeq = oracles.poisson_gain(mu, 3.6e-4, 1.7e-6, 0.033)
        mixture = max(mixture, float(abs(q - oq) / oq), float(abs(eq - oeq) / oeq))
    sound = estimator_soundness(PulseEnsemble(0.37, 0.126, 0.65, 0.25, 1e9), ChannelParams(distance=50),
                                eps, 10_000, seed=11)
    success = 1 - sound.failures / sound.trials
    ok = residual < 1e-10 and worst <= allowed and mixture < 1e-10 and success >= 1 - 8 * eps
    verdict(9, ok, f"round-trip residual {residual:.1e} (< 1e-10); coverage worst miss {worst:.5f} "
                   f"(<= {allowed:.5f}); mixture {mixture:.1e} (< 1e-10); soundness {success:.4f} "
                   f"(>= {1 - 8 * eps:.2f})")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s"]))
