import pytest

from decoyfk.channel_model import ChannelParams, expected_tallies
from decoyfk.decoy_estimator import BASES, PulseEnsemble, SinglePhotonEstimate, estimate
from decoyfk.errors import DomainError
from decoyfk.key_rate import (KeyRateResult, asymptotic_key_rate, basis_key, finite_key_length, key_rate,
                              key_rate_from_estimates)

REFERENCE_ENSEMBLE = dict(signal_intensity=0.370, weak_intensity=0.126, signal_share=0.650, weak_share=0.250)
EPS_STEP = 1e-10


def ens(n=1e10):
    return PulseEnsemble(total_pulses=n, **REFERENCE_ENSEMBLE)


def rate_at(distance, n=1e10, method="exact", params=None):
    params = (params or ChannelParams()).at(distance)
    return key_rate(expected_tallies(ens(n), params), ens(n), EPS_STEP, method)


def test_reference_point_rate():
    r = rate_at(100)
    assert 2.6e-6 <= r.rate <= 3.5e-6
    assert r.rate == pytest.approx(3.2834e-6, rel=1e-4)
    assert r.budget == pytest.approx(8e-10)
    assert r.key_bits_z == pytest.approx(r.key_bits_x)


def test_rate_equals_bits_over_pulses():
    r = rate_at(60)
    assert r.rate == pytest.approx((r.key_bits_z + r.key_bits_x) / 1e10, rel=1e-15)


def test_rejects_bad_inefficiency():
    t = expected_tallies(ens(), ChannelParams(distance=10))
    with pytest.raises(DomainError):
        key_rate(t, ens(), EPS_STEP, f=0.9)
    with pytest.raises(DomainError):
        asymptotic_key_rate(ens(), ChannelParams(), f=0.5)


def test_clamped_key_is_flagged():
    r = rate_at(140)
    assert r.rate == 0.0
    assert r.raw_key < 0.0
    assert "Z:key-clamped" in r.flags


def test_capped_phase_error_gives_no_privacy_term():
    t = expected_tallies(ens(), ChannelParams(distance=10))
    est = SinglePhotonEstimate("Z", 1e6, 0.2, 1e6, 0.5, 0.3, 0.0)
    assert basis_key(est, t).privacy_term == 0.0
    assert finite_key_length(est, t) == 0.0


def test_rate_decreases_with_distance():
    rates = [rate_at(d).rate for d in range(0, 121, 20)]
    assert all(a > b for a, b in zip(rates, rates[1:]))


def test_rate_increases_with_pulses():
    rates = [rate_at(80, n).rate for n in (1e8, 1e9, 1e10, 1e11, 1e12)]
    assert all(a < b for a, b in zip(rates, rates[1:]))


def test_worse_error_correction_costs_key():
    t = expected_tallies(ens(), ChannelParams(distance=50))
    rates = [key_rate(t, ens(), EPS_STEP, f=f).rate for f in (1.0, 1.1, 1.22, 1.5)]
    assert all(a > b for a, b in zip(rates, rates[1:]))


@pytest.mark.parametrize("distance", range(0, 151, 25))
@pytest.mark.parametrize("n", [1e8, 1e10, 1e12])
def test_finite_never_beats_collapsed_or_asymptote(distance, n):
    fin = rate_at(distance, n).rate
    inf = rate_at(distance, n, "infinite").rate
    asym = asymptotic_key_rate(ens(n), ChannelParams(distance=distance))
    assert fin <= inf * (1 + 1e-12)
    assert inf <= asym * (1 + 1e-12)


def test_noiseless_channel_keeps_privacy_term():
    params = ChannelParams(background_yield=0.0, misalignment=0.0)
    r = rate_at(20, 1e12, "infinite", params)
    for b in BASES:
        assert r.estimates[b].phase_error_upper == pytest.approx(0.0, abs=1e-9)
        assert r.raw_key_z > 0 and r.ec_cost_z == 0.0


def test_no_transmission_gives_zero():
    params = ChannelParams(detector_efficiency=0.0)
    r = rate_at(0, 1e10, "exact", params)
    assert r.rate == 0.0
    assert asymptotic_key_rate(ens(), params) == 0.0


def test_zero_pulses_give_zero_rate():
    est = estimate(expected_tallies(ens(), ChannelParams(distance=10)), ens(), EPS_STEP)
    r = key_rate_from_estimates(est, expected_tallies(ens(), ChannelParams(distance=10)), 0.0)
    assert r.rate == 0.0


def test_zero_result():
    z = KeyRateResult.zero({"x"})
    assert z.rate == 0.0 and z.raw_key == 0.0 and z.flags == frozenset({"x"})


def test_asymptote_reference_values():
    assert asymptotic_key_rate(ens(), ChannelParams(distance=100)) == pytest.approx(1.641e-5, rel=1e-3)
    single = asymptotic_key_rate(ens(), ChannelParams(distance=100), basis_prob=1.0)
    assert single == pytest.approx(2 * asymptotic_key_rate(ens(), ChannelParams(distance=100)))
