import pytest
from hypothesis import given, settings, strategies as st

from decoyfk.channel_model import ChannelParams, expected_tallies
from decoyfk.errors import ValidationError
from decoyfk.key_rate import key_rate
from decoyfk.optimizer import (ASYMPTOTE, Schedule, SearchBox, Variable, ensemble_from_point, local_search,
                               max_secure_distance, optimize_protocol, protocol_objective)

BOX2 = SearchBox((Variable("a", -1.0, 1.0, 0.0, 0.25), Variable("b", -1.0, 1.0, 0.0, 0.25)))


def test_variable_validation():
    with pytest.raises(ValidationError):
        Variable("x", 1.0, 0.0, 0.5, 0.1)
    with pytest.raises(ValidationError):
        Variable("x", 0.0, 1.0, 2.0, 0.1)
    with pytest.raises(ValidationError):
        Variable("x", 0.0, 1.0, 0.5, 0.0)


def test_lattice_is_interior_and_feasible():
    box = SearchBox.protocol()
    pts = box.lattice(3)
    assert 0 < len(pts) <= 81
    assert all(box.contains(p) for p in pts)
    assert Variable("x", 0.0, 1.0, 0.5, 0.1).levels(3) == (0.25, 0.5, 0.75)


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8))
def test_finds_peak_of_concave_quadratic(a0, b0):
    res = local_search(lambda p: -(p[0] - a0) ** 2 - 2 * (p[1] - b0) ** 2, BOX2)
    assert res.point[0] == pytest.approx(a0, abs=1e-3)
    assert res.point[1] == pytest.approx(b0, abs=1e-3)


def test_peak_on_the_boundary():
    res = local_search(lambda p: p[0] + p[1], BOX2)
    assert res.point == (1.0, 1.0)


def test_constant_objective_returns_start():
    res = local_search(lambda p: 1.0, BOX2, Schedule(levels=0))
    assert res.point == BOX2.initial
    # ties across starts resolve to the lexicographically smallest start
    assert local_search(lambda p: 1.0, BOX2).point == min(BOX2.lattice(3))


def test_search_is_deterministic():
    f = lambda p: -(p[0] - 0.3) ** 2 - abs(p[1] + 0.2)
    assert local_search(f, BOX2) == local_search(f, BOX2)


def test_infeasible_moves_are_never_evaluated():
    box = SearchBox(BOX2.variables, lambda p: p[0] <= p[1])
    seen = []

    def f(p):
        seen.append(p)
        return p[0] - p[1] * 0.1

    res = local_search(f, box)
    assert all(p[0] <= p[1] for p in seen)
    assert res.point[0] == pytest.approx(res.point[1], abs=1e-3)


def test_evaluation_cap():
    res = local_search(lambda p: -(p[0] - 0.1) ** 2, BOX2, Schedule(levels=0, max_evaluations=5))
    assert res.evaluations <= 6


def test_zero_key_objective_tracks_key_deficit():
    params = ChannelParams(distance=160)
    obj = protocol_objective(params, 1e10, 1e-10, "exact")
    for point in [(0.8, 0.25, 0.2, 0.6), (0.4, 0.12, 0.65, 0.25)]:
        ens = ensemble_from_point(point, 1e10)
        res = key_rate(expected_tallies(ens, params), ens, 1e-10)
        assert res.rate == 0.0 and res.raw_key < 0.0
        assert obj(point) == pytest.approx(1e-9 * res.raw_key / 1e10, rel=1e-12)


def test_asymptote_optimizes_intensity_only():
    opt = optimize_protocol(ChannelParams(distance=100), 1e10, 1e-10, ASYMPTOTE)
    assert opt.ensemble.signal_share == 1.0
    assert 0.4 < opt.ensemble.signal_intensity < 0.55
    assert opt.rate == pytest.approx(1.7186e-5, rel=1e-3)


@pytest.mark.slow
def test_reference_optimum_at_hundred_km():
    opt = optimize_protocol(ChannelParams(distance=100), 1e10, 1e-10, "exact")
    e = opt.ensemble
    assert 2.6e-6 <= opt.rate <= 3.5e-6
    for got, want in [(e.signal_intensity, 0.370), (e.weak_intensity, 0.126),
                      (e.weak_share, 0.250), (e.signal_share, 0.650)]:
        assert got == pytest.approx(want, abs=0.05)
    assert e.vacuum_share >= 0.01 - 1e-12
    # deterministic rerun
    assert optimize_protocol(ChannelParams(distance=100), 1e10, 1e-10, "exact").ensemble == e


def test_no_key_anywhere():
    opt = optimize_protocol(ChannelParams(detector_efficiency=0.0), 1e10, 1e-10, "exact",
                            schedule=Schedule(levels=0))
    assert opt.rate == 0.0 and opt.diagnostic
    res = max_secure_distance(1e10, 1e-10, "exact", ChannelParams(detector_efficiency=0.0),
                              schedule=Schedule(levels=0))
    assert res.distance == 0.0


def test_max_distance_of_asymptote():
    res = max_secure_distance(1e10, 1e-10, ASYMPTOTE, ChannelParams())
    assert res.distance == pytest.approx(142, abs=2)
    positive = [d for d, r in res.probes if r > 0]
    negative = [d for d, r in res.probes if r == 0]
    assert max(positive) == res.distance
    assert min(negative) - res.distance <= 0.5
