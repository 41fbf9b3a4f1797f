import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cunec.errors import InvalidArgumentError, OutOfRangeError, UnsampledParameterError
from cunec.geometry import Role, Route
from cunec.pathloss import (ALPHA_BETA_LOS, ALPHA_BETA_NLOS, AlphaBetaParams, K_ACT_STEEP,
                            alpha_beta_pl, combine_routes, combine_with_ort, corner_activation,
                            fspl_1m, mean_pl_first_segment, mean_pl_route, mean_pl_second_segment,
                            mean_pl_zeroth)

C = 299792458.0
F = 3.5e9
MEANS0 = {"delta": 6.3, "exponent": 1.56}
MEANS1 = {"delta": 29.7, "exponent": 1.4, "kappa": 0.037, "corner_offset": 9.2}
MEANS2 = {"exponent": 1.3}


def test_fspl():
    assert fspl_1m(F) == pytest.approx(43.33, abs=0.01)
    assert fspl_1m(C / (4 * math.pi)) == pytest.approx(0.0, abs=1e-12)
    assert fspl_1m(7e9) - fspl_1m(F) == pytest.approx(20 * math.log10(2), abs=1e-12)
    with pytest.raises(InvalidArgumentError):
        fspl_1m(0)


def test_zeroth_order_examples():
    assert mean_pl_zeroth(1, 6.3, 1.56, F) == pytest.approx(49.63, abs=0.01)
    assert mean_pl_zeroth(100, 6.3, 1.56, F) == pytest.approx(80.83, abs=0.01)
    assert mean_pl_zeroth(100, 6.0, 1.58, F) == pytest.approx(80.93, abs=0.01)
    assert mean_pl_zeroth(100, 6.0, 1.58, F) == pytest.approx(alpha_beta_pl(100, ALPHA_BETA_LOS, F))
    with pytest.raises(OutOfRangeError):
        mean_pl_zeroth(0.5, 6.3, 1.56, F)


def test_corner_activation_examples():
    assert corner_activation(70, 70) == 0.5
    assert corner_activation(1e12, 70) == pytest.approx(1.0, abs=1e-9)
    # atan(-0.7) = -0.61073 rad by series; -0.61073 / pi + 0.5
    assert corner_activation(0, 70) == pytest.approx(0.30560, abs=1e-4)
    assert corner_activation(80, 70, K_ACT_STEEP) == pytest.approx(math.atan(100) / math.pi + 0.5)
    with pytest.raises(InvalidArgumentError):
        corner_activation(-1)


@given(st.floats(0, 1e4), st.floats(0, 1e4))
def test_corner_activation_monotone_bounded(a, b):
    lo, hi = sorted((a, b))
    ga, gb = corner_activation(lo), corner_activation(hi)
    assert 0 < ga <= gb < 1
    if hi - lo > 1e-3:
        assert ga < gb


def test_first_segment_examples():
    far = mean_pl_first_segment(1e6, 80, 0, 29.7, 9.2, 0.037, 0.0)
    assert far == pytest.approx(29.7)
    v = mean_pl_first_segment(1 / 0.037, 80, 0, 29.7, 9.2, 0.037, 0.0)
    assert v == pytest.approx(29.7 * (1 - math.exp(-1)), abs=1e-9)
    assert v == pytest.approx(18.77, abs=0.01)
    # below 1 m only the corner term remains
    near = mean_pl_first_segment(0.5, 80, 1, 29.7, 9.2, 0.037, 5.0)
    assert near == pytest.approx((29.7 + 9.2) * (1 - math.exp(-0.037 * 0.5)))
    for bad in ((0, 0.037), (-1, 0.037), (10, 0), (10, -0.1)):
        with pytest.raises(InvalidArgumentError):
            mean_pl_first_segment(bad[0], 80, 0, 29.7, 9.2, bad[1], 1.4)


@given(st.floats(0.01, 2000), st.floats(0, 60), st.floats(0, 20), st.floats(1e-3, 0.2), st.integers(0, 1))
def test_corner_term_saturates(d1, delta, c, kappa, ind):
    full = delta + c * ind
    term = mean_pl_first_segment(d1, 80, ind, delta, c, kappa, 0.0)
    assert abs(term - full) <= full * math.exp(-kappa * d1) + 1e-9
    assert mean_pl_first_segment(d1 * 1.5, 80, ind, delta, c, kappa, 0.0) >= term - 1e-12


def test_second_segment():
    assert mean_pl_second_segment(1, 1.3) == 0.0
    assert mean_pl_second_segment(100, 1.3) == pytest.approx(26.0)


def route(order, segs, ids, start=Role.AP, ind=0):
    corners = tuple((float(k), 0.0) for k in range(order))
    return Route(order, corners, segs, ids, start, ind)


def test_mean_pl_route_orders():
    params = {("H0", 0): MEANS0, ("V1", 1): MEANS1, ("H1", 2): MEANS2}
    r0 = mean_pl_route(route(0, (100.0,), ("H0",)), params, F)
    assert r0.total_db == pytest.approx(80.83, abs=0.01) and r0.order == 0
    r1 = mean_pl_route(route(1, (80.0, 50.0), ("H0", "V1")), params, F)
    expect = mean_pl_zeroth(80, 6.3, 1.56, F) + mean_pl_first_segment(50, 80, 0, 29.7, 9.2, 0.037, 1.4)
    assert r1.total_db == pytest.approx(expect)
    assert sum(r1.per_segment_db) == pytest.approx(r1.total_db)
    r2 = mean_pl_route(route(2, (80.0, 50.0, 1.0), ("H0", "V1", "H1")), params, F)
    assert r2.total_db == pytest.approx(r1.total_db)
    assert not r2.in_validity_range  # d2 = 1 is on the open bound


def test_mean_pl_route_nlos1_rises_tens_of_db():
    params = {("H0", 0): MEANS0, ("V1", 1): MEANS1}
    pl = [mean_pl_route(route(1, (80.0, float(d)), ("H0", "V1")), params, F).total_db for d in range(1, 101)]
    assert np.all(np.diff(pl) > 0)
    assert 20 < pl[-1] - pl[0] < 80


def test_mean_pl_route_reciprocal():
    params = {("H0", 0): MEANS0, ("V1", 1): MEANS1, ("H1", 2): MEANS2}
    r = route(2, (80.0, 120.0, 33.0), ("H0", "V1", "H1"), Role.AP, 1)
    assert mean_pl_route(r, params, F) == mean_pl_route(r.reversed(), params, F)


def test_mean_pl_route_missing_params():
    with pytest.raises(UnsampledParameterError):
        mean_pl_route(route(1, (80.0, 50.0), ("H0", "V1")), {("H0", 0): MEANS0}, F)


def test_combine_examples():
    assert combine_routes([100]) == 100
    assert combine_routes([100, 100]) == pytest.approx(96.99, abs=0.001)
    assert combine_routes([90, 110]) == pytest.approx(89.957, abs=0.001)
    assert combine_routes([90, 110]) == pytest.approx(-10 * math.log10(1e-9 + 1e-11), abs=1e-9)
    with pytest.raises(InvalidArgumentError):
        combine_routes([])
    with pytest.raises(InvalidArgumentError):
        combine_routes([float("nan")])


def test_combine_with_ort_examples():
    assert combine_with_ort(120, math.inf) == 120
    assert combine_with_ort(120, 120) == pytest.approx(116.99, abs=0.01)
    assert combine_with_ort(130, 115) == pytest.approx(114.86, abs=0.01)


pls = st.lists(st.floats(20, 250), min_size=1, max_size=6)


@given(pls)
def test_combine_bounded_by_strongest(xs):
    out = combine_routes(xs)
    assert out <= min(xs) + 1e-9
    # a second path adds visible power unless it is ~150 dB weaker
    if len(xs) > 1 and sorted(xs)[1] - min(xs) < 100:
        assert out < min(xs)


@given(pls, st.randoms())
def test_combine_permutation_invariant(xs, rnd):
    ys = list(xs)
    rnd.shuffle(ys)
    assert combine_routes(ys) == combine_routes(xs)


@given(st.floats(20, 250), st.floats(20, 250), st.floats(20, 250))
def test_combine_associative(a, b, c):
    assert combine_routes([a, b, c]) == pytest.approx(combine_routes([combine_routes([a, b]), c]), abs=1e-9)


def test_alpha_beta_examples():
    assert alpha_beta_pl(1, ALPHA_BETA_LOS, F) == pytest.approx(49.33, abs=0.01)
    assert alpha_beta_pl(100, ALPHA_BETA_NLOS, F) == pytest.approx(113.13, abs=0.01)
    # 6 + 15.8 * 1.17609 + 43.33
    assert alpha_beta_pl(15, ALPHA_BETA_LOS, F) == pytest.approx(67.91, abs=0.01)
    with pytest.raises(OutOfRangeError):
        alpha_beta_pl(0.9, ALPHA_BETA_LOS, F)
    with pytest.raises(InvalidArgumentError):
        AlphaBetaParams(0, 2, -1, 1)
    with pytest.raises(InvalidArgumentError):
        AlphaBetaParams(0, 2, 1, 0)


@given(st.floats(1, 1e4), st.floats(1, 1e4), st.floats(0.1, 8))
def test_log_distance_models_increase(d1, d2, b):
    lo, hi = sorted((d1, d2))
    if hi - lo < 1e-6:
        return
    assert mean_pl_zeroth(lo, 0, b, F) < mean_pl_zeroth(hi, 0, b, F)
    p = AlphaBetaParams(0, b, 1, 1)
    assert alpha_beta_pl(lo, p, F) < alpha_beta_pl(hi, p, F)
