import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from macwt.channel import InfoTerms, InputDistribution, MacWiretapChannel, info_terms, noisy_xor_channel
from macwt.regions import (
    RatePentagon,
    RateRegion,
    RateRegionEstimator,
    capacity_pentagon,
    convex_hull,
    hausdorff_distance,
    hull_over_inputs,
    pentagons_over_inputs,
    ramp_index,
    ramp_schedule,
    schedule_rows,
    secrecy_pentagon,
    slot_average_rate,
    uniform_grid,
)

from _oracle import ramp_index as oracle_ramp_index

UNIFORM = InputDistribution.uniform(2, 2)


@st.composite
def info_terms_positive(draw):
    """Consistent terms with strictly positive secrecy bounds."""
    a = draw(st.floats(0.05, 1.0))
    b = draw(st.floats(0.05, 1.0))
    s = draw(st.floats(max(a, b), a + b))
    # eve fractions are zero or well above round-off, which ramp_index absorbs
    frac = st.just(0.0) | st.floats(1e-6, 0.9)
    e1 = a * draw(frac)
    e2 = b * draw(frac)
    assume(s - e1 - e2 > 1e-3)
    return InfoTerms(a, b, s, e1, e2)


def test_pentagon_validation_and_clipping():
    with pytest.raises(ValueError):
        RatePentagon(1.0, 0.5, 0.4)
    with pytest.raises(ValueError):
        RatePentagon(0.3, 0.3, 0.7)
    p = RatePentagon.from_bounds(0.8, -0.2, 0.5)
    assert (p.r1_max, p.r2_max, p.rsum_max) == (0.5, 0.0, 0.5)
    assert not p.empty
    assert RatePentagon.from_bounds(0.3, 0.2, -0.1).empty


def test_pentagon_vertices_and_contains():
    p = RatePentagon(1.0, 1.0, 1.5)
    assert p.vertices() == [(0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (0.5, 1.0), (0.0, 1.0)]
    assert p.contains([[0.75, 0.75], [1.0, 0.5]]).all()
    assert not p.contains([0.8, 0.8]).any()


def test_independent_eve_gives_equal_pentagons():
    law = np.zeros((2, 2, 4, 2))
    for x1 in range(2):
        for x2 in range(2):
            law[x1, x2, 2 * x1 + x2] = [0.3, 0.7]
    t = info_terms(MacWiretapChannel(law), UNIFORM)
    assert secrecy_pentagon(t) == capacity_pentagon(t)


def test_single_user_analogy():
    # the second user is absent: every X2 term vanishes
    p = secrecy_pentagon(InfoTerms(0.8, 0.0, 0.8, 0.3, 0.0))
    assert p.r1_max == pytest.approx(0.5)
    assert secrecy_pentagon(InfoTerms(0.3, 0.0, 0.3, 0.8, 0.0)).r1_max == 0.0


def test_noisy_xor_eve_x1_pentagon_frozen():
    # hand-evaluated joint table: I(X1;Y|X2) = 1 - h(0.11), I(X1;Z) = 1 - h(0.25), I(X2;Z) = 0
    t = info_terms(noisy_xor_channel(0.11, 0.25, eve="x1"), UNIFORM)
    assert t.i_x1_z == pytest.approx(0.18872187554086706, abs=1e-12)
    assert t.i_x2_z == 0.0
    p = secrecy_pentagon(t)
    expect = 0.31136216629460556
    assert (p.r1_max, p.r2_max, p.rsum_max) == pytest.approx((expect, expect, expect), abs=1e-12)


def test_capacity_pentagons():
    law = np.zeros((2, 2, 4, 1))
    for x1 in range(2):
        for x2 in range(2):
            law[x1, x2, 2 * x1 + x2, 0] = 1.0
    p = capacity_pentagon(info_terms(MacWiretapChannel(law), UNIFORM))
    assert (p.r1_max, p.r2_max, p.rsum_max) == pytest.approx((1.0, 1.0, 2.0), abs=1e-12)
    const = MacWiretapChannel(np.ones((2, 2, 1, 1)))
    p = capacity_pentagon(info_terms(const, UNIFORM))
    assert (p.r1_max, p.r2_max, p.rsum_max) == (0.0, 0.0, 0.0)
    p = capacity_pentagon(info_terms(noisy_xor_channel(0.11, 0.25), UNIFORM))
    v = 0.5000840418354726
    assert (p.r1_max, p.r2_max, p.rsum_max) == pytest.approx((v, v, v), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(info_terms_positive())
def test_secrecy_inside_capacity(t):
    assert secrecy_pentagon(t).issubset(capacity_pentagon(t))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=30))
def test_hull_contains_its_points(points):
    pts = [(0.0, 0.0)] + points
    hull = RateRegion.from_points(pts)
    assert hull.vertices[0] == (0.0, 0.0)
    assert hull.contains(pts, tol=1e-9).all()
    v = np.asarray(hull.vertices)
    if len(v) >= 3:
        # counterclockwise: every turn is a left turn
        for a, b, c in zip(v, np.roll(v, -1, 0), np.roll(v, -2, 0)):
            assert (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]) > 0


def test_hull_one_distribution_equals_pentagon():
    ch = noisy_xor_channel(0.05, 0.25, eve="x1")
    region = hull_over_inputs(ch, [UNIFORM], "secrecy")
    pent = secrecy_pentagon(info_terms(ch, UNIFORM))
    assert sorted(region.vertices) == sorted(convex_hull(pent.vertices()))


def test_hull_nested_pentagons():
    outer = RatePentagon(1.0, 1.0, 1.5)
    inner = RatePentagon(0.5, 0.5, 0.8)
    region = RateRegion.from_pentagons([inner, outer])
    assert region.vertices == tuple(outer.vertices())


def test_coarse_grid_close_to_dense_grid():
    ch = noisy_xor_channel(0.11, 0.25)
    for which in ("secrecy", "capacity"):
        coarse = hull_over_inputs(ch, uniform_grid(ch, 5), which)
        dense = hull_over_inputs(ch, uniform_grid(ch, 50), which)
        assert hausdorff_distance(coarse.vertices, dense.vertices) <= 1e-3


def test_hausdorff_of_nested_triangles():
    assert hausdorff_distance([(0, 0), (1, 0), (0, 1)], [(0, 0), (2, 0), (0, 2)]) == pytest.approx(1.0)


def test_grid_sizes():
    ch = noisy_xor_channel(0.1, 0.2)
    assert len(uniform_grid(ch, 11)) == 121
    with pytest.raises(ValueError):
        pentagons_over_inputs(ch, [], "secrecy")


def test_estimator_api():
    ch = noisy_xor_channel(0.11, 0.25, eve="x1")
    est = RateRegionEstimator(which="capacity", points_per_user=5)
    assert est.get_params() == {"grid": None, "points_per_user": 5, "which": "capacity"}
    assert clone(est).get_params() == est.get_params()
    est.fit(ch)
    assert est.n_inputs_ == 25
    labels = est.predict([[0.1, 0.1], [0.9, 0.9]])
    np.testing.assert_array_equal(labels, [1, 0])
    assert est.decision_function([[0.0, 0.0]])[0] >= 0
    sec = RateRegionEstimator(points_per_user=5).fit(ch)
    assert est.predict(np.asarray(sec.region_.vertices)).all()


def test_estimator_unfitted():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        RateRegionEstimator().predict([[0.1, 0.1]])


def test_ramp_index_examples():
    assert ramp_index(1.0, 0.0) == 1
    assert ramp_index(1.0, 0.4) == 2
    assert ramp_index(0.5, 0.5) == math.inf
    assert ramp_index(1.0, 0.9) == 10  # float ratio is 10.000000000000002


def test_ramp_schedule_example():
    # user 1: capacity 1.0, eve 0.4 -> second-part rate 0.6 then 1.0 for good
    t = InfoTerms(1.0, 1.0, 2.0, 0.4, 0.4)
    s = ramp_schedule(t)
    assert s.lambda1 == 2
    assert [s.second_part_at(k)[0] for k in (1, 2, 3, 10)] == pytest.approx([0.6, 1.0, 1.0, 1.0])
    rows = schedule_rows(s, l=1)
    assert [(r["slot"], float(r["r1_part2"])) for r in rows] == [(1, 0.6), (2, 1.0), (3, 1.0)]


@settings(max_examples=200, deadline=None)
@given(info_terms_positive())
def test_ramp_properties(t):
    for c, e in ((t.i_x1_y_given_x2, t.i_x1_z), (t.i_x2_y_given_x1, t.i_x2_z)):
        ratio = c / (c - e)
        assume(e == 0 or abs(ratio - round(ratio)) > 1e-9)  # integer ratios are pinned above
    s = ramp_schedule(t)
    assert s.lambda1 == oracle_ramp_index(t.i_x1_y_given_x2, t.i_x1_z)
    sec, cap = secrecy_pentagon(t), capacity_pentagon(t)
    prev = (0.0, 0.0)
    for k in range(1, len(s.per_slot) + 5):
        pair = s.second_part_at(k)
        assert pair[0] >= prev[0] - 1e-12 and pair[1] >= prev[1] - 1e-12
        assert pair[0] <= min(k * sec.r1_max, cap.r1_max) + 1e-12
        assert pair[1] <= min(k * sec.r2_max, cap.r2_max) + 1e-12
        assert sum(pair) <= min(k * sec.rsum_max, cap.rsum_max) + 1e-12
        if k >= s.lambda_star - 1:
            assert pair == s.saturated
        prev = pair


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.05, 1.0),
    st.floats(0.05, 1.0),
    st.one_of(st.just(0.0), st.floats(1e-6, 0.9)),
    st.one_of(st.just(0.0), st.floats(1e-6, 0.9)),
)
def test_lambda_star_bound_when_sum_is_slack(a, b, u1, u2):
    # I(X1,X2;Y) = I(X1;Y|X2) + I(X2;Y|X1): the sum constraint never binds
    t = InfoTerms(a, b, a + b, a * u1, b * u2)
    s = ramp_schedule(t)
    assert s.lambda_star >= max(s.lambda1, s.lambda2) + 1


def test_lambda_star_can_precede_per_user_index():
    # the sum bound caps both users before either reaches its own capacity
    s = ramp_schedule(InfoTerms(1.0, 1.0, 1.2, 0.6, 0.0))
    assert (s.lambda1, s.lambda2) == (3, 1)
    np.testing.assert_allclose([p.second_part for p in s.per_slot], [(0.24, 0.36), (0.52, 0.68)], atol=1e-12)
    assert s.lambda_star == 3 < s.lambda1 + 1


def test_slot_average_examples():
    assert slot_average_rate((1.0, 0.5), (0.5, 0.5), 1) == (0.75, 0.5)
    assert slot_average_rate((1.0, 1.0), (0.6, 0.6), 9) == pytest.approx((0.96, 0.96), abs=1e-15)


@given(st.floats(0, 2), st.floats(0, 2), st.integers(1, 10_000))
def test_slot_average_gap_identity(second, first, l):
    avg = slot_average_rate((second, second), (first, first), l)[0]
    assert second - avg == pytest.approx((second - first) / (l + 1), abs=1e-12)
