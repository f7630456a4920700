from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wconvex.core import DELTA_STRICT, EPS_EQ, DomainError, ExtensionUnsupported, ResourceError, rel_excess
from wconvex.functions import (
    WFn, ball_set, box_set, distance_to_point, linear_functional, negate, radius, segment_set,
)
from wconvex.spaces import BallSpace, EuclideanSpace, IntervalSpace
from wconvex.verify import (
    DyadicGrid, bounded_above_check, dyadic_convexity_check, epigraph_convexity_check,
    local_lipschitz_from_bound, midpoint_convexity_check, reversal_bound_check,
    segment_lipschitz_check, segment_points, set_convexity_check, sphere_points,
    sphere_wconvex_check, strict_space_check, sublevel_convexity_check, verify_strict_wconvex,
    verify_wconvex,
)
from wconvex.functions import ConvexSet

from conftest import FAMILIES

L2, L1, LINF = EuclideanSpace(2, 2), EuclideanSpace(2, 1), EuclideanSpace(2, "inf")
LINE = EuclideanSpace(1, 2)


def replay_chord(space, f, w):
    z = space.combine(w["x"], w["y"], w["t"])
    return f(z) - ((1 - w["t"]) * f(w["x"]) + w["t"] * f(w["y"]))


# ----------------------------------------------------------- W-convexity


def test_wconvex_passes_for_distance():
    v = verify_wconvex(L1, distance_to_point(L1, [1, 2]), 5000, seed=3)
    assert v.passed and v.samples_checked == 5000 and v.seed == 3


def test_wconvex_failure_witness_replays():
    f = negate(distance_to_point(L2, [0, 0]))
    v = verify_wconvex(L2, f, 2000)
    assert v.failed
    assert replay_chord(L2, f, v.witness) > 0
    assert v.witness["f_z"] == pytest.approx(f(v.witness["z"]))


def test_wconvex_is_independent_of_worker_count():
    f = distance_to_point(L2, [0, 0], "exp")
    a = verify_wconvex(L2, f, 4000, workers=1)
    b = verify_wconvex(L2, f, 4000, workers=4)
    assert a.to_record(L2) == b.to_record(L2)


def test_wconvex_skips_unbounded_chords():
    f = WFn(L2, lambda X: np.where(X[:, 0] > 0, np.inf, 0.0), "half-indicator")
    v = verify_wconvex(L2, f, 1000)
    assert v.passed and v.skipped > 0


def test_strict_passes_for_squared_distance_and_fails_for_distance():
    assert verify_strict_wconvex(L2, distance_to_point(L2, [0, 0], "square"), 3000).passed
    # d(., x0) is affine along rays through x0, so never strict
    v = verify_strict_wconvex(LINE, distance_to_point(LINE, [0.0]), 3000)
    assert v.failed and v.worst_violation >= DELTA_STRICT


def test_strict_fails_for_squared_distance_in_l1():
    # strictness of g(d) needs a strictly convex space
    assert verify_strict_wconvex(L1, distance_to_point(L1, [0, 0], "square"), 3000).failed


def test_strict_rejects_bad_separation():
    with pytest.raises(DomainError):
        verify_strict_wconvex(L2, distance_to_point(L2, [0, 0]), 10, separation=0.0)


# -------------------------------------------------------------- segments


def test_dyadic_grid_matches_fractions():
    for k in range(6):
        exact = [Fraction(m, 2 ** k) for m in range(2 ** k + 1)]
        np.testing.assert_array_equal(DyadicGrid(k).values, [float(q) for q in exact])
        fresh = [q for q in exact if q.denominator == 2 ** k] if k else exact
        np.testing.assert_array_equal(DyadicGrid(k).new_values(), [float(q) for q in fresh])
    with pytest.raises(DomainError):
        DyadicGrid(-1)


def test_segment_points():
    Z = segment_points(L2, [0, 0], [4, 0], 5)
    np.testing.assert_allclose(Z[:, 0], [0, 1, 2, 3, 4])
    assert len(segment_points(L2, [0, 0], [1, 0], DyadicGrid(3))) == 9
    with pytest.raises(DomainError):
        segment_points(L2, [1, 1], [1, 1])


def test_segment_lipschitz_tight_along_a_ray():
    f = distance_to_point(L2, [1, 1])
    rep = segment_lipschitz_check(L2, f, [1, 1], [4, 5])
    assert rep.passed
    assert rep.constant == pytest.approx(1.0)
    assert rep.max_ratio >= 1 - 1e-6


def test_segment_lipschitz_fails_for_squared_distance():
    # |f(x)-f(y)|/d = (9-1)/2 = 4 but the slope near y is 6
    f = distance_to_point(LINE, [0.0], "square")
    rep = segment_lipschitz_check(LINE, f, [1.0], [3.0], n=401)
    assert rep.constant == pytest.approx(4.0)
    assert not rep.passed
    assert rep.max_ratio == pytest.approx(6.0, abs=0.02)
    w = rep.witness
    assert abs(w["f_z"] - w["f_w"]) > 4.0 * w["d_zw"]


def test_segment_lipschitz_constant_case():
    # f(x) = f(y) for an affine f gives a constant f on the segment
    sp = BallSpace(2)
    rep = segment_lipschitz_check(sp, radius(sp), sp.ball([0, 0], 1.5), sp.ball([4, -1], 1.5))
    assert rep.constant == 0.0 and rep.passed
    assert rep.max_ratio <= 1e-9


def test_segment_lipschitz_alpha_assertion():
    f = distance_to_point(L2, [0, 0])
    rep = segment_lipschitz_check(L2, f, [1, 0], [3, 0], alpha=1.0)
    assert rep.details["alpha_precondition"] and rep.details["alpha_passed"]
    rep = segment_lipschitz_check(L2, f, [1, 0], [3, 0], alpha=0.5)
    assert not rep.details["alpha_precondition"]


def test_midpoint_check():
    assert midpoint_convexity_check(L2, distance_to_point(L2, [0, 0]), 2000).passed
    assert midpoint_convexity_check(L2, negate(distance_to_point(L2, [0, 0])), 2000).failed


def test_dyadic_check_reports_first_failing_level():
    # convex except for a bump at 3/8 of [0, 1]
    f = WFn(LINE, lambda X: np.where(np.isclose(X[:, 0], 0.375), 1.0, X[:, 0] ** 2), "bump")
    v = dyadic_convexity_check(LINE, f, [0.0], [1.0], levels=6)
    assert v.failed and v.details["first_failing_level"] == 3
    assert v.witness["lam"] == 0.375
    ok = dyadic_convexity_check(LINE, distance_to_point(LINE, [0.2], "square"), [0.0], [1.0])
    assert ok.passed and ok.samples_checked == 2 ** 10 + 1
    with pytest.raises(ResourceError):
        dyadic_convexity_check(LINE, f, [0.0], [1.0], levels=13)


@pytest.mark.parametrize("key", FAMILIES)
def test_reversal_bound(spaces, key):
    assert reversal_bound_check(spaces[key], 2000).passed


# ---------------------------------------------------- local boundedness


def test_local_lipschitz_bound():
    f = distance_to_point(L2, [0, 0], "square")
    rep = local_lipschitz_from_bound(L2, f, [0, 0], 1.0, 0.5, 1.0, 4000)
    assert rep.passed and rep.constant == 4.0
    assert rep.details["max_extension_reach"] <= 1.0 + 1e-9
    assert rep.max_ratio <= 1.0 + 1e-9  # true constant on B(0, 0.5) is 1


def test_local_lipschitz_precondition_and_errors():
    f = distance_to_point(L2, [0, 0], "square")
    rep = local_lipschitz_from_bound(L2, f, [0, 0], 1.0, 0.5, 0.25, 1000)
    assert rep.details["precondition"] is False
    with pytest.raises(DomainError):
        local_lipschitz_from_bound(L2, f, [0, 0], 1.0, 1.0, 1.0)
    sp = IntervalSpace()
    with pytest.raises(ExtensionUnsupported):
        local_lipschitz_from_bound(sp, distance_to_point(sp, [0, 1]), [0, 1], 0.5, 0.2, 1.0)


def test_bounded_above():
    f = linear_functional(L2, [1.0, 1.0], -3.0)  # negative near x0, |f| large
    v = bounded_above_check(L2, f, [0, 0], 1.0, n=2000)
    assert v.passed
    assert v.details["bound"] == pytest.approx(v.details["c"] + 6.0)
    assert v.details["reflection_in_ball"]
    v = bounded_above_check(L2, f, [0, 0], 1.0, c=-10.0, n=200)
    assert v.status == "inconclusive"


# ------------------------------------------------ epigraph and sublevels


def test_epigraph_agrees_with_wconvex():
    good = distance_to_point(L1, [0, 0], "square")
    bad = negate(good)
    assert epigraph_convexity_check(L1, good, 2000).passed
    v = epigraph_convexity_check(L1, bad, 2000)
    assert v.failed and verify_wconvex(L1, bad, 2000).failed


def test_sublevel_checks():
    f = distance_to_point(L2, [0, 0])
    assert sublevel_convexity_check(L2, f, 2.0, 2000).passed
    # {-d <= -1} is the outside of a disc
    assert sublevel_convexity_check(L2, negate(f), -1.0, 2000).failed
    assert sublevel_convexity_check(L2, f, -1.0, 100).status == "inconclusive"


def test_set_convexity():
    assert set_convexity_check(ball_set(L2, [0, 0], 1.0), 2000).passed
    assert set_convexity_check(box_set(L2, [0, 0], [1, 2]), 2000).passed
    assert set_convexity_check(segment_set(L1, [0, 0], [1, 3]), 2000).passed
    ring = ConvexSet(L2, lambda X: np.abs(L2.metric(X, [0, 0]) - 1.0) < 1e-9,
                     lambda rng, n: np.c_[np.cos(a := rng.uniform(0, 6.3, n)), np.sin(a)], "circle")
    assert set_convexity_check(ring, 500).failed


# ---------------------------------------------------- strict convexity


def test_sphere_points_lie_on_the_sphere():
    rng = np.random.default_rng(0)
    U = rng.normal(size=(200, 2))
    P, ok = sphere_points(L2, np.zeros(2), 0.7, U)
    assert ok.mean() > 0.95
    np.testing.assert_allclose(L2.metric(P[ok], np.zeros(2)), 0.7)


def test_strict_space_check_by_norm():
    assert strict_space_check(L2, 3000).passed
    assert strict_space_check(L1, 3000).failed
    assert strict_space_check(LINF, 3000).failed
    assert strict_space_check(IntervalSpace(), 3000).failed


def test_strict_space_planted_rows():
    v = strict_space_check(L1, 200, planted=[([0, 0], [1, 0], [0, 1], 0.5)])
    assert v.details["planted_violations"][0] == pytest.approx(DELTA_STRICT)
    with pytest.raises(DomainError):
        strict_space_check(L1, 10, planted=[([0, 0], [1, 0], [0, 3], 0.5)])


def test_ball_space_is_not_strictly_convex_but_random_sampling_misses_it():
    sp = BallSpace(3)
    x0, x, y = sp.ball([0, 0, 0], 1), sp.ball([1, 0, 0], 1), sp.ball([0, 0, 0], 2)
    v = strict_space_check(sp, 2000, planted=[(x0, x, y, 0.5)])
    assert v.failed
    assert v.details["planted_violations"][0] >= DELTA_STRICT
    z = sp.combine(x, y, 0.5)
    assert sp.metric(z, x0) == pytest.approx(1.0)  # still on the sphere
    assert strict_space_check(sp, 2000).passed


def test_sphere_wconvex_certificate():
    v = sphere_wconvex_check(L2, [0, 0], 2.0, 1.0, n=2000)
    assert v.passed and v.details["strict_convexity_certificate"]
    v = sphere_wconvex_check(L1, [0, 0], 2.0, 1.0, n=2000)
    assert v.failed and not v.details["strict_convexity_certificate"]
    with pytest.raises(DomainError):
        sphere_wconvex_check(L2, [0, 0], 1.0, 1.0)


@given(h=st.floats(0.1, 4.0), seed=st.integers(0, 2 ** 16))
def test_sublevel_sets_of_convex_functions_are_convex(h, seed):
    f = distance_to_point(LINF, [0.5, 0.5], "square")
    assert sublevel_convexity_check(LINF, f, h, 300, seed).status in ("passed", "inconclusive")


@given(x=st.floats(-3, 3), y=st.floats(-3, 3), t=st.floats(0, 1))
def test_reversal_bound_on_the_line(x, y, t):
    a = LINE.combine([x], [y], t)
    b = LINE.combine([y], [x], 1 - t)
    assert rel_excess(LINE.metric(a, b), ((1 - t) ** 2 + t ** 2) * abs(x - y)) <= EPS_EQ
