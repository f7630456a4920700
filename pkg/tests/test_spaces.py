import numpy as np
import pytest
from hypothesis import given, strategies as st

from wconvex.core import EPS_EQ, DomainError, PointTypeError, check_convex_structure, rel_excess
from wconvex.spaces import (
    BallSpace, EuclideanSpace, IntervalSpace, ProductSpace, SPACE_KINDS, hausdorff_interval_distance,
    space_from_spec,
)


def test_norm_tags():
    assert EuclideanSpace(2, "inf").p == np.inf
    assert EuclideanSpace(2, "l1").p == 1.0
    with pytest.raises(DomainError):
        EuclideanSpace(2, 3)
    with pytest.raises(DomainError):
        EuclideanSpace(0, 2)


def test_norm_values():
    a, b = [0, 0], [3, -4]
    assert EuclideanSpace(2, 1).metric(a, b) == 7
    assert EuclideanSpace(2, "inf").metric(a, b) == 4
    assert EuclideanSpace(2, 2).metric(a, b) == 5


def test_strict_convexity_flag():
    assert EuclideanSpace(3, 2).strictly_convex
    assert EuclideanSpace(1, "inf").strictly_convex
    assert not EuclideanSpace(2, 1).strictly_convex


def test_ball_metric_is_center_plus_radius_gap():
    sp = BallSpace(2)
    a = sp.ball([0, 0], 1.0)
    b = sp.ball([3, 4], 2.5)
    assert sp.metric(a, b) == pytest.approx(5 + 1.5)


def test_ball_payloads():
    sp = BallSpace(2)
    p = sp.point({"center": [1, 2], "radius": 0.5})
    assert sp.to_payload(p) == {"center": [1.0, 2.0], "radius": 0.5}
    with pytest.raises(DomainError):
        sp.point({"center": [1, 2], "radius": 0.0})
    with pytest.raises(PointTypeError):
        sp.point({"center": [1, 2, 3], "radius": 1.0})


def test_interval_payloads_and_validity():
    sp = IntervalSpace()
    assert sp.to_payload(sp.point({"a": 0.1, "b": 0.4})) == {"a": 0.1, "b": 0.4}
    for bad in ([0.5, 0.2], [-0.1, 0.5], [0.2, 1.2]):
        with pytest.raises(DomainError):
            sp.point(bad)
    assert sp.valid_mask([[0.0, 0.0], [0.3, 0.2]]).tolist() == [True, False]


def test_interval_sampler_is_valid_and_hits_degenerate_intervals():
    X = IntervalSpace().sample(np.random.default_rng(0), 2000)
    assert IntervalSpace().valid_mask(X).all()
    assert np.any(X[:, 0] == X[:, 1])


def test_product_metric_and_parts():
    sp = ProductSpace(EuclideanSpace(2, 2), IntervalSpace())
    z1 = sp.point([[0, 0], {"a": 0.0, "b": 0.5}])
    z2 = sp.point([[3, 4], {"a": 0.25, "b": 1.0}])
    assert sp.metric(z1, z2) == pytest.approx(5 + 0.5)
    a, b = sp.parts(z2)
    np.testing.assert_allclose(a, [3, 4])
    np.testing.assert_allclose(b, [0.25, 1.0])
    assert sp.to_payload(z2) == [[3.0, 4.0], {"a": 0.25, "b": 1.0}]
    assert not sp.supports_extend


@pytest.mark.parametrize("p", [2, "inf"])
def test_dp_products_also_satisfy_eq1(p):
    # the convex-structure inequality survives d_2 and d_inf products
    sp = ProductSpace(EuclideanSpace(2, 1), BallSpace(2), p)
    assert check_convex_structure(sp, 3000).passed


def test_space_from_spec_round_trip():
    for spec in ({"kind": "euclidean", "n": 3, "p": "inf"}, {"kind": "ball", "dim": 2},
                 {"kind": "interval"},
                 {"kind": "product", "left": {"kind": "ball", "dim": 1}, "right": {"kind": "interval"}}):
        assert space_from_spec(spec).describe() == spec
    with pytest.raises(DomainError, match="valid kinds"):
        space_from_spec({"kind": "hyperbolic"})
    assert len(SPACE_KINDS) == 4


def test_hausdorff_helper_is_vectorised():
    d = hausdorff_interval_distance([[0, 0.5], [0, 1]], [[0.25, 1], [0, 1]])
    np.testing.assert_allclose(d, [0.5, 0.0])


unit = st.floats(0, 1)
pos = st.floats(0.01, 10)
coord = st.floats(-10, 10)


@given(a1=unit, b1=unit, a2=unit, b2=unit, t=unit)
def test_interval_combination_stays_an_interval(a1, b1, a2, b2, t):
    sp = IntervalSpace()
    x, y = sorted([a1, b1]), sorted([a2, b2])
    z = sp.combine(x, y, t)
    assert sp.valid_mask(z)


@given(c1=st.lists(coord, min_size=2, max_size=2), c2=st.lists(coord, min_size=2, max_size=2),
       r1=pos, r2=pos, t=unit, u=st.lists(coord, min_size=3, max_size=3).filter(lambda v: v[2] > 0))
def test_ball_space_eq1(c1, c2, r1, r2, t, u):
    sp = BallSpace(2)
    x, y = np.array(c1 + [r1]), np.array(c2 + [r2])
    z = sp.combine(x, y, t)
    assert z[-1] > 0
    lhs = sp.metric(u, z)
    rhs = (1 - t) * sp.metric(u, x) + t * sp.metric(u, y)
    assert rel_excess(lhs, rhs) <= EPS_EQ
