"""Reference catalogue of spaces, functions and maps used by the test battery.

Each entry records what the algebra claims about it (convex, strict) so
verifier outcomes can be compared against the claim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Space
from .functions import (
    WFn, ball_size, compose_increasing_convex, conical, distance_to_point, lebesgue_measure,
    linear_functional, max_of, negate, radius, scale, sum_of, sup_family,
)
from .optimize import MapUnderTest, affine_map, rotation_map, scaling_map
from .spaces import ball_space, euclidean_space, interval_space, product_space


def standard_spaces() -> dict[str, Space]:
    """One instance of every space family, keyed by a short name."""
    ball, interval = ball_space(3), interval_space()
    return {
        "l2": euclidean_space(2, 2),
        "l1": euclidean_space(2, 1),
        "linf": euclidean_space(2, "inf"),
        "l2_3d": euclidean_space(3, 2),
        "line": euclidean_space(1, 2),
        "ball": ball,
        "interval": interval,
        "product": product_space(ball, interval),
    }


@dataclass
class FunctionEntry:
    name: str
    space: Space
    f: WFn
    convex: bool
    strict: bool = False
    quasiconvex: bool = False
    source: str = ""


def _step(space: Space) -> WFn:
    # monotone step on R: quasiconvex (sublevel sets are half-lines), not convex
    return WFn(space, lambda X: (X[:, 0] > 0).astype(float), "step", convex=False)


def _sqrt_distance(space: Space, x0) -> WFn:
    d = distance_to_point(space, x0)
    return WFn(space, lambda X: np.sqrt(d.values(X)), "sqrt(d(.,x0))", convex=False)


def function_catalogue(spaces: dict[str, Space] | None = None) -> list[FunctionEntry]:
    sp = spaces or standard_spaces()
    l2, l1, linf, line = sp["l2"], sp["l1"], sp["linf"], sp["line"]
    ball, interval, prod = sp["ball"], sp["interval"], sp["product"]
    o2 = [0.5, -0.25]
    d2 = distance_to_point(l2, o2)
    d2_sq = distance_to_point(l2, o2, "square")
    lin = linear_functional(l2, [1.0, -2.0], 0.5)
    mid_interval = [0.25, 0.75]
    out = [
        FunctionEntry("dist_l2", l2, d2, True, source="g = identity"),
        FunctionEntry("dist_l1", l1, distance_to_point(l1, [1.0, 1.0]), True, source="g = identity"),
        FunctionEntry("dist_sq_linf", linf, distance_to_point(linf, [0.0, 0.0], "square"), True,
                      source="g = x**2 on [0, inf)"),
        FunctionEntry("dist_abs_ball", ball, distance_to_point(ball, [0, 0, 0, 1.0], "abs"), True,
                      source="g = |x| on [0, inf)"),
        FunctionEntry("dist_interval", interval, distance_to_point(interval, mid_interval), True),
        FunctionEntry("ball_size", ball, ball_size(ball), True, source="||c|| + |r| on balls"),
        FunctionEntry("lebesgue", interval, lebesgue_measure(interval), True,
                      source="Lebesgue measure on intervals"),
        FunctionEntry("radius", ball, radius(ball), True, source="affine along W"),
        FunctionEntry("scaled_dist_l1", l1, scale(distance_to_point(l1, [0.0, 0.0]), 3.0), True,
                      source="alpha f"),
        FunctionEntry("sum_dist_l2", l2, sum_of([d2, distance_to_point(l2, [-1.0, 2.0])]), True,
                      source="f + g"),
        FunctionEntry("max_dist_linear", l2, max_of([d2, lin]), True, source="max(f, g)"),
        FunctionEntry("sup_linear_linf", linf,
                      sup_family([linear_functional(linf, a, c) for a, c in
                                  [([1, 0], 0), ([-1, 2], 1), ([0.5, -0.5], -1), ([0, -1], 0.25)]]),
                      True, source="supremum of a family"),
        FunctionEntry("exp_ball_size", ball, compose_increasing_convex(ball_size(ball), "exp"), True,
                      source="g increasing convex after f"),
        FunctionEntry("conical_interval", interval,
                      conical([lebesgue_measure(interval), distance_to_point(interval, [0.0, 0.5])],
                              [2.0, 0.5]), True, source="conical combination"),
        FunctionEntry("dist_product", prod, distance_to_point(prod, [0, 0, 0, 1.0, 0.2, 0.6]), True),
        # strict entries live on l2: strictness of g(d) needs a strictly convex space
        FunctionEntry("dist_sq_l2", l2, d2_sq, True, strict=True, source="g = x**2"),
        FunctionEntry("exp_dist_l2", l2, distance_to_point(l2, o2, "exp"), True, strict=True,
                      source="g = exp"),
        FunctionEntry("pow15_dist_l2", l2, distance_to_point(l2, o2, "power:1.5"), True, strict=True,
                      source="g = x**1.5"),
        FunctionEntry("conical_sq_dist_l2", l2, conical([d2_sq, d2], [1.0, 2.0]), True, strict=True,
                      source="strict + convex"),
        # planted failures
        FunctionEntry("neg_dist_l2", l2, negate(d2), False),
        FunctionEntry("step_line", line, _step(line), False, quasiconvex=True),
        FunctionEntry("sqrt_dist_l2", l2, _sqrt_distance(l2, o2), False, quasiconvex=True),
    ]
    return out


@dataclass
class MapEntry:
    name: str
    space: Space
    T: MapUnderTest
    x0: np.ndarray
    fixed_point: np.ndarray | None
    nonexpansive: bool
    strict_residual: bool = False
    notes: dict = field(default_factory=dict)


def map_catalogue(spaces: dict[str, Space] | None = None) -> list[MapEntry]:
    sp = spaces or standard_spaces()
    l2, line, interval = sp["l2"], sp["line"], sp["interval"]
    return [
        MapEntry("contraction", l2, scaling_map(l2, [1.0, -1.0], 0.5), np.array([2.5, 2.0]),
                 np.array([1.0, -1.0]), True, strict_residual=True),
        MapEntry("reflection", line, affine_map(line, [[-1.0]], [0.0], "reflect"),
                 np.array([1.0]), np.array([0.0]), True),
        MapEntry("rotation", l2, rotation_map(l2, math.pi / 2), np.array([1.0, 0.0]),
                 np.array([0.0, 0.0]), True),
        MapEntry("shifted_contraction", line, affine_map(line, [[0.5]], [1.0], "x/2+1"),
                 np.array([-3.0]), np.array([2.0]), True, strict_residual=True),
        MapEntry("interval_contraction", interval, scaling_map(interval, [0.0, 1.0], 0.5),
                 np.array([0.4, 0.5]), np.array([0.0, 1.0]), True),
        MapEntry("doubling", line, affine_map(line, [[2.0]], [0.0], "2x"), np.array([1.0]),
                 np.array([0.0]), False),
    ]


def quadratic_self_map(space: Space) -> MapUnderTest:
    """x -> 1 - x**2 on [0, 1]: continuous, not nonexpansive, fixed point (sqrt(5)-1)/2."""
    return MapUnderTest(space, lambda X: 1.0 - X ** 2, "1-x^2")
