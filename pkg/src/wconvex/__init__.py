"""Convex metric spaces, W-convex functions, projections and fixed points."""

__version__ = "0.1.0"

from .core import (
    DEGENERATE, DELTA_STRICT, EPS_EQ, DomainError, ExtensionUnsupported, PointTypeError,
    ResourceError, Segment, Space, Verdict, check_convex_structure, check_extension,
    check_idempotence, check_metric_axioms, check_segment_identities, combine, distance, extend,
    make_rng,
)
from .spaces import (
    BallSpace, EuclideanSpace, IntervalSpace, ProductSpace, ball_space, euclidean_space,
    interval_space, product_space, space_from_spec,
)
from .functions import (
    UNBOUNDED, ConvexSet, WFn, ball_set, ball_size, box_set, compose_increasing_convex, conical,
    distance_map, distance_to_point, indicator, intersection, lebesgue_measure,
    linear_functional, max_of, negate, radius, restrict, scale, segment_set, sublevel_set,
    sum_of, sup_family, whole_space,
)
from .verify import (
    bounded_above_check, dyadic_convexity_check, epigraph_convexity_check,
    local_lipschitz_from_bound, midpoint_convexity_check, segment_lipschitz_check,
    set_convexity_check, sphere_wconvex_check, strict_space_check, sublevel_convexity_check,
    verify_strict_wconvex, verify_wconvex,
)
from .optimize import (
    ProjectionConfig, chebyshev_diagnostic, check_nonexpansive, mann_iterate, minimize, project,
    residual_fixed_point,
)
