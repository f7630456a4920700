"""Concrete convex metric spaces: normed R^n, balls, intervals, products."""

from __future__ import annotations

import numpy as np

from .core import DomainError, PointTypeError, Space, as_points

NORMS = {"1": 1.0, "2": 2.0, "inf": np.inf}


def _norm_tag(p) -> float:
    if isinstance(p, str):
        key = p.lower().replace("∞", "inf").lstrip("l")
        if key in ("infinity",):
            key = "inf"
        if key not in NORMS:
            raise DomainError(f"unknown norm tag {p!r}; expected one of 1, 2, inf")
        return NORMS[key]
    p = float(p)
    if p not in (1.0, 2.0, np.inf):
        raise DomainError(f"unsupported norm exponent {p}; expected 1, 2 or inf")
    return p


def _lp(v, p):
    a = np.abs(v)
    if p == 2.0:
        return np.sqrt(np.sum(a * a, axis=-1))
    if p == 1.0:
        return np.sum(a, axis=-1)
    return np.max(a, axis=-1)


class EuclideanSpace(Space):
    """R^n with an l1, l2 or l-infinity norm and W(x,y;t) = (1-t)x + ty."""

    supports_extend = True

    def __init__(self, n: int = 2, p=2, scale: float = 3.0):
        if int(n) < 1:
            raise DomainError("dimension must be >= 1")
        self.n = int(n)
        self.p = _norm_tag(p)
        self.scale = float(scale)
        self.width = self.n
        self.name = "euclidean"

    @property
    def strictly_convex(self) -> bool:
        return self.p == 2.0 or self.n == 1

    def _metric(self, a, b):
        return _lp(a - b, self.p)

    def _combine(self, x, y, t):
        return (1 - t) * x + t * y

    def _extend(self, y, x, lam):
        return y + (x - y) / lam

    def _sample(self, rng, n):
        return rng.uniform(-self.scale, self.scale, (n, self.n))

    def sample_around(self, rng, center, n, radius):
        return as_points(center) + rng.uniform(-radius, radius, (n, self.n))

    def to_payload(self, p):
        return as_points(p).tolist()

    def describe(self):
        p = "inf" if self.p == np.inf else int(self.p)
        return {"kind": "euclidean", "n": self.n, "p": p}


def euclidean_space(n: int = 2, p=2) -> EuclideanSpace:
    return EuclideanSpace(n, p)


class BallSpace(Space):
    """Closed balls B(c, r) of R^dim, d = ||c1 - c2|| + |r1 - r2|.

    Payload layout is ``[c_1, ..., c_dim, r]``.
    """

    supports_extend = True

    def __init__(self, dim: int = 3, scale: float = 3.0):
        if int(dim) < 1:
            raise DomainError("center dimension must be >= 1")
        self.dim = int(dim)
        self.width = self.dim + 1
        self.scale = float(scale)
        self.name = "ball"

    def _metric(self, a, b):
        dc = a[..., :-1] - b[..., :-1]
        return np.sqrt(np.sum(dc * dc, axis=-1)) + np.abs(a[..., -1] - b[..., -1])

    def _combine(self, x, y, t):
        return (1 - t) * x + t * y

    def _extend(self, y, x, lam):
        return y + (x - y) / lam

    def _sample(self, rng, n):
        c = rng.uniform(-self.scale, self.scale, (n, self.dim))
        r = rng.uniform(0.05, self.scale, (n, 1))
        return np.hstack([c, r])

    def sample_around(self, rng, center, n, radius):
        center = as_points(center)
        c = center[:-1] + rng.uniform(-radius, radius, (n, self.dim))
        # radii reflect at 0 and stay positive
        r = np.abs(center[-1] + rng.uniform(-radius, radius, (n, 1))) + 1e-9
        return np.hstack([c, r])

    def valid_mask(self, p):
        p = as_points(p)
        return (p[..., -1] > 0) & np.all(np.isfinite(p), axis=-1)

    def validate(self, p):
        super().validate(p)
        if np.any(as_points(p)[..., -1] <= 0):
            raise DomainError("ball radius must be > 0")

    def point(self, payload):
        if isinstance(payload, dict):
            c = as_points(payload["center"]).ravel()
            if c.shape != (self.dim,):
                raise PointTypeError(f"ball center must have {self.dim} coordinates")
            payload = np.append(c, float(payload["radius"]))
        return super().point(payload)

    def ball(self, center, radius) -> np.ndarray:
        return self.point({"center": center, "radius": radius})

    def to_payload(self, p):
        p = as_points(p)
        return {"center": p[:-1].tolist(), "radius": float(p[-1])}

    def describe(self):
        return {"kind": "ball", "dim": self.dim}


def ball_space(dim: int = 3) -> BallSpace:
    return BallSpace(dim)


def hausdorff_interval_distance(i, j):
    """Hausdorff distance of closed intervals [a_i, b_i] and [a_j, b_j]."""
    i, j = as_points(i), as_points(j)
    return np.maximum(np.abs(i[..., 0] - j[..., 0]), np.abs(i[..., 1] - j[..., 1]))


class IntervalSpace(Space):
    """Closed subintervals [a, b] of [0, 1] under the Hausdorff metric.

    No extension oracle: extending past an endpoint can leave [0, 1].
    """

    width = 2
    name = "interval"

    def _metric(self, a, b):
        return hausdorff_interval_distance(a, b)

    def _combine(self, x, y, t):
        return (1 - t) * x + t * y

    def _sample(self, rng, n):
        ab = np.sort(rng.random((n, 2)), axis=1)
        degenerate = rng.random(n) < 0.05
        ab[degenerate, 1] = ab[degenerate, 0]
        return ab

    def valid_mask(self, p):
        p = as_points(p)
        return (p[..., 0] >= 0) & (p[..., 0] <= p[..., 1]) & (p[..., 1] <= 1)

    def validate(self, p):
        super().validate(p)
        if not np.all(self.valid_mask(p)):
            raise DomainError("interval endpoints must satisfy 0 <= a <= b <= 1")

    def point(self, payload):
        if isinstance(payload, dict):
            payload = [payload["a"], payload["b"]]
        return super().point(payload)

    def interval(self, a, b) -> np.ndarray:
        return self.point([a, b])

    def to_payload(self, p):
        p = as_points(p)
        return {"a": float(p[0]), "b": float(p[1])}

    def describe(self):
        return {"kind": "interval"}


def interval_space() -> IntervalSpace:
    return IntervalSpace()


class ProductSpace(Space):
    """X x Y with coordinatewise W and the sum metric d_1.

    ``p`` other than 1 gives the d_p product; it exists only so the
    convex-structure checker can be pointed at it.
    """

    name = "product"

    def __init__(self, left: Space, right: Space, p=1):
        self.left = left
        self.right = right
        self.split = left.width
        self.width = left.width + right.width
        self.p = _norm_tag(p)
        self.supports_extend = left.supports_extend and right.supports_extend

    def parts(self, z):
        z = as_points(z)
        return z[..., : self.split], z[..., self.split:]

    def _metric(self, a, b):
        (a1, a2), (b1, b2) = self.parts(a), self.parts(b)
        d = np.stack([self.left._metric(a1, b1), self.right._metric(a2, b2)], axis=-1)
        return _lp(d, self.p)

    def _combine(self, x, y, t):
        (x1, x2), (y1, y2) = self.parts(x), self.parts(y)
        return np.concatenate(
            [self.left._combine(x1, y1, t), self.right._combine(x2, y2, t)], axis=-1
        )

    def _extend(self, y, x, lam):
        (y1, y2), (x1, x2) = self.parts(y), self.parts(x)
        return np.concatenate(
            [self.left._extend(y1, x1, lam), self.right._extend(y2, x2, lam)], axis=-1
        )

    def _sample(self, rng, n):
        return np.hstack([self.left.sample(rng, n), self.right.sample(rng, n)])

    def sample_around(self, rng, center, n, radius):
        a, b = self.parts(center)
        return np.hstack([self.left.sample_around(rng, a, n, radius),
                          self.right.sample_around(rng, b, n, radius)])

    def valid_mask(self, z):
        a, b = self.parts(z)
        return _valid(self.left, a) & _valid(self.right, b)

    def validate(self, z):
        a, b = self.parts(z)
        self.left.validate(a)
        self.right.validate(b)

    def point(self, payload):
        if isinstance(payload, (list, tuple)) and len(payload) == 2 and not _is_flat(payload, self.width):
            a = self.left.point(payload[0])
            b = self.right.point(payload[1])
            return np.concatenate([a, b])
        return super().point(payload)

    def pair(self, a, b) -> np.ndarray:
        return np.concatenate([as_points(a), as_points(b)])

    def to_payload(self, z):
        a, b = self.parts(z)
        return [self.left.to_payload(a), self.right.to_payload(b)]

    def describe(self):
        d = {"kind": "product", "left": self.left.describe(), "right": self.right.describe()}
        if self.p != 1.0:
            d["p"] = "inf" if self.p == np.inf else int(self.p)
        return d


def _is_flat(payload, width):
    try:
        arr = np.asarray(payload, dtype=float)
    except (TypeError, ValueError):
        return False
    return arr.shape == (width,)


def _valid(space, p):
    return space.valid_mask(p)


def product_space(left: Space, right: Space, p=1) -> ProductSpace:
    return ProductSpace(left, right, p)


SPACE_KINDS = {
    "euclidean": {"n": "dimension >= 1", "p": "1 | 2 | inf"},
    "ball": {"dim": "center dimension (default 3)"},
    "interval": {},
    "product": {"left": "space spec", "right": "space spec"},
}


def space_from_spec(spec: dict) -> Space:
    kind = spec.get("kind")
    if kind == "euclidean":
        return EuclideanSpace(spec.get("n", 2), spec.get("p", 2))
    if kind == "ball":
        return BallSpace(spec.get("dim", 3))
    if kind == "interval":
        return IntervalSpace()
    if kind == "product":
        return ProductSpace(space_from_spec(spec["left"]), space_from_spec(spec["right"]),
                            spec.get("p", 1))
    raise DomainError(f"unknown space kind {kind!r}; valid kinds: {sorted(SPACE_KINDS)}")
