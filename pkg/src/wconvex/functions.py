"""W-convex function algebra and convex subsets.

A :class:`WFn` wraps a batch evaluator ``(m, width) -> (m,)``.  Calling it
on a single point returns a float, or :data:`UNBOUNDED` where the value is
``+inf`` (outside the finiteness domain of a supremum family).  Batch calls
return arrays with ``np.inf`` in those slots.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import T_GRID, DomainError, Space, as_points, make_rng


class _Unbounded:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "UNBOUNDED"

    def __bool__(self):
        return True


UNBOUNDED = _Unbounded()


class WFn:
    def __init__(self, space: Space, batch: Callable[[np.ndarray], np.ndarray], label: str,
                 strict: bool = False, convex: bool = True):
        self.space = space
        self._batch = batch
        self.label = label
        # claims made by the algebra, not verified facts
        self.strict = strict
        self.convex = convex

    def values(self, pts) -> np.ndarray:
        pts = as_points(pts)
        if pts.ndim == 1:
            return np.asarray(self._batch(pts[None, :]), dtype=float)[0]
        return np.asarray(self._batch(pts), dtype=float)

    def __call__(self, x):
        x = as_points(x)
        if x.ndim == 1:
            v = float(self.values(x))
            return UNBOUNDED if v == np.inf else v
        return self.values(x)

    def __repr__(self):
        return f"WFn({self.label})"

    @classmethod
    def from_callable(cls, space: Space, fn: Callable, label: str = "custom", **kw) -> "WFn":
        """Wrap a single-point function; it may return UNBOUNDED."""

        def batch(X):
            out = np.empty(len(X))
            for i, x in enumerate(X):
                v = fn(x)
                out[i] = np.inf if v is UNBOUNDED else float(v)
            return out

        return cls(space, batch, label, **kw)


@dataclass(frozen=True)
class ScalarMap:
    """Increasing convex g used on top of distances and W-convex functions."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    strictly_convex: bool = False
    strictly_increasing: bool = True

    def __call__(self, v):
        return self.fn(np.asarray(v, dtype=float))


def _pos(v):
    return np.where(v >= 0, v, 0.0)


SCALAR_MAPS = {
    "identity": ScalarMap("identity", lambda v: v, False, True),
    "square": ScalarMap("square", lambda v: _pos(v) ** 2, True, True),
    "abs": ScalarMap("abs", lambda v: _pos(np.abs(v)), False, True),
    "exp": ScalarMap("exp", np.exp, True, True),
}


def scalar_map(g) -> ScalarMap:
    """Resolve a tag (``"exp"``, ``"power:1.5"``, ``("power", 1.5)``) or pass through."""
    if isinstance(g, ScalarMap):
        return g
    if isinstance(g, (tuple, list)) and len(g) == 2 and g[0] == "power":
        return _power(float(g[1]))
    if isinstance(g, str):
        if g.startswith("power"):
            _, _, a = g.partition(":")
            return _power(float(a or 2.0))
        if g in SCALAR_MAPS:
            return SCALAR_MAPS[g]
    if callable(g):
        return ScalarMap(getattr(g, "__name__", "g"), g, False, False)
    raise DomainError(f"unknown scalar map {g!r}; valid tags: {sorted(SCALAR_MAPS)} or power:<alpha>")


def _power(alpha: float) -> ScalarMap:
    if alpha < 1:
        raise DomainError("power map needs alpha >= 1")
    return ScalarMap(f"power:{alpha:g}", lambda v: _pos(v) ** alpha, alpha > 1, True)


# ------------------------------------------------------------ constructors


def distance_to_point(space: Space, x0, g="identity") -> WFn:
    x0 = space.point(x0)
    gm = scalar_map(g)

    def batch(X):
        return gm(space.metric(X, x0))

    label = "d(.,x0)" if gm.name == "identity" else f"{gm.name}(d(.,x0))"
    return WFn(space, batch, label, strict=gm.strictly_convex)


def compose_increasing_convex(f: WFn, g) -> WFn:
    gm = scalar_map(g)
    strict = gm.strictly_convex or (f.strict and gm.strictly_increasing)
    return WFn(f.space, lambda X: gm(f.values(X)), f"{gm.name}({f.label})", strict=strict,
               convex=f.convex)


def _same_space(fs: Sequence[WFn]) -> Space:
    if not fs:
        raise DomainError("empty function list")
    sp = fs[0].space
    for f in fs[1:]:
        if f.space is not sp:
            raise TypeError(f"functions live on different spaces: {fs[0].label} vs {f.label}")
    return sp


def scale(f: WFn, alpha: float) -> WFn:
    if alpha < 0:
        raise DomainError("scale factor must be >= 0")
    return WFn(f.space, lambda X: alpha * f.values(X), f"{alpha:g}*{f.label}",
               strict=f.strict and alpha > 0, convex=f.convex)


def sum_of(fs: Sequence[WFn]) -> WFn:
    sp = _same_space(fs)
    fs = list(fs)
    return WFn(sp, lambda X: np.sum([f.values(X) for f in fs], axis=0),
               "+".join(f.label for f in fs),
               strict=any(f.strict for f in fs), convex=all(f.convex for f in fs))


def conical(fs: Sequence[WFn], weights: Sequence[float]) -> WFn:
    fs, w = list(fs), [float(a) for a in weights]
    if len(fs) != len(w):
        raise DomainError("one weight per function")
    if any(a < 0 for a in w):
        raise DomainError("conical weights must be >= 0")
    sp = _same_space(fs)
    return WFn(sp, lambda X: np.sum([a * f.values(X) for a, f in zip(w, fs)], axis=0),
               "+".join(f"{a:g}*{f.label}" for a, f in zip(w, fs)),
               strict=any(f.strict and a > 0 for a, f in zip(w, fs)),
               convex=all(f.convex for f in fs))


def max_of(fs: Sequence[WFn]) -> WFn:
    sp = _same_space(fs)
    fs = list(fs)
    return WFn(sp, lambda X: np.max([f.values(X) for f in fs], axis=0),
               "max(" + ",".join(f.label for f in fs) + ")",
               strict=all(f.strict for f in fs), convex=all(f.convex for f in fs))


def sup_family(fs: Sequence[WFn]) -> WFn:
    """Pointwise supremum of a finite family.

    Single-point evaluation raises DomainError where the supremum is
    unbounded; batch evaluation carries ``inf`` there.
    """
    sp = _same_space(fs)
    fs = list(fs)
    inner = WFn(sp, lambda X: np.max([f.values(X) for f in fs], axis=0),
                "sup(" + ",".join(f.label for f in fs) + ")",
                convex=all(f.convex for f in fs))
    return _SupFn(inner)


class _SupFn(WFn):
    def __init__(self, inner: WFn):
        super().__init__(inner.space, inner._batch, inner.label, convex=inner.convex)

    def __call__(self, x):
        v = super().__call__(x)
        if v is UNBOUNDED:
            raise DomainError(f"{self.label} is unbounded at this point")
        return v


def ball_size(space: Space) -> WFn:
    """B(c, r) -> ||c|| + |r| on the ball space."""
    def batch(X):
        c = X[:, :-1]
        return np.sqrt(np.sum(c * c, axis=1)) + np.abs(X[:, -1])

    return WFn(space, batch, "||c||+|r|")


def radius(space: Space) -> WFn:
    return WFn(space, lambda X: X[:, -1], "r")


def lebesgue_measure(space: Space) -> WFn:
    return WFn(space, lambda X: X[:, 1] - X[:, 0], "length")


def linear_functional(space: Space, a, c: float = 0.0) -> WFn:
    a = as_points(a)
    return WFn(space, lambda X: X @ a + c, "linear")


def negate(f: WFn) -> WFn:
    """-f; a deliberately non-convex input for the verifiers."""
    return WFn(f.space, lambda X: -f.values(X), f"-{f.label}", convex=False)


# --------------------------------------------------------------- convex sets


@dataclass
class ConvexSet:
    """Membership predicate plus a sampler of members.

    Closure under W is asserted by the constructor, never assumed by the
    verifiers (see ``verify.set_convexity_check``).  ``solid`` marks sets
    with nonempty interior, which enables boundary search in the
    projection solver.
    """

    space: Space
    contains_batch: Callable[[np.ndarray], np.ndarray]
    sample_batch: Callable[[np.random.Generator, int], np.ndarray]
    label: str = "C"
    solid: bool = False
    edge_distance: Callable[[np.ndarray], float] | None = None
    meta: dict = field(default_factory=dict)

    def contains(self, pts):
        pts = as_points(pts)
        if pts.ndim == 1:
            return bool(self.contains_batch(pts[None, :])[0])
        return np.asarray(self.contains_batch(pts), dtype=bool)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.sample_batch(rng, n)


def _grid_lambdas(rng, n):
    # a quarter endpoints (the faces of a segment), some 1/16-grid points,
    # the rest uniform
    lam = rng.random(n)
    u = rng.random(n)
    grid = u < 0.15
    lam[grid] = T_GRID[rng.integers(1, len(T_GRID) - 1, int(grid.sum()))]
    ends = u > 0.75
    lam[ends] = rng.integers(0, 2, int(ends.sum()))
    return lam


def segment_set(space: Space, a, b, tol: float = 1e-9) -> ConvexSet:
    """The segment {W(a, b; s)}.

    z is a member iff z = W(a, b; d(a, z) / d(a, b)); additivity of the
    metric alone would admit the whole metric segment in l1 / l-inf.
    """
    a, b = space.point(a), space.point(b)
    dab = float(space.metric(a, b))

    def contains(X):
        if dab == 0:
            return space.metric(X, a) <= tol
        s = space.metric(X, a) / dab
        ok = s <= 1 + tol
        s = np.clip(s, 0.0, 1.0)
        back = space.combine(np.broadcast_to(a, X.shape), np.broadcast_to(b, X.shape), s)
        return ok & (space.metric(back, X) <= tol * (1 + dab))

    def sample(rng, n):
        lam = _grid_lambdas(rng, n)
        return space.combine(np.broadcast_to(a, (n, a.size)), np.broadcast_to(b, (n, b.size)), lam)

    return ConvexSet(space, contains, sample, "segment", meta={"a": a, "b": b})


def _ball_members(space, center, radius, rng, n):
    s = space.sample_around(rng, center, n, 2 * radius)
    d = space.metric(s, center)
    target = radius * rng.random(n) ** (1.0 / max(1, space.width))
    # a sprinkle of boundary points
    target[rng.random(n) < 0.1] = radius
    lam = np.where(d > target, target / np.where(d > 0, d, 1.0), 1.0)
    return space.combine(np.broadcast_to(center, s.shape), s, lam)


def ball_set(space: Space, center, radius: float, tol: float = 1e-12) -> ConvexSet:
    """Closed ball B(c, r); convex in every convex metric space."""
    if radius <= 0:
        raise DomainError("radius must be > 0")
    c = space.point(center)

    def contains(X):
        return space.metric(X, c) <= radius * (1 + tol)

    return ConvexSet(space, contains, lambda rng, n: _ball_members(space, c, radius, rng, n),
                     "ball", solid=True, meta={"center": c, "radius": radius})


def ball_projection(space: Space, center, radius: float, x) -> np.ndarray:
    """Nearest point of B(c, r) to x: W(c, x; r / d(c, x)) when x is outside."""
    c, x = as_points(center), as_points(x)
    d = float(space.metric(c, x))
    if d <= radius:
        return x
    return space.combine(c, x, radius / d)


def box_set(space: Space, lo, hi) -> ConvexSet:
    lo, hi = as_points(lo), as_points(hi)
    if lo.shape != (space.width,) or np.any(lo > hi):
        raise DomainError("box needs lo <= hi coordinatewise")
    eps = 1e-12 * (1 + np.abs(hi - lo))

    def contains(X):
        return np.all((X >= lo - eps) & (X <= hi + eps), axis=-1)

    def sample(rng, n):
        # faces of every dimension are equally likely: the number of
        # coordinates pinned to lo/hi is uniform on 0..dim
        X = rng.uniform(lo, hi, (n, lo.size))
        k = rng.integers(0, lo.size + 1, n)
        rank = np.argsort(rng.random((n, lo.size)), axis=1).argsort(axis=1)
        snap = rank < k[:, None]
        side = rng.random((n, lo.size)) < 0.5
        return np.where(snap, np.where(side, lo, hi), X)

    return ConvexSet(space, contains, sample, "box", solid=bool(np.all(hi > lo)),
                     meta={"lo": lo, "hi": hi})


def whole_space(space: Space) -> ConvexSet:
    return ConvexSet(space, lambda X: np.ones(len(X), dtype=bool), space.sample, "X")


def intersection(*sets: ConvexSet, oversample: int = 8) -> ConvexSet:
    """Intersection; members drawn by rejection from the first set."""
    if not sets:
        raise DomainError("empty intersection list")
    sp = sets[0].space

    def contains(X):
        ok = np.ones(len(X), dtype=bool)
        for s in sets:
            ok &= s.contains_batch(X)
        return ok

    def sample(rng, n):
        got = []
        have = 0
        for _ in range(oversample):
            X = sets[0].sample(rng, max(n, 16) * 2)
            X = X[contains(X)]
            got.append(X)
            have += len(X)
            if have >= n:
                break
        return np.concatenate(got)[:n]

    return ConvexSet(sp, contains, sample, "cap(" + ",".join(s.label for s in sets) + ")",
                     solid=all(s.solid for s in sets))


def sublevel_set(f: WFn, h: float, oversample: int = 16) -> ConvexSet:
    sp = f.space

    def contains(X):
        return f.values(X) <= h

    def sample(rng, n):
        got, have = [], 0
        for _ in range(oversample):
            X = sp.sample(rng, max(n, 16) * 4)
            X = X[contains(X)]
            got.append(X)
            have += len(X)
            if have >= n:
                break
        return np.concatenate(got)[:n]

    return ConvexSet(sp, contains, sample, f"S_{h:g}({f.label})", solid=True)


def open_ball_surrogate(space: Space, center, radius: float, band: float) -> ConvexSet:
    """Ball B(c, r) with a boundary band of width ``band`` cut away.

    Stands in for an open set: the nominal infimum sits on the excluded
    band, so a projection lands on the band edge.
    """
    inner = ball_set(space, center, radius - band)
    c = inner.meta["center"]
    return ConvexSet(space, inner.contains_batch, inner.sample_batch, "open-ball-surrogate",
                     solid=True,
                     edge_distance=lambda y: abs(float(space.metric(y, c)) - (radius - band)),
                     meta={"center": c, "radius": radius, "band": band})


def indicator(C: ConvexSet) -> WFn:
    """0 on C, +inf outside."""
    return WFn(C.space, lambda X: np.where(C.contains_batch(X), 0.0, np.inf), f"1_{C.label}")


def restrict(f: WFn, C: ConvexSet) -> WFn:
    if C.space is not f.space:
        raise TypeError("set and function live on different spaces")

    def batch(X):
        inside = C.contains_batch(X)
        if not np.all(inside):
            raise DomainError(f"{f.label} restricted to {C.label}: point outside the set")
        return f.values(X)

    return WFn(f.space, batch, f"{f.label}|{C.label}", strict=f.strict, convex=f.convex)


def distance_map(space: Space, Y: ConvexSet, m: int = 16, seed=0) -> WFn:
    """x -> approximate inf_{y in Y} d(x, y), always an upper bound.

    ``m`` is the per-pass candidate budget handed to the projection solver.
    """
    if m < 1:
        raise DomainError("budget must be >= 1")
    from .optimize import ProjectionConfig, project

    cfg = ProjectionConfig(starts=1, batch=m, seed=seed)

    def batch(X):
        return np.array([project(space, Y, x, cfg).distance for x in X])

    return WFn(space, batch, f"d_{Y.label}")


def pair_sampler(space: Space, domain: ConvexSet | None):
    if domain is None:
        return space.sample
    if domain.space is not space:
        raise TypeError("domain set lives on another space")
    return domain.sample


def probe(f: WFn, n: int = 64, seed=0) -> np.ndarray:
    """Values of f on a reproducible batch of sample points."""
    return f.values(f.space.sample(make_rng(seed, 99), n))
