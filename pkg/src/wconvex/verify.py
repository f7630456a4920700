"""Sampled verifiers for the convexity inequalities and their consequences.

Every verifier draws its samples up front from a seeded stream, evaluates
violations in chunks (threads when ``workers > 1``) and reduces them with
:func:`reduce_violations`, so verdicts do not depend on the worker count.
Violations are unit-free: ``(lhs - rhs) / (1 + |rhs|)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    DEGENERATE, DELTA_STRICT, EPS_EQ, DomainError, ExtensionUnsupported, ResourceError, Space,
    Verdict, as_points, chunked, draw_t, make_rng, reduce_violations, rel_excess,
)
from .functions import ConvexSet, WFn, distance_to_point, pair_sampler
from .spaces import EuclideanSpace, ProductSpace

MAX_DYADIC_LEVEL = 12
SPHERE_BAND = 1e-6


def _draw_pairs(space: Space, n: int, rng, domain: ConvexSet | None):
    sample = pair_sampler(space, domain)
    x, y = sample(rng, n), sample(rng, n)
    m = min(len(x), len(y))
    return x[:m], y[:m]


def _convexity_violation(fz, fx, fy, t):
    """Relative excess of f(W) over the chord, with unbounded slots handled.

    Rows where f(x) or f(y) is infinite are marked for skipping; an
    infinite f(W) against a finite chord is an infinite violation.
    """
    skip = ~np.isfinite(fx) | ~np.isfinite(fy)
    with np.errstate(invalid="ignore"):
        rhs = (1 - t) * fx + t * fy
        v = rel_excess(fz, rhs)
    v = np.where(skip, -np.inf, v)
    return v, skip


# ----------------------------------------------------------- W-convexity


def verify_wconvex(space: Space, f: WFn, n: int = 10_000, seed=0,
                   domain: ConvexSet | None = None, workers=None) -> Verdict:
    """f(W(x,y;t)) <= (1-t) f(x) + t f(y) on n sampled triples."""
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = make_rng(seed, 10)
    x, y = _draw_pairs(space, n, rng, domain)
    t = draw_t(rng, len(x))
    fx, fy = f.values(x), f.values(y)

    def viol(s):
        z = space.combine(x[s], y[s], t[s])
        return _convexity_violation(f.values(z), fx[s], fy[s], t[s])[0]

    v = chunked(viol, len(x), workers)
    skip = ~np.isfinite(fx) | ~np.isfinite(fy)

    def witness(i):
        z = space.combine(x[i], y[i], t[i])
        return {"x": x[i], "y": y[i], "t": float(t[i]), "z": z, "f_z": float(f.values(z)),
                "f_x": float(fx[i]), "f_y": float(fy[i]),
                "chord": float((1 - t[i]) * fx[i] + t[i] * fy[i])}

    return reduce_violations("wconvex", v, EPS_EQ, seed, witness, skipped=skip,
                             details={"function": f.label})


def verify_strict_wconvex(space: Space, f: WFn, n: int = 10_000, seed=0, separation: float = 0.1,
                          domain: ConvexSet | None = None, workers=None) -> Verdict:
    """Strict inequality with a relative margin of DELTA_STRICT.

    Pairs closer than ``separation`` are rejected and t is drawn from
    [0.05, 0.95].  The reported violation is ``rel_excess + DELTA_STRICT``
    and must be <= 0.
    """
    if separation <= 0:
        raise DomainError("separation must be > 0")
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = make_rng(seed, 11)
    x, y = _draw_pairs(space, 2 * n, rng, domain)
    keep = space.metric(x, y) >= separation
    x, y = x[keep][:n], y[keep][:n]
    if len(x) == 0:
        return Verdict("strict_wconvex", "inconclusive", 0, float("nan"), 0.0, seed,
                       details={"function": f.label, "reason": "no pairs at the separation"})
    t = draw_t(rng, len(x), 0.05, 0.95)
    fx, fy = f.values(x), f.values(y)

    def viol(s):
        z = space.combine(x[s], y[s], t[s])
        return _convexity_violation(f.values(z), fx[s], fy[s], t[s])[0] + DELTA_STRICT

    v = chunked(viol, len(x), workers)
    skip = ~np.isfinite(fx) | ~np.isfinite(fy)

    def witness(i):
        z = space.combine(x[i], y[i], t[i])
        return {"x": x[i], "y": y[i], "t": float(t[i]), "f_z": float(f.values(z)),
                "chord": float((1 - t[i]) * fx[i] + t[i] * fy[i])}

    return reduce_violations("strict_wconvex", v, 0.0, seed, witness, skipped=skip,
                             details={"function": f.label, "margin": DELTA_STRICT,
                                      "separation": separation})


# -------------------------------------------------------------- segments


@dataclass(frozen=True)
class DyadicGrid:
    """Parameters m / 2**level for m = 0..2**level."""

    level: int

    def __post_init__(self):
        if self.level < 0:
            raise DomainError("level must be >= 0")

    @property
    def values(self) -> np.ndarray:
        return np.arange(2 ** self.level + 1) / 2 ** self.level

    def new_values(self) -> np.ndarray:
        """Parameters first appearing at this level."""
        if self.level == 0:
            return np.array([0.0, 1.0])
        return np.arange(1, 2 ** self.level, 2) / 2 ** self.level


def _grid_values(grid) -> np.ndarray:
    if isinstance(grid, DyadicGrid):
        return grid.values
    k = int(grid)
    if k < 2:
        raise DomainError("need at least 2 segment points")
    return np.linspace(0.0, 1.0, k)


def segment_points(space: Space, x, y, grid=17) -> np.ndarray:
    """W(x, y; lam) for every lam of a dyadic grid or a uniform count."""
    x, y = as_points(x), as_points(y)
    if space.metric(x, y) <= DEGENERATE:
        raise DomainError("degenerate segment: d(x, y) = 0")
    lam = _grid_values(grid)
    return space.combine(np.broadcast_to(x, (len(lam), x.size)),
                         np.broadcast_to(y, (len(lam), y.size)), lam)


@dataclass
class LipschitzReport:
    constant: float
    pairs_checked: int
    max_ratio: float
    passed: bool
    max_excess: float
    witness: dict | None = None
    details: dict = field(default_factory=dict)

    def to_record(self, space: Space | None = None) -> dict:
        w = None
        if self.witness is not None:
            w = {k: (space.to_payload(v) if space is not None and isinstance(v, np.ndarray) else v)
                 for k, v in self.witness.items()}
        return {"constant": self.constant, "pairs_checked": self.pairs_checked,
                "max_ratio": self.max_ratio, "passed": self.passed,
                "max_excess": self.max_excess, "witness": w, "details": self.details}


def _pair_excess(fz, D, C):
    """Worst |f(z_i) - f(z_j)| - C d(z_i, z_j) over i < j, with its ratio."""
    dF = np.abs(fz[:, None] - fz[None, :])
    iu = np.triu_indices(len(fz), 1)
    dF, D = dF[iu], D[iu]
    ok = D > DEGENERATE
    ratio = np.where(ok, dF / np.where(ok, D, 1.0), 0.0)
    excess = dF - C * D * (1 + EPS_EQ)
    k = int(np.argmax(excess))
    return float(excess[k]), float(ratio.max()), (iu[0][k], iu[1][k]), len(D)


def segment_lipschitz_check(space: Space, f: WFn, x, y, n: int = 200,
                            alpha: float | None = None) -> LipschitzReport:
    """|f(z) - f(w)| <= C d(z, w) on n segment points, C = |f(x)-f(y)| / d(x,y).

    Passes iff every pair satisfies the bound up to an absolute slack of
    EPS_EQ.  The bound holds when f is affine along the segment; for a
    general W-convex f it can fail (d(., 0)**2 on [1, 3] peaks at ratio 6
    against C = 4), so a failure here is not a verifier error.  With
    ``alpha`` the second assertion is checked too: if |f(x)-f(y)| <=
    alpha d(x,y) then |f(z)-f(w)| <= alpha d(z,w).
    """
    x, y = as_points(x), as_points(y)
    Z = segment_points(space, x, y, n)
    fz = f.values(Z)
    dxy = float(space.metric(x, y))
    C = abs(float(fz[-1] - fz[0])) / dxy
    D = space.metric(Z[:, None, :], Z[None, :, :])
    excess, ratio, (i, j), pairs = _pair_excess(fz, D, C)
    passed = excess <= EPS_EQ
    details = {"d_xy": dxy}
    if alpha is not None:
        pre = abs(float(fz[-1] - fz[0])) <= alpha * dxy * (1 + EPS_EQ)
        a_excess = _pair_excess(fz, D, alpha)[0]
        details.update(alpha=alpha, alpha_precondition=pre, alpha_passed=a_excess <= EPS_EQ,
                       alpha_excess=a_excess)
    witness = None
    if not passed:
        witness = {"z": Z[i], "w": Z[j], "f_z": float(fz[i]), "f_w": float(fz[j]),
                   "d_zw": float(D[i, j])}
    return LipschitzReport(C, pairs, ratio, passed, excess, witness, details)


def midpoint_convexity_check(space: Space, f: WFn, n: int = 10_000, seed=0,
                             workers=None) -> Verdict:
    """f(W(x,y;(mu+nu)/2)) <= f(W(x,y;mu))/2 + f(W(x,y;nu))/2."""
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = make_rng(seed, 12)
    x, y = space.sample(rng, n), space.sample(rng, n)
    mu, nu = draw_t(rng, n), rng.permutation(draw_t(rng, n))

    def viol(s):
        a = f.values(space.combine(x[s], y[s], mu[s]))
        b = f.values(space.combine(x[s], y[s], nu[s]))
        m = f.values(space.combine(x[s], y[s], 0.5 * (mu[s] + nu[s])))
        return _convexity_violation(m, a, b, 0.5)[0]

    v = chunked(viol, n, workers)

    def witness(i):
        return {"x": x[i], "y": y[i], "mu": float(mu[i]), "nu": float(nu[i])}

    return reduce_violations("midpoint_convexity", v, EPS_EQ, seed, witness,
                             details={"function": f.label})


def dyadic_convexity_check(space: Space, f: WFn, x, y, levels: int = 10) -> Verdict:
    """Chord inequality for every lam = m / 2**k, k <= levels.

    Levels are swept in order and the first level with a violation is
    reported in ``details["first_failing_level"]``.
    """
    if levels > MAX_DYADIC_LEVEL:
        raise ResourceError(f"levels > {MAX_DYADIC_LEVEL} (grid of 2**{levels} + 1 points)")
    if levels < 0:
        raise DomainError("levels must be >= 0")
    x, y = as_points(x), as_points(y)
    fx, fy = float(f.values(x)), float(f.values(y))
    lams, viols, first = [], [], None
    for k in range(levels + 1):
        lam = DyadicGrid(k).new_values()
        Z = space.combine(np.broadcast_to(x, (len(lam), x.size)),
                          np.broadcast_to(y, (len(lam), y.size)), lam)
        v, _ = _convexity_violation(f.values(Z), fx, fy, lam)
        if first is None and np.nanmax(np.where(np.isnan(v), np.inf, v)) > EPS_EQ:
            first = k
        lams.append(lam)
        viols.append(v)
    lam, v = np.concatenate(lams), np.concatenate(viols)

    def witness(i):
        return {"x": x, "y": y, "lam": float(lam[i]), "level": first}

    return reduce_violations("dyadic_convexity", v, EPS_EQ, None, witness,
                             details={"function": f.label, "levels": levels,
                                      "first_failing_level": first})


def reversal_bound_check(space: Space, n: int = 10_000, seed=0) -> Verdict:
    """d(W(x,y;lam), W(y,x;1-lam)) <= ((1-lam)**2 + lam**2) d(x,y)."""
    rng = make_rng(seed, 13)
    x, y = space.sample(rng, n), space.sample(rng, n)
    lam = draw_t(rng, n)
    lhs = space.metric(space.combine(x, y, lam), space.combine(y, x, 1 - lam))
    rhs = ((1 - lam) ** 2 + lam ** 2) * space.metric(x, y)
    return reduce_violations("reversal_bound", rel_excess(lhs, rhs), EPS_EQ, seed,
                             lambda i: {"x": x[i], "y": y[i], "lam": float(lam[i])})


# ---------------------------------------------------- local boundedness


def _ball_points(space: Space, x0, r: float, n: int, rng) -> np.ndarray:
    """Points of the open ball B(x0, r): W(x0, u; s r / d(x0, u)), s < 1."""
    u = space.sample(rng, n)
    d = space.metric(u, x0)
    s = rng.random(n) ** (1.0 / max(space.dim_hint, 1)) * (1 - 1e-9)
    lam = np.clip(s * r / np.maximum(d, DEGENERATE), 0.0, 1.0)
    X = space.combine(np.broadcast_to(x0, u.shape), u, lam)
    return X[space.valid_mask(X)]


def local_lipschitz_from_bound(space: Space, f: WFn, x0, r: float, rho: float, M: float,
                               n: int = 10_000, seed=0) -> LipschitzReport:
    """|f| <= M on B(x0, r) implies f is 2M/rho-Lipschitz on B(x0, r - rho).

    The bound on M is checked first on n samples; if it fails the report
    carries ``details["precondition"] = False`` and the offending point.
    Pairs also replay the construction behind the bound: the extension
    xi with x = W(y, xi; d/(rho + d)) must stay in B(x0, r).
    """
    if not space.supports_extend:
        raise ExtensionUnsupported(f"{space.name}: the Lipschitz bound needs geodesic extension")
    if not 0 < rho < r:
        raise DomainError("need 0 < rho < r")
    x0 = as_points(x0)
    rng = make_rng(seed, 14)
    B = _ball_points(space, x0, r, n, rng)
    fb = np.abs(f.values(B))
    k = int(np.argmax(fb))
    if fb[k] > M * (1 + EPS_EQ) + EPS_EQ:
        return LipschitzReport(2 * M / rho, 0, float("nan"), False, float(fb[k] - M),
                               {"point": B[k], "abs_f": float(fb[k])},
                               {"precondition": False, "M": M})
    inner = r - rho
    u, v = _ball_points(space, x0, inner, n, rng), _ball_points(space, x0, inner, n, rng)
    m = min(len(u), len(v))
    u, v = u[:m], v[:m]
    C = 2 * M / rho
    D = space.metric(u, v)
    dF = np.abs(f.values(u) - f.values(v))
    excess = dF - C * D * (1 + EPS_EQ)
    ok = D > DEGENERATE
    ratio = np.where(ok, dF / np.where(ok, D, 1.0), 0.0)
    lam = D / (rho + D)
    live = ok & (lam < 1)
    xi = space.extend(v[live], u[live], lam[live])
    reach = float(np.max(space.metric(xi, x0)) / r) if len(xi) else 0.0
    i = int(np.argmax(excess))
    passed = bool(excess[i] <= EPS_EQ)
    witness = None if passed else {"u": u[i], "v": v[i], "d_uv": float(D[i]), "df": float(dF[i])}
    return LipschitzReport(C, m, float(ratio.max()), passed, float(excess[i]), witness,
                           {"precondition": True, "M": M, "max_extension_reach": reach})


def bounded_above_check(space: Space, f: WFn, x0, r: float, c: float | None = None,
                        n: int = 10_000, seed=0) -> Verdict:
    """f <= c on B(x0, r) gives |f| <= c + 2|f(x0)| there.

    Without ``c`` the sampled supremum of f is used.  Each sample also
    replays the reflection y with x0 = W(x, y; 1/2) when extension exists.
    """
    x0 = as_points(x0)
    rng = make_rng(seed, 15)
    X = _ball_points(space, x0, r, n, rng)
    fx = f.values(X)
    c = float(np.max(fx)) if c is None else float(c)
    if np.max(fx) > c + EPS_EQ * (1 + abs(c)):
        i = int(np.argmax(fx))
        return Verdict("bounded_above", "inconclusive", 0, float("nan"), EPS_EQ, seed,
                       details={"reason": "f exceeds c on the ball", "point": X[i].tolist()})
    bound = c + 2 * abs(float(f.values(x0)))
    v = rel_excess(np.abs(fx), bound)
    details = {"c": c, "bound": bound}
    if space.supports_extend:
        Y = space.extend(X, np.broadcast_to(x0, X.shape), 0.5)
        ok = space.valid_mask(Y)
        details["reflection_in_ball"] = bool(np.all(space.metric(Y[ok], x0) < r * (1 + EPS_EQ)))
    return reduce_violations("bounded_above", v, EPS_EQ, seed,
                             lambda i: {"x": X[i], "f_x": float(fx[i])}, details=details)


# ------------------------------------------------ epigraph and sublevels


def epigraph_space(space: Space) -> ProductSpace:
    """X x R with the sum metric and coordinatewise W."""
    return ProductSpace(space, EuclideanSpace(1, 1))


def epigraph_convexity_check(space: Space, f: WFn, n: int = 10_000, seed=0,
                             workers=None) -> Verdict:
    """W-combinations of epigraph points stay in the epigraph.

    Uses the same (x, y, t) stream as :func:`verify_wconvex`.  Every triple
    is tested twice in X x R: for the graph points (x, f(x)), (y, f(y)) and
    for points lifted by random heights s >= 0.  Membership of (z, c) is
    f(z) <= c.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = make_rng(seed, 10)
    x, y = _draw_pairs(space, n, rng, None)
    t = draw_t(rng, len(x))
    lift = make_rng(seed, 16).exponential(1.0, (len(x), 2))
    E = epigraph_space(space)
    fx, fy = f.values(x), f.values(y)
    P = np.hstack([x, fx[:, None]])
    Q = np.hstack([y, fy[:, None]])
    P2 = np.hstack([x, (fx + lift[:, 0])[:, None]])
    Q2 = np.hstack([y, (fy + lift[:, 1])[:, None]])

    def excess(A, B, s):
        with np.errstate(invalid="ignore"):
            Z = E.combine(A[s], B[s], t[s])
            z, c = E.parts(Z)
            return rel_excess(f.values(z), c[:, 0])

    def viol(s):
        return np.maximum(excess(P, Q, s), excess(P2, Q2, s))

    skip = ~np.isfinite(fx) | ~np.isfinite(fy)
    v = chunked(viol, len(x), workers)
    v = np.where(skip, -np.inf, v)

    def witness(i):
        Z = E.combine(P[i], Q[i], t[i])
        return {"x": x[i], "y": y[i], "t": float(t[i]), "combined": Z.tolist(),
                "f_at_combined": float(f.values(E.parts(Z)[0]))}

    return reduce_violations("epigraph_convexity", v, EPS_EQ, seed, witness, skipped=skip,
                             details={"function": f.label})


def sublevel_convexity_check(space: Space, f: WFn, h: float, n: int = 10_000, seed=0,
                             oversample: int = 8) -> Verdict:
    """W-combinations of points with f <= h stay in the sublevel set.

    Members are found by rejection from the space sampler; fewer than two
    members gives an inconclusive verdict.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = make_rng(seed, 17)
    members = []
    have = 0
    for _ in range(oversample):
        X = space.sample(rng, 2 * n)
        X = X[f.values(X) <= h]
        members.append(X)
        have += len(X)
        if have >= 2 * n:
            break
    M = np.concatenate(members)
    if len(M) < 2:
        return Verdict("sublevel_convexity", "inconclusive", 0, float("nan"), EPS_EQ, seed,
                       details={"function": f.label, "h": h, "members": int(len(M))})
    m = len(M) // 2
    x, y = M[:m][:n], M[m:2 * m][:n]
    t = draw_t(rng, len(x))
    z = space.combine(x, y, t)
    v = rel_excess(f.values(z), h)
    return reduce_violations("sublevel_convexity", v, EPS_EQ, seed,
                             lambda i: {"x": x[i], "y": y[i], "t": float(t[i]),
                                        "f_z": float(f.values(z[i]))},
                             details={"function": f.label, "h": h})


def set_convexity_check(C: ConvexSet, n: int = 10_000, seed=0) -> Verdict:
    """W(x, y; t) stays in C for sampled members x, y."""
    rng = make_rng(seed, 18)
    x, y = C.sample(rng, n), C.sample(rng, n)
    m = min(len(x), len(y))
    if m == 0:
        return Verdict("set_convexity", "inconclusive", 0, float("nan"), 0.5, seed,
                       details={"set": C.label})
    x, y = x[:m], y[:m]
    t = draw_t(rng, m)
    z = C.space.combine(x, y, t)
    v = (~C.contains(z)).astype(float)
    return reduce_violations("set_convexity", v, 0.5, seed,
                             lambda i: {"x": x[i], "y": y[i], "t": float(t[i])},
                             details={"set": C.label})


# ---------------------------------------------------- strict convexity


def sphere_points(space: Space, x0, radius, U, rng=None):
    """Points at distance ``radius`` from x0 in the directions of U.

    W(x0, u; radius / d(x0, u)) when u is far enough, else the extension
    through u when the space has one.  Returns the points and a mask of
    rows that are valid and inside the relative band SPHERE_BAND.
    """
    U = as_points(U)
    X0 = np.broadcast_to(x0, U.shape)
    radius = np.broadcast_to(np.asarray(radius, dtype=float), (len(U),))
    d = space.metric(X0, U)
    far = d >= radius
    lam = np.where(far, radius / np.maximum(d, DEGENERATE), 0.0)
    P = space.combine(X0, U, np.clip(lam, 0.0, 1.0))
    if space.supports_extend:
        near = ~far & (d > DEGENERATE)
        if np.any(near):
            P[near] = space.extend(X0[near], U[near], d[near] / radius[near])
    ok = space.valid_mask(P)
    ok &= np.abs(space.metric(P, X0) - radius) <= SPHERE_BAND * radius
    return P, ok


def strict_space_check(space: Space, n: int = 10_000, seed=0, planted=None,
                       separation: float = 0.05) -> Verdict:
    """W-combinations of distinct points on a sphere fall inside the ball.

    Checks d(W(x,y;t), x0) <= rho (1 - DELTA_STRICT) for x, y on S(x0, rho),
    d(x, y) >= separation * rho, t in [0.05, 0.95].  ``planted`` is a list
    of (x0, x, y, t) tuples checked before the random rows;
    ``details["planted_violations"]`` records their violations.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = make_rng(seed, 19)
    x0, u, v = space.sample(rng, n), space.sample(rng, n), space.sample(rng, n)
    du, dv = space.metric(x0, u), space.metric(x0, v)
    rho = rng.uniform(0.2, 1.0, n) * np.minimum(du, dv)
    x, okx = sphere_points(space, x0, rho, u)
    y, oky = sphere_points(space, x0, rho, v)
    keep = okx & oky & (rho > DEGENERATE) & (space.metric(x, y) >= separation * rho)
    t = draw_t(rng, n, 0.05, 0.95)
    X0, X, Y, T, R = x0[keep], x[keep], y[keep], t[keep], rho[keep]
    n_planted = 0
    if planted:
        P = [tuple(as_points(a) for a in row[:3]) + (float(row[3]),) for row in planted]
        pX0 = np.array([p[0] for p in P])
        pX = np.array([p[1] for p in P])
        pY = np.array([p[2] for p in P])
        pT = np.array([p[3] for p in P])
        pR = space.metric(pX, pX0)
        if np.any(np.abs(space.metric(pY, pX0) - pR) > SPHERE_BAND * pR):
            raise DomainError("planted pair is not equidistant from its center")
        X0, X, Y = np.vstack([pX0, X0]), np.vstack([pX, X]), np.vstack([pY, Y])
        T, R = np.concatenate([pT, T]), np.concatenate([pR, R])
        n_planted = len(P)
    if len(T) == 0:
        return Verdict("strict_space", "inconclusive", 0, float("nan"), 0.0, seed,
                       details={"reason": "sphere sampling failed"})
    Z = space.combine(X, Y, T)
    viol = (space.metric(Z, X0) - R) / R + DELTA_STRICT

    def witness(i):
        return {"x0": X0[i], "x": X[i], "y": Y[i], "t": float(T[i]), "rho": float(R[i]),
                "d_z_x0": float(space.metric(Z[i], X0[i]))}

    return reduce_violations("strict_space", viol, 0.0, seed, witness,
                             details={"planted_violations": viol[:n_planted].tolist(),
                                      "rejected": int(n - keep.sum())})


def sphere_wconvex_check(space: Space, x0, rho: float, sigma: float, f: WFn | None = None,
                         n: int = 10_000, seed=0, strict: bool = True) -> Verdict:
    """(Strict) W-convexity of f restricted to pairs on S(x0, sigma).

    f defaults to d(., x0); a strict pass for that choice is recorded as a
    strict-convexity certificate for the sampled sphere.
    """
    if not 0 < sigma < rho:
        raise DomainError("need 0 < sigma < rho")
    x0 = as_points(x0)
    certify = f is None
    f = distance_to_point(space, x0) if f is None else f
    rng = make_rng(seed, 20)
    x, okx = sphere_points(space, x0, sigma, space.sample(rng, n))
    y, oky = sphere_points(space, x0, sigma, space.sample(rng, n))
    keep = okx & oky
    if strict:
        keep &= space.metric(x, y) >= 0.05 * sigma
    x, y = x[keep], y[keep]
    if len(x) == 0:
        return Verdict("sphere_wconvex", "inconclusive", 0, float("nan"), 0.0, seed,
                       details={"reason": "sphere sampling failed"})
    t = draw_t(rng, len(x), 0.05, 0.95) if strict else draw_t(rng, len(x))
    fx, fy = f.values(x), f.values(y)
    z = space.combine(x, y, t)
    v, skip = _convexity_violation(f.values(z), fx, fy, t)
    tol = EPS_EQ
    if strict:
        v, tol = v + DELTA_STRICT, 0.0
    verdict = reduce_violations(
        "sphere_wconvex", v, tol, seed,
        lambda i: {"x": x[i], "y": y[i], "t": float(t[i]), "f_z": float(f.values(z[i]))},
        skipped=skip,
        details={"function": f.label, "sigma": sigma, "rho": rho, "strict": strict})
    if certify and strict:
        verdict.details["strict_convexity_certificate"] = verdict.passed
    return verdict
