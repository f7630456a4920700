"""Metric projection, Chebyshev diagnostics and W-based fixed-point iteration.

The projection solver only uses W, the metric and set membership.  Each
pass takes the incumbent y* and a batch of candidate segments:

* segments [y*, y'] with y' drawn from Y, which stay inside Y by convexity;
* for solid sets, boundary curves: points s(t) = W(s1, s2; t) of the
  ambient space near Y are pushed onto Y along the ray from an interior
  anchor, which converges quickly when the nearest point sits on a
  curved face.

Every segment is minimised by a 64-cell grid followed by bracket
refinement around the best cell.  Polyhedral faces are reached exactly
only through the first kind of segment, so set samplers should cover
faces of every dimension.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (
    EPS_EQ, DomainError, Space, Verdict, as_points, chunked, make_rng, reduce_violations,
    rel_excess, worker_count,
)
from .functions import ConvexSet, WFn, compose_increasing_convex, whole_space

INV_PHI = (math.sqrt(5) - 1) / 2
GRID = 64


# ------------------------------------------------------------ line search


def _line_search(phi: Callable[[np.ndarray], np.ndarray], k: int, tol: float = 1e-10,
                 grid: int = GRID, split: int = 16):
    """Row-wise minimisation of phi over t in [0, 1].

    ``phi`` maps a (k, m) array of parameters to (k, m) values.  A uniform
    grid locates the best cell; the bracket around it is then refined by
    evaluating ``split - 1`` interior points per call and keeping the
    neighbours of the best one, which shrinks it by ``split / 2`` per call
    on unimodal rows.  Returns the per-row best parameter and value.
    """
    rows = np.arange(k)
    G = np.linspace(0.0, 1.0, grid + 1)
    V = phi(np.broadcast_to(G, (k, grid + 1)).copy())
    i = np.argmin(V, axis=1)
    best_t, best_v = G[i], V[rows, i]
    lo, hi = G[np.maximum(i - 1, 0)], G[np.minimum(i + 1, grid)]
    v_lo, v_hi = V[rows, np.maximum(i - 1, 0)], V[rows, np.minimum(i + 1, grid)]
    frac = np.arange(1, split) / split
    while np.max(hi - lo) > tol:
        T = lo[:, None] + (hi - lo)[:, None] * frac
        Tp = np.hstack([lo[:, None], T, hi[:, None]])
        Vp = np.hstack([v_lo[:, None], phi(T), v_hi[:, None]])
        j = np.argmin(Vp, axis=1)
        better = Vp[rows, j] < best_v
        best_t = np.where(better, Tp[rows, j], best_t)
        best_v = np.where(better, Vp[rows, j], best_v)
        a, b = np.maximum(j - 1, 0), np.minimum(j + 1, split)
        lo, hi = Tp[rows, a], Tp[rows, b]
        v_lo, v_hi = Vp[rows, a], Vp[rows, b]
    return best_t, best_v


def golden_section_on_segment(phi: Callable[[float], float], tol: float = 1e-10,
                              grid: int = GRID) -> float:
    """Minimise a scalar function of t in [0, 1].

    A uniform grid of ``grid`` cells is evaluated first and golden-section
    search refines the best cell, so the result is never worse than the
    grid minimum even when phi is not unimodal.
    """
    if tol <= 0:
        raise DomainError("tol must be > 0")
    G = np.linspace(0.0, 1.0, grid + 1)
    V = np.array([phi(float(t)) for t in G])
    i = int(np.argmin(V))
    best_t, best_v = float(G[i]), float(V[i])
    lo, hi = float(G[max(i - 1, 0)]), float(G[min(i + 1, grid)])
    c, d = hi - INV_PHI * (hi - lo), lo + INV_PHI * (hi - lo)
    fc, fd = phi(c), phi(d)
    while hi - lo > tol:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - INV_PHI * (hi - lo)
            fc = phi(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + INV_PHI * (hi - lo)
            fd = phi(d)
    for t, v in ((c, fc), (d, fd)):
        if v < best_v:
            best_t, best_v = t, v
    return best_t


def _seg(space: Space, A, B, T):
    """Points W(A_i, B_i; T_ij) flattened to (k*m, width)."""
    k, m = T.shape
    A = np.broadcast_to(A, (k, space.width))
    A = np.broadcast_to(A[:, None, :], (k, m, space.width))
    B = np.broadcast_to(B[:, None, :], (k, m, space.width))
    return space._combine(A.reshape(-1, space.width), B.reshape(-1, space.width),
                          T.reshape(-1, 1))


def push_to_boundary(space: Space, Y: ConvexSet, anchor, S, bits: int = 48):
    """Last point of Y on each segment [anchor, S_i].

    Membership is monotone along a segment leaving a convex set from an
    interior point, so each round tests ``split - 1`` interior parameters at
    once and shrinks the bracket by a factor ``split``.  Small batches use
    many probes per round, large ones plain bisection; either way the
    bracket ends below 2**-bits.
    """
    S = as_points(S)
    A = np.broadcast_to(anchor, S.shape)
    lo = np.ones(len(S))
    todo = ~Y.contains_batch(S)
    if np.any(todo):
        As, Ss = A[todo], S[todo]
        m = len(As)
        split = 1 << int(np.clip(np.log2(2048 / m), 3, 4))
        rounds = -(-bits // int(np.log2(split)))
        l, h = np.zeros(m), np.ones(m)
        frac = np.arange(1, split) / split
        Ar = np.repeat(As, split - 1, axis=0)
        Sr = np.repeat(Ss, split - 1, axis=0)
        for _ in range(rounds):
            T = l[:, None] + (h - l)[:, None] * frac
            ok = Y.contains_batch(space._combine(Ar, Sr, T.reshape(-1, 1))).reshape(m, -1)
            # index of the first probe outside Y (split - 1 if none)
            j = np.where(ok.all(axis=1), split - 1, np.argmin(ok, axis=1))
            Tp = np.hstack([l[:, None], T, h[:, None]])
            rows = np.arange(m)
            l, h = Tp[rows, j], Tp[rows, j + 1]
        lo[todo] = l
    return space._combine(A, S, lo[:, None])


# --------------------------------------------------------------- solver


@dataclass
class ProjectionConfig:
    starts: int = 4
    iters: int = 4  # passes without improvement before a restart stops
    tol: float = 1e-15
    batch: int = 16
    init: int = 32
    max_passes: int = 400
    cand_tol: float = 1e-14
    seed: int = 0
    golden_tol: float = 1e-10


@dataclass
class ProjectionResult:
    best: np.ndarray
    distance: float
    iterations: int
    candidates: np.ndarray
    converged: bool
    inconclusive: bool = False
    restarts: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    def to_record(self, space: Space) -> dict:
        return {
            "best": space.to_payload(self.best),
            "distance": self.distance,
            "iterations": self.iterations,
            "converged": self.converged,
            "inconclusive": self.inconclusive,
            "n_candidates": int(len(self.candidates)),
            "candidate_diameter": diameter(space, self.candidates),
        }


class _Pool:
    """Near-optimal points seen so far, thinned by farthest-point sampling."""

    def __init__(self, space, tol, cap=512):
        self.space, self.tol, self.cap = space, tol, cap
        self.P = np.zeros((0, space.width))
        self.V = np.zeros(0)
        self.best = np.inf

    def add(self, P, V):
        if not len(V):
            return
        self.best = min(self.best, float(np.min(V)))
        lim = self.best + self.tol * (1 + abs(self.best))
        keep = V <= lim
        self.P = np.vstack([self.P, P[keep]])
        self.V = np.concatenate([self.V, V[keep]])
        keep = self.V <= lim
        self.P, self.V = self.P[keep], self.V[keep]
        if len(self.V) > self.cap:
            idx = farthest_points(self.space, self.P, self.cap // 2)
            self.P, self.V = self.P[idx], self.V[idx]


def farthest_points(space: Space, P, k: int) -> np.ndarray:
    idx = [0]
    dmin = space.metric(P, P[0])
    for _ in range(1, min(k, len(P))):
        j = int(np.argmax(dmin))
        if dmin[j] <= 0:
            break
        idx.append(j)
        dmin = np.minimum(dmin, space.metric(P, P[j]))
    return np.array(idx)


def diameter(space: Space, P) -> float:
    P = as_points(P)
    if len(P) < 2:
        return 0.0
    if len(P) > 256:
        P = P[farthest_points(space, P, 256)]
    D = space.metric(P[:, None, :], P[None, :, :])
    return float(np.max(D))


def _descend(space, obj, Y, cfg, rng, pool=None, trace=None):
    """One restart of segment descent. Returns (point, value, passes, converged, short)."""
    init = Y.sample(rng, cfg.init)
    if len(init) == 0:
        return None, np.inf, 0, False, True
    vals = obj(init)
    if pool is not None:
        pool.add(init, vals)
    j = int(np.argmin(vals))
    y, best = init[j].copy(), float(vals[j])
    anchor = init[0]
    # ambient points for boundary curves cover twice the sampled extent of Y
    reach = 2 * max(float(np.max(space.metric(init, anchor))), 1e-6)
    s_star = y.copy()
    short = len(init) < cfg.init
    stall = passes = 0

    def evaluate(P):
        v = obj(P)
        if pool is not None:
            pool.add(P, v)
        return v


    while passes < cfg.max_passes and stall < cfg.iters:
        passes += 1
        thr = best - cfg.tol * (1 + abs(best))
        improved = False
        ends = Y.sample(rng, cfg.batch)
        if len(ends) < cfg.batch:
            short = True
        if len(ends):
            k = len(ends)
            t, v = _line_search(lambda T: evaluate(_seg(space, y, ends, T)).reshape(T.shape),
                                k, cfg.golden_tol)
            i = int(np.argmin(v))
            if v[i] < thr:
                y = space._combine(y, ends[i], t[i])
                best = float(v[i])
                s_star = y.copy()
                improved = True
        if Y.solid and not improved:
            S2 = space.sample_around(rng, anchor, cfg.batch, reach)
            k = len(S2)
            # half the curves start near s* rather than at it, so they cross
            # kinks of the boundary (box edges) away from the incumbent
            tau = 10.0 ** -rng.uniform(0, 6, k)
            tau[: k // 2] = 0.0
            S1 = space._combine(s_star[None, :], space.sample_around(rng, anchor, k, reach),
                                tau[:, None])

            def phi(T):
                S = _seg(space, S1, S2, T)
                return evaluate(push_to_boundary(space, Y, anchor, S)).reshape(T.shape)

            t, v = _line_search(phi, k, max(cfg.golden_tol, 1e-8))
            i = int(np.argmin(v))
            if v[i] < thr:
                s_new = space._combine(S1[i], S2[i], t[i])
                y = push_to_boundary(space, Y, anchor, s_new[None, :])[0]
                best = float(obj(y[None, :])[0])
                s_star = s_new
                improved = True
        if trace is not None:
            trace.append(best)
        stall = 0 if improved else stall + 1
    return y, best, passes, stall >= cfg.iters, short


def _ordered_map(fn, items, workers):
    """map() in threads when workers > 1; results keep input order."""
    items = list(items)
    w = min(worker_count(workers), len(items))
    if w <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(w) as ex:
        return list(ex.map(fn, items))


def minimize(space: Space, f, Y: ConvexSet | None = None,
             cfg: ProjectionConfig | None = None, workers: int | None = None) -> ProjectionResult:
    """Multistart segment descent of f over a convex set (default: whole space).

    Restarts use independent random streams and run in threads; their
    results are merged in restart order, so the outcome does not depend
    on the worker count.
    """
    cfg = cfg or ProjectionConfig()
    if cfg.starts < 1:
        raise DomainError("starts must be >= 1")
    Y = whole_space(space) if Y is None else Y
    obj = f.values if isinstance(f, WFn) else f

    def run(r):
        pool, trace = _Pool(space, cfg.cand_tol), []
        out = _descend(space, obj, Y, cfg, make_rng(cfg.seed, r), pool, trace)
        return out, pool, trace

    pool = _Pool(space, cfg.cand_tol)
    restarts, trace = [], []
    total = 0
    conv = True
    short = False
    for (y, v, passes, c, s), p, tr in _ordered_map(run, range(cfg.starts), workers):
        total += passes
        short |= s
        trace.extend(tr)
        pool.add(p.P, p.V)
        if y is None:
            continue
        conv &= c
        restarts.append((y, v))
    if not restarts:
        raise DomainError("sampler produced no members of Y")
    j = int(np.argmin([v for _, v in restarts]))
    best, val = restarts[j]
    return ProjectionResult(best, val, total, pool.P, conv, short, restarts, trace)


def project(space: Space, Y: ConvexSet, x, cfg: ProjectionConfig | None = None,
            workers: int | None = None) -> ProjectionResult:
    """Nearest point of Y to x.

    ``distance`` is d(x, best) for a member ``best`` of Y, hence an upper
    bound on d_Y(x).
    """
    cfg = cfg or ProjectionConfig()
    x = as_points(x)
    if Y.contains(x):
        return ProjectionResult(x.copy(), 0.0, 0, x[None, :].copy(), True, restarts=[(x.copy(), 0.0)])
    res = minimize(space, lambda P: space.metric(P, x), Y, cfg, workers)
    res.distance = float(space.metric(x, res.best))
    return res


def distance_to_set(space, Y, x, cfg=None) -> float:
    return project(space, Y, x, cfg).distance


# ------------------------------------------------------------ Chebyshev


@dataclass
class ChebyshevEntry:
    x: np.ndarray
    distance: float
    diameter: float
    unique: bool
    n_candidates: int


def chebyshev_diagnostic(space: Space, Y: ConvexSet, xs: Sequence, cfg: ProjectionConfig | None = None,
                         uniqueness_tol: float = 1e-6, workers: int | None = None
                         ) -> list[ChebyshevEntry]:
    """Cluster near-optimal projection candidates over many restarts.

    The cluster holds every restart result and every evaluated point whose
    distance is within ``cfg.cand_tol`` (relative) of the best one; its
    metric diameter estimates the size of P_Y(x).  Query points are
    handled in threads.
    """
    cfg = cfg or ProjectionConfig(starts=16)
    if len(xs) == 0:
        raise DomainError("no query points")

    def one(x):
        x = as_points(x)
        res = project(space, Y, x, cfg, workers=1)
        lim = res.distance + cfg.cand_tol * (1 + res.distance)
        pts = [p for p, v in res.restarts if v <= lim]
        P = np.vstack([res.candidates] + [p[None, :] for p in pts]) if pts else res.candidates
        diam = diameter(space, P)
        return ChebyshevEntry(x, res.distance, diam, diam <= uniqueness_tol, len(P))

    return _ordered_map(one, xs, workers)


def proximality_probe(space: Space, Y: ConvexSet, x, budget: int = 4, tol: float = 1e-9,
                      rounds: int = 4) -> "ProximalityReport":
    """Run the solver with doubling budgets and check the distances settle."""
    if budget < 1:
        raise DomainError("budget must be >= 1")
    x = as_points(x)
    dists, best = [], None
    for r in range(rounds):
        cfg = ProjectionConfig(starts=1, batch=budget * 2 ** r, seed=r)
        res = project(space, Y, x, cfg)
        dists.append(res.distance)
        best = res.best
        if res.distance == 0.0:
            break
    stable = len(dists) == 1 or abs(dists[-1] - dists[-2]) <= tol * (1 + dists[-1])
    edge = False
    if Y.edge_distance is not None and dists[-1] > 0:
        edge = Y.edge_distance(best) <= 1e-6
    return ProximalityReport(stable, dists, best, edge)


@dataclass
class ProximalityReport:
    stable: bool
    distances: list
    best: np.ndarray
    at_band_edge: bool

    def __bool__(self):
        return self.stable


# ------------------------------------------------------------ fixed points


@dataclass
class MapUnderTest:
    space: Space
    apply_batch: Callable[[np.ndarray], np.ndarray]
    label: str = "T"

    def __call__(self, x):
        x = as_points(x)
        if x.ndim == 1:
            return self.apply_batch(x[None, :])[0]
        return self.apply_batch(x)


def affine_map(space: Space, A, b, label="affine") -> MapUnderTest:
    A, b = np.atleast_2d(as_points(A)), as_points(b)
    return MapUnderTest(space, lambda X: X @ A.T + b, label)


def scaling_map(space: Space, center, factor: float) -> MapUnderTest:
    """x -> W(c, x; factor) for factor in [0, 1]; a linear stretch otherwise."""
    c = as_points(center)
    if 0.0 <= factor <= 1.0:
        return MapUnderTest(space, lambda X: space._combine(np.broadcast_to(c, X.shape), X, factor),
                            f"scale({factor:g})")
    return MapUnderTest(space, lambda X: c + factor * (X - c), f"scale({factor:g})")


def rotation_map(space: Space, angle: float, center=None) -> MapUnderTest:
    if space.width != 2:
        raise DomainError("rotation needs a planar space")
    c = np.zeros(2) if center is None else as_points(center)
    R = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    return MapUnderTest(space, lambda X: c + (X - c) @ R.T, f"rot({angle:g})")


@dataclass
class FixedPointResult:
    point: np.ndarray
    residual: float
    iterations: int
    trace: list
    converged: bool
    diverged: bool = False

    @property
    def monotone(self) -> bool:
        return all(b <= a * (1 + EPS_EQ) + EPS_EQ for a, b in zip(self.trace, self.trace[1:]))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "residual"])
            for i, r in enumerate(self.trace):
                w.writerow([i, repr(float(r))])


def _schedule(schedule):
    if schedule is None:
        return lambda n: 0.5
    if callable(schedule):
        return schedule
    if isinstance(schedule, (int, float)):
        s = float(schedule)
        return lambda n: s
    seq = list(schedule)
    return lambda n: seq[min(n, len(seq) - 1)]


def mann_iterate(space: Space, T: MapUnderTest, x0, schedule=0.5, fp_tol: float = 1e-6,
                 max_iter: int = 100_000) -> FixedPointResult:
    """x_{n+1} = W(x_n, T x_n; t_n) until d(x_n, T x_n) <= fp_tol."""
    t_of = _schedule(schedule)
    x = as_points(x0).copy()
    tx = T(x)
    r0 = r = float(space.metric(x, tx))
    trace = [r]
    n = 0
    while r > fp_tol and n < max_iter:
        t = float(t_of(n))
        if not 0.0 < t < 1.0:
            raise DomainError(f"schedule value {t} outside (0, 1)")
        x = space._combine(x, tx, t)
        tx = T(x)
        r = float(space.metric(x, tx))
        trace.append(r)
        n += 1
        if not np.isfinite(r) or r > 1e6 * max(r0, 1e-300):
            return FixedPointResult(x, r, n, trace, False, diverged=True)
    return FixedPointResult(x, r, n, trace, r <= fp_tol)


def check_nonexpansive(space: Space, T: MapUnderTest, n: int = 10_000, seed=0,
                       domain: ConvexSet | None = None, workers=None) -> Verdict:
    """d(Tx, Ty) <= d(x, y) on sampled pairs."""
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = make_rng(seed, 40)
    draw = domain.sample if domain is not None else space.sample
    x, y = draw(rng, n), draw(rng, n)

    def viol(s):
        return rel_excess(space.metric(T(x[s]), T(y[s])), space.metric(x[s], y[s]))

    v = chunked(viol, len(x), workers)
    return reduce_violations("nonexpansive", v, EPS_EQ, seed,
                             lambda i: {"x": x[i], "y": y[i],
                                        "d_Tx_Ty": float(space.metric(T(x[i]), T(y[i]))),
                                        "d_xy": float(space.metric(x[i], y[i]))})


def residual_function(space: Space, T: MapUnderTest, surrogate=None) -> WFn:
    """x -> d(x, T x), optionally passed through an increasing convex map.

    ``surrogate="square"`` keeps the minimiser set and turns the cone-shaped
    residual of an affine contraction into a strictly convex function.
    """
    f = WFn(space, lambda X: space.metric(X, T(X)), f"d(.,{T.label}.)")
    if surrogate is not None:
        f = compose_increasing_convex(f, surrogate)
    return f


@dataclass
class ResidualReport:
    certified: bool
    minimizer: np.ndarray
    residual: float
    is_fixed_point: bool
    inconsistent: bool
    verdict: Verdict
    result: ProjectionResult


def residual_fixed_point(space: Space, T: MapUnderTest, surrogate="square", fp_tol: float = 1e-6,
                         n: int = 1000, seed=0, domain: ConvexSet | None = None,
                         cfg: ProjectionConfig | None = None, separation: float = 0.1) -> ResidualReport:
    """Certify strict convexity of the residual, minimise it, read off a fixed point.

    If the residual is certified strictly W-convex and the minimiser still
    has residual above ``fp_tol``, the report is flagged inconsistent.
    """
    from .verify import verify_strict_wconvex

    f = residual_function(space, T, surrogate)
    verdict = verify_strict_wconvex(space, f, n, seed, separation=separation, domain=domain)
    res = minimize(space, f, domain, cfg or ProjectionConfig(starts=4, seed=seed))
    xi = res.best
    r = float(space.metric(xi, T(xi)))
    fixed = r <= fp_tol
    return ResidualReport(verdict.passed, xi, r, fixed, verdict.passed and res.converged and not fixed,
                          verdict, res)


def fixed_point_scenario(space: Space, T: MapUnderTest, Y: ConvexSet, x0, fp_tol: float = 1e-6,
                         max_iter: int = 100_000, seed=0) -> dict:
    """Continuous self-map of a compact convex set: iterate and minimise the residual.

    Existence of a fixed point is not proved here; the scenario reports
    what the two numerical routes find.
    """
    nonexp = check_nonexpansive(space, T, 2000, seed, domain=Y)
    it = mann_iterate(space, T, x0, 0.5, fp_tol, max_iter)
    f = residual_function(space, T)
    res = minimize(space, f, Y, ProjectionConfig(starts=8, seed=seed))
    return {
        "nonexpansive": nonexp.status,
        "mann_point": space.to_payload(it.point),
        "mann_residual": it.residual,
        "mann_converged": it.converged,
        "min_point": space.to_payload(res.best),
        "min_residual": float(res.distance),
        "self_map_ok": bool(np.all(Y.contains_batch(T(Y.sample(make_rng(seed, 41), 500))))),
    }
