"""Acceptance criteria 1-9 at their stated tolerances.

Each test records one pass/fail line.  The lines are printed as the test
runs (visible with ``-s``) and again in an "acceptance criteria" section
of the terminal summary.
"""

import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from wconvex.catalog import function_catalogue, map_catalogue, standard_spaces
from wconvex.core import (
    DELTA_STRICT, EPS_EQ, check_convex_structure, check_metric_axioms, check_segment_identities,
    make_rng,
)
from wconvex.functions import (
    WFn, ball_set, box_set, distance_to_point, lebesgue_measure, linear_functional, probe, radius,
    segment_set,
)
from wconvex.optimize import ProjectionConfig, chebyshev_diagnostic, mann_iterate, project, residual_fixed_point
from wconvex.spaces import euclidean_space
from wconvex.verify import (
    bounded_above_check, dyadic_convexity_check, epigraph_convexity_check, local_lipschitz_from_bound,
    midpoint_convexity_check, segment_lipschitz_check, segment_points, strict_space_check, sublevel_convexity_check,
    verify_strict_wconvex, verify_wconvex,
)

SPACES = standard_spaces()
FAMILIES = ["l2", "l1", "linf", "ball", "interval", "product"]
CATALOGUE = function_catalogue(SPACES)
SEEDS = range(5)
N = 10_000


def record(k: int, ok: bool, detail: str) -> None:
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def axiom_suite(workers):
    reports = []
    for name in FAMILIES:
        sp = SPACES[name]
        for seed in SEEDS:
            for check in (check_metric_axioms, check_convex_structure, check_segment_identities):
                reports.append((name, check(sp, N, seed, workers=workers).to_record(sp)))
    return reports


def replay_chord(space, f, w):
    z = space.combine(w["x"], w["y"], w["t"])
    return float(f(z) - ((1 - w["t"]) * f(w["x"]) + w["t"] * f(w["y"])))


# ------------------------------------------------------------------- 1


def test_criterion_1_axioms():
    t0 = time.perf_counter()
    reports = axiom_suite(None)
    elapsed = time.perf_counter() - t0
    failed = [(n, r["property"], r["seed"]) for n, r in reports if r["status"] != "passed"]
    worst = max(r["worst_violation"] for _, r in reports)
    ok = not failed and worst <= EPS_EQ and elapsed <= 30
    record(1, ok, f"{len(reports)} checks on {len(FAMILIES)} spaces, worst {worst:.2e}, "
                  f"{elapsed:.1f}s (limit 30s)")
    assert not failed, failed
    assert worst <= EPS_EQ and elapsed <= 30


# ------------------------------------------------------------------- 2


def test_criterion_2_function_algebra():
    convex = [e for e in CATALOGUE if e.convex]
    strict = [e for e in CATALOGUE if e.strict]
    planted = [e for e in CATALOGUE if not e.convex]
    bad = [e.name for e in convex if not verify_wconvex(e.space, e.f, N, seed=0).passed]
    bad += [e.name for e in strict if not verify_strict_wconvex(e.space, e.f, N, seed=0).passed]
    for e in planted:
        v = verify_wconvex(e.space, e.f, N, seed=0)
        if not (v.failed and replay_chord(e.space, e.f, v.witness) > 0):
            bad.append(e.name)
    ok = len(convex) >= 12 and len(strict) == 4 and len(planted) == 3 and not bad
    record(2, ok, f"{len(convex)} convex, {len(strict)} strict, {len(planted)} planted; "
                  f"mismatches {bad or 'none'}")
    assert ok


# ------------------------------------------------------------------- 3


def _flat_fn(name, sp, x, y):
    """A function affine along W that takes equal values at x and y."""
    if name in ("l2", "l1", "linf"):
        d = y - x
        return linear_functional(sp, [-d[1], d[0]], 0.3)
    if name == "ball":
        return radius(sp)
    if name == "interval":
        return lebesgue_measure(sp)
    return WFn(sp, lambda X: X[:, 3], "radius of the ball part")


def _equal_value_pair(name, sp, rng):
    x, y = sp.sample(rng, 2)
    if name == "ball":
        y[3] = x[3]
    elif name == "interval":
        y[1] = y[0] + (x[1] - x[0])
    elif name == "product":
        y[3] = x[3]
    return x, y


def test_criterion_3_segment_lipschitz():
    failures, worst_flat, tight = [], 0.0, 1.0
    for name in FAMILIES:
        sp = SPACES[name]
        rng = make_rng(3, 100 + FAMILIES.index(name))
        for _ in range(50):
            x, y = sp.sample(rng, 2)
            rep = segment_lipschitz_check(sp, distance_to_point(sp, x), x, y, n=200)
            if not rep.passed:
                failures.append(name)
            if name in ("l2", "l1", "linf"):
                tight = min(tight, rep.max_ratio / rep.constant)
            a, b = _equal_value_pair(name, sp, rng)
            f = _flat_fn(name, sp, a, b)
            assert abs(f(a) - f(b)) <= 1e-12
            fz = f.values(segment_points(sp, a, b, 200))
            worst_flat = max(worst_flat, float(fz.max() - fz.min()))
    ok = not failures and tight >= 1 - 1e-6 and worst_flat <= 1e-9
    record(3, ok, f"300 segments, failures {len(failures)}, tightness {tight:.9f}, "
                  f"equal-value max |df| {worst_flat:.1e}")
    assert ok


# ------------------------------------------------------------------- 4


def test_criterion_4_midpoint_dyadic_consistency():
    inconsistent, both_passed = [], 0
    for e in CATALOGUE:
        for seed in (0, 1):
            mid = midpoint_convexity_check(e.space, e.f, N, seed)
            rng = make_rng(seed, 200)
            xs, ys = e.space.sample(rng, 8), e.space.sample(rng, 8)
            dy = all(dyadic_convexity_check(e.space, e.f, x, y, levels=10).passed for x, y in zip(xs, ys))
            if mid.passed and dy:
                both_passed += 1
                if not verify_wconvex(e.space, e.f, N, seed).passed:
                    inconsistent.append((e.name, seed))
    record(4, not inconsistent, f"{both_passed} midpoint+dyadic passes, "
                                f"{len(inconsistent)} inconsistencies")
    assert both_passed >= 2 * 12
    assert not inconsistent


# ------------------------------------------------------------------- 5


def test_criterion_5_local_lipschitz():
    l2 = SPACES["l2"]
    f = distance_to_point(l2, [0.0, 0.0], "square")
    rep = local_lipschitz_from_bound(l2, f, [0.0, 0.0], r=1.0, rho=0.5, M=1.0, n=N)
    up = bounded_above_check(l2, f, [0.0, 0.0], 1.0, c=1.0, n=N)
    ok = rep.passed and rep.constant == 4.0 and rep.pairs_checked >= N and up.passed
    record(5, ok, f"{rep.pairs_checked} pairs, max ratio {rep.max_ratio:.3f} <= {rep.constant}, "
                  f"bounded-above {up.status}")
    assert ok


# ------------------------------------------------------------------- 6


def test_criterion_6_epigraph_and_sublevels():
    disagree, sub_bad = [], []
    for e in CATALOGUE:
        w = verify_wconvex(e.space, e.f, N, seed=0)
        ep = epigraph_convexity_check(e.space, e.f, N, seed=0)
        if w.passed != ep.passed:
            disagree.append(e.name)
        if e.convex or e.quasiconvex:
            vals = probe(e.f, 256, seed=0)
            for h in np.quantile(vals[np.isfinite(vals)], [0.25, 0.5, 0.75]):
                if not sublevel_convexity_check(e.space, e.f, float(h), N, seed=0).passed:
                    sub_bad.append(e.name)
    step = next(e for e in CATALOGUE if e.name == "step_line")
    one_way = (sublevel_convexity_check(step.space, step.f, 0.5, N).passed
               and verify_wconvex(step.space, step.f, N).failed)
    ok = not disagree and not sub_bad and one_way
    record(6, ok, f"epigraph disagreements {disagree or 'none'}, sublevel failures "
                  f"{sub_bad or 'none'}, step counterexample one-directional {one_way}")
    assert ok


# ------------------------------------------------------------------- 7


def _closed_form_query(k, rng):
    E = euclidean_space(2 + k % 2, 2)
    n = E.n
    x = rng.uniform(-3, 3, n)
    kind = k % 3
    if kind == 0:
        a, b = rng.uniform(-2, 2, (2, n))
        s = np.clip(np.dot(x - a, b - a) / np.dot(b - a, b - a), 0, 1)
        return E, segment_set(E, a, b), x, a + s * (b - a)
    if kind == 1:
        c, r = rng.uniform(-1, 1, n), rng.uniform(0.3, 1.5)
        return E, ball_set(E, c, r), x, c + (x - c) * min(1.0, r / np.linalg.norm(x - c))
    lo = rng.uniform(-1, 0, n)
    hi = lo + rng.uniform(0.2, 1.5, n)
    return E, box_set(E, lo, hi), x, np.clip(x, lo, hi)


def test_criterion_7_projection():
    t0 = time.perf_counter()
    rng = make_rng(7, 300)
    worst_d = worst_p = 0.0
    for k in range(100):
        E, Y, x, p = _closed_form_query(k, rng)
        res = project(E, Y, x, ProjectionConfig(starts=1, seed=k))
        worst_d = max(worst_d, abs(res.distance - np.linalg.norm(x - p)))
        worst_p = max(worst_p, float(np.linalg.norm(res.best - p)))
    l2, l1, linf = SPACES["l2"], SPACES["l1"], SPACES["linf"]
    uniq = chebyshev_diagnostic(l2, ball_set(l2, [0, 0], 1.0), [[3.0, 4.0]], ProjectionConfig(starts=4))[0]
    wide = chebyshev_diagnostic(linf, segment_set(linf, [0, 0], [2, 0]), [[1.0, 1.0]])[0]
    s2 = strict_space_check(l2, N)
    s1 = strict_space_check(l1, N, planted=[([0, 0], [1, 0], [0, 1], 0.5)])
    sinf = strict_space_check(linf, N, planted=[([0, 0], [1, 0], [1, 1], 0.5)])
    planted_ok = all(v.failed and v.details["planted_violations"][0] >= DELTA_STRICT for v in (s1, sinf))
    replay_ok = all(v.witness["d_z_x0"] >= v.witness["rho"] * (1 - DELTA_STRICT) for v in (s1, sinf))
    elapsed = time.perf_counter() - t0
    ok = (worst_d <= 1e-6 and worst_p <= 1e-6 and uniq.diameter <= 1e-6 and wide.diameter >= 0.5
          and s2.passed and planted_ok and replay_ok and elapsed <= 60)
    record(7, ok, f"100 queries, distance err {worst_d:.1e}, point err {worst_p:.1e}; "
                  f"l2 diameter {uniq.diameter:.1e}, linf diameter {wide.diameter:.2f}; "
                  f"strict l2 {s2.status}, l1 {s1.status}, linf {sinf.status}; {elapsed:.1f}s (limit 60s)")
    assert ok


# ------------------------------------------------------------------- 8


def test_criterion_8_fixed_points():
    names = ["contraction", "reflection", "rotation", "shifted_contraction"]
    maps = {e.name: e for e in map_catalogue(SPACES)}
    lines, ok = [], True
    for name in names:
        e = maps[name]
        it = mann_iterate(e.space, e.T, e.x0, 0.5, 1e-6, 100_000)
        rep = residual_fixed_point(e.space, e.T, n=2000)
        good = it.converged and it.residual <= 1e-6 and rep.certified and rep.residual <= 1e-5
        ok &= good
        lines.append(f"{name} {it.iterations} it / residual {rep.residual:.0e}")
    record(8, ok, "; ".join(lines))
    assert ok


# ------------------------------------------------------------------- 9


def test_criterion_9_determinism():
    one, four = axiom_suite(1), axiom_suite(4)
    same = one == four
    record(9, same, f"{len(one)} reports identical on 1 vs 4 workers: {same}")
    assert same
