"""Scenario runner and command-line entry point.

A scenario is a JSON document naming spaces, points, sets, functions
(expression trees), maps and an ordered task list.  ``run`` executes the
tasks and writes a JSON report whose ``timing`` block is the only part that
varies between identical runs.

Exit codes: 0 when every task passed or was inconclusive, 1 when any task
failed, 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    DomainError, ExtensionUnsupported, PointTypeError, ResourceError, Space, _jsonable,
    check_convex_structure, check_extension, check_idempotence, check_metric_axioms,
    check_segment_identities, worker_count,
)
from .functions import (
    SCALAR_MAPS, ball_set, ball_size, box_set, compose_increasing_convex, conical, distance_map,
    distance_to_point, indicator, intersection, lebesgue_measure, linear_functional, max_of,
    negate, open_ball_surrogate, radius, restrict, scale, segment_set, sublevel_set, sum_of,
    sup_family, whole_space,
)
from .optimize import (
    MapUnderTest, ProjectionConfig, affine_map, chebyshev_diagnostic, check_nonexpansive,
    fixed_point_scenario, mann_iterate, project, residual_fixed_point, residual_function,
    rotation_map, scaling_map,
)
from .spaces import SPACE_KINDS, space_from_spec
from .verify import (
    bounded_above_check, dyadic_convexity_check, epigraph_convexity_check,
    local_lipschitz_from_bound, midpoint_convexity_check, reversal_bound_check,
    segment_lipschitz_check, set_convexity_check, sphere_wconvex_check, strict_space_check,
    sublevel_convexity_check, verify_strict_wconvex, verify_wconvex,
)

SCHEMA_VERSION = 1
DEFAULT_N = 10_000

FUNCTION_NODES = {
    "dist": {"to": "point", "g": "optional scalar map"},
    "compose": {"of": "node", "g": "scalar map"},
    "scale": {"of": "node", "alpha": "real >= 0"},
    "sum": {"of": "[node, ...]"},
    "conical": {"of": "[node, ...]", "weights": "[real >= 0, ...]"},
    "max": {"of": "[node, ...]"},
    "sup": {"of": "[node, ...]"},
    "restrict": {"of": "node", "set": "set name"},
    "lebesgue": {},
    "ball_size": {},
    "radius": {},
    "linear": {"a": "[real, ...]", "c": "optional real"},
    "neg": {"of": "node"},
    "indicator": {"set": "set name"},
    "distance_map": {"set": "set name", "budget": "optional int >= 1"},
    "residual": {"map": "map name", "surrogate": "optional scalar map"},
    "ref": {"name": "function name"},
}

SET_KINDS = {
    "segment": {"a": "point", "b": "point"},
    "ball": {"center": "point", "radius": "real > 0"},
    "box": {"lo": "[real, ...]", "hi": "[real, ...]"},
    "whole": {},
    "intersection": {"of": "[set name, ...]"},
    "sublevel": {"function": "function name", "h": "real"},
    "open_ball": {"center": "point", "radius": "real > 0", "band": "real > 0"},
}

MAP_KINDS = {
    "scale": {"center": "point", "factor": "real"},
    "rotation": {"angle": "radians", "center": "optional point"},
    "affine": {"A": "matrix", "b": "vector"},
}

SPACE_CHECKS = {
    "metric_axioms": lambda sp, a, n, seed, w: check_metric_axioms(sp, n, seed, w),
    "convex_structure": lambda sp, a, n, seed, w: check_convex_structure(sp, n, seed, w),
    "segment_identities": lambda sp, a, n, seed, w: check_segment_identities(sp, n, seed, w),
    "idempotence": lambda sp, a, n, seed, w: check_idempotence(sp, n, seed),
    "extension": lambda sp, a, n, seed, w: check_extension(sp, n, seed),
    "reversal_bound": lambda sp, a, n, seed, w: reversal_bound_check(sp, n, seed),
}

FUNCTION_CHECKS = ("wconvex", "strict_wconvex", "midpoint", "dyadic", "epigraph", "sublevel",
                   "segment_lipschitz", "local_lipschitz", "bounded_above", "sphere_wconvex")
OTHER_CHECKS = ("strict_space", "set_convexity", "nonexpansive")
CHECKS = tuple(SPACE_CHECKS) + FUNCTION_CHECKS + OTHER_CHECKS

TASK_TYPES = {
    "verify": {"check": f"one of {', '.join(CHECKS)}", "space": "space name",
               "function | set | map": "name, as the check needs", "n": "optional",
               "seed": "optional", "expect": "optional 'pass' | 'fail'"},
    "project": {"space": "space name", "set": "set name", "x": "point",
                "expect_distance": "optional real", "expect_point": "optional point",
                "tol": "optional, default 1e-6", "starts": "optional"},
    "chebyshev": {"space": "space name", "set": "set name", "points": "[point, ...]",
                  "expect": "optional 'unique' | 'nonunique'", "starts": "optional"},
    "fixpoint": {"space": "space name", "map": "map name", "x0": "point",
                 "method": "'mann' | 'residual' | 'scenario'", "schedule": "optional t",
                 "fp_tol": "optional", "max_iter": "optional", "trace": "optional CSV path",
                 "expect": "optional 'converge' | 'diverge'"},
}


class ConfigError(ValueError):
    """Invalid scenario; the message names the offending field."""


def _kinds(d) -> str:
    return ", ".join(sorted(d))


# ------------------------------------------------------------- loading


def bundled_scenarios() -> dict[str, Path]:
    root = resources.files("wconvex") / "scenarios"
    return {p.name[:-5]: Path(str(p)) for p in root.iterdir() if p.name.endswith(".json")}


def load_config(path_or_name) -> dict:
    """Read a scenario file, or a bundled scenario by name."""
    path = Path(path_or_name)
    if not path.exists():
        bundled = bundled_scenarios()
        if str(path_or_name) in bundled:
            path = bundled[str(path_or_name)]
        else:
            raise ConfigError(f"{path_or_name}: no such file or bundled scenario "
                              f"(bundled: {_kinds(bundled)})")
    text = path.read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    cfg.setdefault("name", path.stem)
    return cfg


class Scenario:
    """Resolved objects of a scenario plus its task list."""

    def __init__(self, name="scenario", seed=0, spaces=None, points=None, sets=None,
                 functions=None, maps=None, tasks=(), n=DEFAULT_N, starts=4, config=None):
        self.name, self.seed, self.n, self.starts = name, seed, n, starts
        self.spaces: dict[str, Space] = dict(spaces or {})
        self.points = dict(points or {})
        self.sets = dict(sets or {})
        self.functions = dict(functions or {})
        self.maps = dict(maps or {})
        self.tasks = list(tasks)
        self.config = config if config is not None else {}

    # lookups with field-named errors
    def _get(self, table, kind, name, where):
        if not isinstance(name, str) or name not in table:
            raise ConfigError(f"{where}: unknown {kind} {name!r}; defined: {_kinds(table) or 'none'}")
        return table[name]

    def space(self, name, where):
        return self._get(self.spaces, "space", name, where)

    def set(self, name, where):
        return self._get(self.sets, "set", name, where)

    def function(self, name, where):
        return self._get(self.functions, "function", name, where)

    def map(self, name, where):
        return self._get(self.maps, "map", name, where)

    def point(self, space, value, where):
        if isinstance(value, str):
            value = self._get(self.points, "point", value, where)
            if value.shape != (space.width,):
                raise ConfigError(f"{where}: point has width {value.size}, space needs {space.width}")
            return value
        try:
            return space.point(value)
        except (DomainError, PointTypeError, TypeError, ValueError, KeyError) as e:
            raise ConfigError(f"{where}: bad point {value!r} for {space.name}: {e}") from None


def _need(d, key, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    if key not in d:
        raise ConfigError(f"{where}: missing field {key!r}")
    return d[key]


def _positive_int(v, where):
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ConfigError(f"{where}: must be a positive integer, got {v!r}")
    return v


def _build_function(sc: Scenario, space: Space, node, where):
    if not isinstance(node, dict) or "op" not in node:
        raise ConfigError(f"{where}: expression node needs an 'op' (valid: {_kinds(FUNCTION_NODES)})")
    op = node["op"]
    if op not in FUNCTION_NODES:
        raise ConfigError(f"{where}.op: unknown node kind {op!r}; valid kinds: {_kinds(FUNCTION_NODES)}")

    def sub(key):
        return _build_function(sc, space, _need(node, key, where), f"{where}.{key}")

    def subs():
        items = _need(node, "of", where)
        if not isinstance(items, list) or not items:
            raise ConfigError(f"{where}.of: expected a nonempty list of nodes")
        return [_build_function(sc, space, it, f"{where}.of[{i}]") for i, it in enumerate(items)]

    try:
        if op == "dist":
            return distance_to_point(space, sc.point(space, _need(node, "to", where), f"{where}.to"),
                                     node.get("g", "identity"))
        if op == "compose":
            return compose_increasing_convex(sub("of"), _need(node, "g", where))
        if op == "scale":
            return scale(sub("of"), float(_need(node, "alpha", where)))
        if op == "sum":
            return sum_of(subs())
        if op == "conical":
            return conical(subs(), _need(node, "weights", where))
        if op == "max":
            return max_of(subs())
        if op == "sup":
            return sup_family(subs())
        if op == "restrict":
            return restrict(sub("of"), sc.set(_need(node, "set", where), f"{where}.set"))
        if op == "lebesgue":
            _require_kind(space, "interval", where)
            return lebesgue_measure(space)
        if op in ("ball_size", "radius"):
            _require_kind(space, "ball", where)
            return ball_size(space) if op == "ball_size" else radius(space)
        if op == "linear":
            a = np.asarray(_need(node, "a", where), dtype=float)
            if a.shape != (space.width,):
                raise ConfigError(f"{where}.a: expected {space.width} coefficients")
            return linear_functional(space, a, float(node.get("c", 0.0)))
        if op == "neg":
            return negate(sub("of"))
        if op == "indicator":
            return indicator(sc.set(_need(node, "set", where), f"{where}.set"))
        if op == "distance_map":
            m = _positive_int(node.get("budget", 16), f"{where}.budget")
            return distance_map(space, sc.set(_need(node, "set", where), f"{where}.set"), m, sc.seed)
        if op == "residual":
            return residual_function(space, sc.map(_need(node, "map", where), f"{where}.map"),
                                     node.get("surrogate"))
        f = sc.function(_need(node, "name", where), f"{where}.name")
        if f.space is not space:
            raise ConfigError(f"{where}: function {node['name']!r} lives on another space")
        return f
    except (DomainError, TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"{where}: {e}") from None


def _require_kind(space, kind, where):
    if space.describe()["kind"] != kind:
        raise ConfigError(f"{where}: node needs a {kind} space, got {space.describe()['kind']}")


def _build_set(sc: Scenario, spec, where):
    space = sc.space(_need(spec, "space", where), f"{where}.space")
    kind = _need(spec, "kind", where)
    if kind not in SET_KINDS:
        raise ConfigError(f"{where}.kind: unknown set kind {kind!r}; valid kinds: {_kinds(SET_KINDS)}")

    def pt(key):
        return sc.point(space, _need(spec, key, where), f"{where}.{key}")

    try:
        if kind == "segment":
            return segment_set(space, pt("a"), pt("b"))
        if kind == "ball":
            return ball_set(space, pt("center"), float(_need(spec, "radius", where)))
        if kind == "box":
            return box_set(space, _need(spec, "lo", where), _need(spec, "hi", where))
        if kind == "whole":
            return whole_space(space)
        if kind == "intersection":
            names = _need(spec, "of", where)
            if not isinstance(names, list) or not names:
                raise ConfigError(f"{where}.of: expected a nonempty list of set names")
            return intersection(*[sc.set(s, f"{where}.of[{i}]") for i, s in enumerate(names)])
        if kind == "sublevel":
            f = sc.function(_need(spec, "function", where), f"{where}.function")
            return sublevel_set(f, float(_need(spec, "h", where)))
        return open_ball_surrogate(space, pt("center"), float(_need(spec, "radius", where)),
                                   float(_need(spec, "band", where)))
    except (DomainError, TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"{where}: {e}") from None


def _build_map(sc: Scenario, spec, where) -> MapUnderTest:
    space = sc.space(_need(spec, "space", where), f"{where}.space")
    kind = _need(spec, "kind", where)
    if kind not in MAP_KINDS:
        raise ConfigError(f"{where}.kind: unknown map kind {kind!r}; valid kinds: {_kinds(MAP_KINDS)}")
    try:
        if kind == "scale":
            return scaling_map(space, sc.point(space, _need(spec, "center", where), f"{where}.center"),
                               float(_need(spec, "factor", where)))
        if kind == "rotation":
            c = spec.get("center")
            c = None if c is None else sc.point(space, c, f"{where}.center")
            return rotation_map(space, float(_need(spec, "angle", where)), c)
        A = np.atleast_2d(np.asarray(_need(spec, "A", where), dtype=float))
        b = np.asarray(_need(spec, "b", where), dtype=float)
        if A.shape != (space.width, space.width) or b.shape != (space.width,):
            raise ConfigError(f"{where}: A must be {space.width}x{space.width} and b of length {space.width}")
        return affine_map(space, A, b, spec.get("label", "affine"))
    except (DomainError, TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"{where}: {e}") from None


def _section(cfg, key):
    v = cfg.get(key, {})
    if not isinstance(v, dict):
        raise ConfigError(f"{key}: expected an object mapping names to specs")
    return v


def build_scenario(cfg: dict) -> Scenario:
    """Validate a parsed config and resolve every name; raises ConfigError."""
    if not isinstance(cfg, dict):
        raise ConfigError("top level must be an object")
    version = cfg.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    known = {"schema_version", "name", "seed", "budgets", "output", "spaces", "points", "sets",
             "functions", "maps", "tasks", "description"}
    extra = sorted(set(cfg) - known)
    if extra:
        raise ConfigError(f"{extra[0]}: unknown top-level field; valid fields: {_kinds(known)}")
    seed = cfg.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed: must be a nonnegative integer, got {seed!r}")
    budgets = cfg.get("budgets", {})
    if not isinstance(budgets, dict):
        raise ConfigError("budgets: expected an object")
    n = _positive_int(budgets.get("n", DEFAULT_N), "budgets.n")
    starts = _positive_int(budgets.get("starts", 4), "budgets.starts")
    sc = Scenario(str(cfg.get("name", "scenario")), seed, n=n, starts=starts, config=cfg)

    for name, spec in _section(cfg, "spaces").items():
        where = f"spaces.{name}"
        if not isinstance(spec, dict) or spec.get("kind") not in SPACE_KINDS:
            kind = spec.get("kind") if isinstance(spec, dict) else None
            raise ConfigError(f"{where}.kind: unknown space kind {kind!r}; valid kinds: {_kinds(SPACE_KINDS)}")
        try:
            sc.spaces[name] = space_from_spec(spec)
        except (DomainError, KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"{where}: {e}") from None
    if not sc.spaces:
        raise ConfigError("spaces: at least one space is required")

    for name, spec in _section(cfg, "points").items():
        where = f"points.{name}"
        space = sc.space(_need(spec, "space", where), f"{where}.space")
        sc.points[name] = sc.point(space, _need(spec, "value", where), f"{where}.value")

    # sets, functions and maps may refer to each other; resolve in passes
    pending = [("sets", k, v) for k, v in _section(cfg, "sets").items()]
    pending += [("functions", k, v) for k, v in _section(cfg, "functions").items()]
    pending += [("maps", k, v) for k, v in _section(cfg, "maps").items()]
    while pending:
        left, last_err = [], None
        for section, name, spec in pending:
            where = f"{section}.{name}"
            try:
                if section == "sets":
                    sc.sets[name] = _build_set(sc, spec, where)
                elif section == "maps":
                    sc.maps[name] = _build_map(sc, spec, where)
                else:
                    space = sc.space(_need(spec, "space", where), f"{where}.space")
                    sc.functions[name] = _build_function(sc, space, _need(spec, "expr", where),
                                                         f"{where}.expr")
            except ConfigError as e:
                left.append((section, name, spec))
                last_err = last_err or e
        if len(left) == len(pending):
            raise last_err
        pending = left

    tasks = cfg.get("tasks")
    if not isinstance(tasks, list) or not tasks:
        raise ConfigError("tasks: the task list must be a nonempty list")
    for i, task in enumerate(tasks):
        _validate_task(sc, task, f"tasks[{i}]")
    sc.tasks = tasks
    return sc


def _validate_task(sc: Scenario, task, where):
    kind = _need(task, "type", where)
    if kind not in TASK_TYPES:
        raise ConfigError(f"{where}.type: unknown task type {kind!r}; valid types: {_kinds(TASK_TYPES)}")
    space = sc.space(_need(task, "space", where), f"{where}.space")
    for key in ("n", "starts", "max_iter", "levels", "budget"):
        if key in task:
            _positive_int(task[key], f"{where}.{key}")
    if "seed" in task and (isinstance(task["seed"], bool) or not isinstance(task["seed"], int)):
        raise ConfigError(f"{where}.seed: must be an integer")
    for key in ("function", "set", "map"):
        if key in task:
            obj = getattr(sc, key)(task[key], f"{where}.{key}")
            if obj.space is not space:
                raise ConfigError(f"{where}.{key}: {task[key]!r} lives on another space")
    if kind == "verify":
        check = _need(task, "check", where)
        if check not in CHECKS:
            raise ConfigError(f"{where}.check: unknown check {check!r}; valid checks: {_kinds(CHECKS)}")
        if check in FUNCTION_CHECKS and check != "sphere_wconvex":
            _need(task, "function", where)
        if check == "set_convexity":
            _need(task, "set", where)
        if check == "nonexpansive":
            _need(task, "map", where)
        if task.get("expect", "pass") not in ("pass", "fail"):
            raise ConfigError(f"{where}.expect: must be 'pass' or 'fail'")
        needs = {"dyadic": ("x", "y"), "segment_lipschitz": ("x", "y"), "sublevel": ("h",),
                 "local_lipschitz": ("x0", "r", "rho", "M"), "bounded_above": ("x0", "r"),
                 "sphere_wconvex": ("x0", "rho", "sigma")}
        for key in needs.get(check, ()):
            _need(task, key, where)
        for key in ("x", "y", "x0"):
            if key in task:
                sc.point(space, task[key], f"{where}.{key}")
    elif kind == "project":
        sc.set(_need(task, "set", where), f"{where}.set")
        sc.point(space, _need(task, "x", where), f"{where}.x")
    elif kind == "chebyshev":
        sc.set(_need(task, "set", where), f"{where}.set")
        pts = _need(task, "points", where)
        if not isinstance(pts, list) or not pts:
            raise ConfigError(f"{where}.points: expected a nonempty list")
        for j, p in enumerate(pts):
            sc.point(space, p, f"{where}.points[{j}]")
        if task.get("expect") not in (None, "unique", "nonunique"):
            raise ConfigError(f"{where}.expect: must be 'unique' or 'nonunique'")
    else:
        sc.map(_need(task, "map", where), f"{where}.map")
        sc.point(space, _need(task, "x0", where), f"{where}.x0")
        method = task.get("method", "mann")
        if method not in ("mann", "residual", "scenario"):
            raise ConfigError(f"{where}.method: must be one of mann, residual, scenario")
        if method == "scenario":
            sc.set(_need(task, "set", where), f"{where}.set")
        if task.get("expect", "converge") not in ("converge", "diverge"):
            raise ConfigError(f"{where}.expect: must be 'converge' or 'diverge'")


# ------------------------------------------------------------- running


def _status_of(observed: str, expect: str) -> str:
    if observed == "inconclusive":
        return "inconclusive"
    return "passed" if (observed == "passed") == (expect == "pass") else "failed"


def _run_verify(sc: Scenario, task, where, workers):
    space = sc.space(task["space"], where)
    check = task["check"]
    n = task.get("n", sc.n)
    seed = task.get("seed", sc.seed)
    f = sc.function(task["function"], where) if "function" in task else None

    def pt(key):
        return sc.point(space, task[key], f"{where}.{key}")

    if check in SPACE_CHECKS:
        rec = SPACE_CHECKS[check](space, task, n, seed, workers).to_record(space)
    elif check == "wconvex":
        rec = verify_wconvex(space, f, n, seed, workers=workers).to_record(space)
    elif check == "strict_wconvex":
        rec = verify_strict_wconvex(space, f, n, seed, task.get("separation", 0.1),
                                    workers=workers).to_record(space)
    elif check == "midpoint":
        rec = midpoint_convexity_check(space, f, n, seed, workers).to_record(space)
    elif check == "dyadic":
        rec = dyadic_convexity_check(space, f, pt("x"), pt("y"), task.get("levels", 10)).to_record(space)
    elif check == "epigraph":
        v = epigraph_convexity_check(space, f, n, seed, workers)
        rec = v.to_record()
    elif check == "sublevel":
        rec = sublevel_convexity_check(space, f, float(task["h"]), n, seed).to_record(space)
    elif check == "sphere_wconvex":
        rec = sphere_wconvex_check(space, pt("x0"), float(task["rho"]), float(task["sigma"]), f, n,
                                   seed, task.get("strict", True)).to_record(space)
    elif check == "strict_space":
        planted = None
        if "planted" in task:
            planted = [(_planted_row(sc, space, r, f"{where}.planted[{i}]")) for i, r in enumerate(task["planted"])]
        rec = strict_space_check(space, n, seed, planted).to_record(space)
    elif check == "set_convexity":
        rec = set_convexity_check(sc.set(task["set"], where), n, seed).to_record(space)
    elif check == "nonexpansive":
        rec = check_nonexpansive(space, sc.map(task["map"], where), n, seed,
                                 workers=workers).to_record(space)
    elif check == "bounded_above":
        rec = bounded_above_check(space, f, pt("x0"), float(task["r"]), task.get("c"), n,
                                  seed).to_record(space)
    else:
        rep = _lipschitz(space, f, task, check, n, seed, pt)
        rec = rep.to_record(space)
        rec["property"] = check
        pre = rep.details.get("precondition", True)
        rec["status"] = "inconclusive" if not pre else ("passed" if rep.passed else "failed")
        if check == "segment_lipschitz" and "alpha" in task and rep.details["alpha_precondition"]:
            if not rep.details["alpha_passed"]:
                rec["status"] = "failed"
    status = _status_of(rec["status"], task.get("expect", "pass"))
    return status, rec


def _lipschitz(space, f, task, check, n, seed, pt):
    if check == "segment_lipschitz":
        return segment_lipschitz_check(space, f, pt("x"), pt("y"), task.get("points", 200),
                                       task.get("alpha"))
    return local_lipschitz_from_bound(space, f, pt("x0"), float(task["r"]), float(task["rho"]),
                                      float(task["M"]), n, seed)


def _planted_row(sc, space, row, where):
    if not isinstance(row, dict):
        raise ConfigError(f"{where}: planted rows are objects with x0, x, y, t")
    return (sc.point(space, _need(row, "x0", where), f"{where}.x0"),
            sc.point(space, _need(row, "x", where), f"{where}.x"),
            sc.point(space, _need(row, "y", where), f"{where}.y"),
            float(_need(row, "t", where)))


def _projection_cfg(sc, task):
    return ProjectionConfig(starts=task.get("starts", sc.starts), seed=task.get("seed", sc.seed))


def _run_project(sc, task, where, workers):
    space = sc.space(task["space"], where)
    Y = sc.set(task["set"], where)
    x = sc.point(space, task["x"], f"{where}.x")
    res = project(space, Y, x, _projection_cfg(sc, task), workers)
    rec = res.to_record(space)
    tol = float(task.get("tol", 1e-6))
    status = "passed" if res.converged and not res.inconclusive else "inconclusive"
    if "expect_distance" in task:
        err = abs(res.distance - float(task["expect_distance"]))
        rec["distance_error"] = err
        status = "passed" if err <= tol else "failed"
    if "expect_point" in task and status != "failed":
        err = float(space.metric(res.best, sc.point(space, task["expect_point"], f"{where}.expect_point")))
        rec["point_error"] = err
        status = "passed" if err <= tol else "failed"
    return status, rec


def _run_chebyshev(sc, task, where, workers):
    space = sc.space(task["space"], where)
    Y = sc.set(task["set"], where)
    xs = [sc.point(space, p, f"{where}.points") for p in task["points"]]
    cfg = ProjectionConfig(starts=task.get("starts", 16), seed=task.get("seed", sc.seed))
    utol = float(task.get("uniqueness_tol", 1e-6))
    entries = chebyshev_diagnostic(space, Y, xs, cfg, utol, workers)
    rec = {"entries": [{"x": space.to_payload(e.x), "distance": e.distance, "diameter": e.diameter,
                        "unique": bool(e.unique), "n_candidates": e.n_candidates} for e in entries],
           "max_diameter": max(e.diameter for e in entries),
           "min_diameter": min(e.diameter for e in entries)}
    expect = task.get("expect")
    if expect == "unique":
        status = "passed" if all(e.unique for e in entries) else "failed"
    elif expect == "nonunique":
        status = "passed" if not any(e.unique for e in entries) else "failed"
    else:
        status = "passed"
    return status, rec


def _run_fixpoint(sc, task, where, workers, out_dir):
    space = sc.space(task["space"], where)
    T = sc.map(task["map"], where)
    x0 = sc.point(space, task["x0"], f"{where}.x0")
    fp_tol = float(task.get("fp_tol", 1e-6))
    seed = task.get("seed", sc.seed)
    method = task.get("method", "mann")
    if method == "mann":
        it = mann_iterate(space, T, x0, task.get("schedule", 0.5), fp_tol, task.get("max_iter", 100_000))
        rec = {"point": space.to_payload(it.point), "residual": it.residual,
               "iterations": it.iterations, "converged": it.converged, "diverged": it.diverged,
               "monotone": it.monotone}
        if "trace" in task:
            path = out_dir / task["trace"]
            it.write_csv(path)
            rec["trace"] = task["trace"]
        ok = it.converged if task.get("expect", "converge") == "converge" else not it.converged
        return ("passed" if ok else "failed"), rec
    if method == "residual":
        rep = residual_fixed_point(space, T, task.get("surrogate", "square"), fp_tol,
                                   task.get("n", 1000), seed, cfg=_projection_cfg(sc, task))
        rec = {"certified": rep.certified, "minimizer": space.to_payload(rep.minimizer),
               "residual": rep.residual, "is_fixed_point": rep.is_fixed_point,
               "inconsistent": rep.inconsistent, "verdict": rep.verdict.to_record(space)}
        status = "failed" if rep.inconsistent else ("passed" if rep.is_fixed_point else "inconclusive")
        return status, rec
    rec = fixed_point_scenario(space, T, sc.set(task["set"], where), x0, fp_tol,
                               task.get("max_iter", 100_000), seed)
    found = rec["mann_converged"] or rec["min_residual"] <= fp_tol
    return ("passed" if found else "inconclusive"), rec


def run_task(sc: Scenario, i: int, task: dict, workers=None, out_dir=Path(".")) -> dict:
    where = f"tasks[{i}]"
    kind = task["type"]
    try:
        if kind == "verify":
            status, rec = _run_verify(sc, task, where, workers)
        elif kind == "project":
            status, rec = _run_project(sc, task, where, workers)
        elif kind == "chebyshev":
            status, rec = _run_chebyshev(sc, task, where, workers)
        else:
            status, rec = _run_fixpoint(sc, task, where, workers, out_dir)
    except ExtensionUnsupported as e:
        status, rec = "inconclusive", {"reason": f"extension unsupported: {e}"}
    except (DomainError, PointTypeError, ResourceError) as e:
        raise ConfigError(f"{where}: {e}") from None
    out = {"index": i, "type": kind, "status": status, "result": _jsonable(rec)}
    for key in ("label", "check", "space", "function", "set", "map"):
        if key in task:
            out[key] = task[key]
    return out


def run_scenario(config, out_path=None, workers=None) -> dict:
    """Validate, run every task in order and write the report.

    ``config`` is a path, a bundled scenario name or a parsed dict.  The
    report is returned and, unless ``out_path`` is False, written as JSON.
    """
    cfg = config if isinstance(config, dict) else load_config(config)
    sc = build_scenario(cfg)
    if out_path is None:
        out_path = cfg.get("output") or f"{sc.name}_report.json"
    out_dir = Path(out_path).parent if out_path else Path(".")
    if out_path:
        out_dir.mkdir(parents=True, exist_ok=True)
    w = worker_count(workers)
    results, times = [], []
    t_all = time.perf_counter()
    for i, task in enumerate(sc.tasks):
        t0 = time.perf_counter()
        results.append(run_task(sc, i, task, w, out_dir))
        times.append(time.perf_counter() - t0)
    summary = {s: sum(r["status"] == s for r in results) for s in ("passed", "failed", "inconclusive")}
    report = {
        "schema_version": SCHEMA_VERSION,
        "artifact": {"name": "wconvex", "version": __version__},
        "scenario": sc.name,
        "seed": sc.seed,
        "config": cfg,
        "tasks": results,
        "summary": summary,
        "timing": {"total_seconds": time.perf_counter() - t_all, "task_seconds": times,
                   "workers": w},
    }
    if out_path:
        write_report(report, out_path)
    return report


def write_report(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, allow_nan=False) + "\n")


def read_report(path) -> dict:
    return json.loads(Path(path).read_text())


def reproducible_part(report: dict) -> dict:
    """The report minus wall-clock timing."""
    return {k: v for k, v in report.items() if k != "timing"}


def exit_code(report: dict) -> int:
    return 1 if report["summary"]["failed"] else 0


# ------------------------------------------------------------- catalogue


def list_catalog() -> str:
    lines = [f"wconvex {__version__}", "", "spaces:"]
    for kind, fields in SPACE_KINDS.items():
        lines.append(f"  {kind:<14} {_fields(fields)}")
    lines += ["", "function nodes (key 'op'):"]
    for kind, fields in FUNCTION_NODES.items():
        lines.append(f"  {kind:<14} {_fields(fields)}")
    lines.append(f"  scalar maps: {', '.join(SCALAR_MAPS)}, power:<alpha >= 1>")
    lines += ["", "sets:"]
    for kind, fields in SET_KINDS.items():
        lines.append(f"  {kind:<14} {_fields(fields)}")
    lines += ["", "maps:"]
    for kind, fields in MAP_KINDS.items():
        lines.append(f"  {kind:<14} {_fields(fields)}")
    lines += ["", "tasks:"]
    for kind, fields in TASK_TYPES.items():
        lines.append(f"  {kind:<14} {_fields(fields)}")
    lines += ["", "bundled scenarios:"]
    for name in sorted(bundled_scenarios()):
        lines.append(f"  {name}")
    return "\n".join(lines)


def _fields(fields: dict) -> str:
    return ", ".join(f"{k}: {v}" for k, v in fields.items()) or "(no fields)"


# ------------------------------------------------------------- subcommands


def _json_arg(text, what):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"--{what}: not valid JSON ({e.msg} at column {e.colno})") from None


def _space_arg(text):
    """A catalogue key (l2, l1, linf, ball, interval, product, ...) or a JSON space spec."""
    from .catalog import standard_spaces

    std = standard_spaces()
    if text in std:
        return std[text]
    spec = _json_arg(text, "space")
    try:
        return space_from_spec(spec)
    except (DomainError, KeyError, TypeError, AttributeError) as e:
        raise ConfigError(f"--space: {e}; catalogue keys: {_kinds(std)}") from None


def _cli_verify(args) -> dict:
    from .catalog import function_catalogue

    if args.check not in CHECKS:
        raise ConfigError(f"--check: unknown check {args.check!r}; valid checks: {_kinds(CHECKS)}")
    cat = {e.name: e for e in function_catalogue()}
    if args.fn in cat and args.space is None:
        entry = cat[args.fn]
        space, f = entry.space, entry.f
    else:
        if args.space is None:
            raise ConfigError(f"--fn: {args.fn!r} is not a catalogue function "
                              f"({_kinds(cat)}); pass --space with a JSON expression")
        space = _space_arg(args.space)
        sc = Scenario(spaces={"S": space})
        f = _build_function(sc, space, _json_arg(args.fn, "fn"), "--fn")
    task = {"type": "verify", "check": args.check, "space": "S", "function": "f",
            "n": args.n, "seed": args.seed}
    for key in ("x", "y", "x0"):
        v = getattr(args, key)
        if v is not None:
            task[key] = _json_arg(v, key)
    if args.h is not None:
        task["h"] = args.h
    sc = Scenario("verify", args.seed, spaces={"S": space}, functions={"f": f}, tasks=[task],
                  n=args.n, config={"argv": sys.argv[1:]})
    _validate_task(sc, task, "arguments")
    return run_task(sc, 0, task, args.workers)


def _cli_project(args) -> dict:
    space = _space_arg(args.space)
    sc = Scenario("project", args.seed, spaces={"S": space}, starts=args.starts)
    spec = _json_arg(args.set, "set")
    if isinstance(spec, dict):
        spec.setdefault("space", "S")
    sc.sets["Y"] = _build_set(sc, spec, "--set")
    task = {"type": "project", "space": "S", "set": "Y", "x": _json_arg(args.x, "x"),
            "starts": args.starts, "seed": args.seed}
    if args.expect_distance is not None:
        task["expect_distance"] = args.expect_distance
    _validate_task(sc, task, "arguments")
    return run_task(sc, 0, task, args.workers)


def _cli_fixpoint(args) -> dict:
    from .catalog import map_catalogue

    cat = {e.name: e for e in map_catalogue()}
    if args.map in cat and args.space is None:
        entry = cat[args.map]
        space, T = entry.space, entry.T
        x0 = entry.x0 if args.x0 is None else _json_arg(args.x0, "x0")
    else:
        if args.space is None or args.x0 is None:
            raise ConfigError(f"--map: {args.map!r} is not a catalogue map ({_kinds(cat)}); "
                              "pass --space, --x0 and a JSON map spec")
        space = _space_arg(args.space)
        sc = Scenario(spaces={"S": space})
        spec = _json_arg(args.map, "map")
        if isinstance(spec, dict):
            spec.setdefault("space", "S")
        T = _build_map(sc, spec, "--map")
        x0 = _json_arg(args.x0, "x0")
    sc = Scenario("fixpoint", args.seed, spaces={"S": space}, maps={"T": T})
    task = {"type": "fixpoint", "space": "S", "map": "T", "x0": x0.tolist() if isinstance(x0, np.ndarray) else x0,
            "method": args.method, "schedule": args.schedule, "fp_tol": args.tol,
            "max_iter": args.max_iter, "seed": args.seed}
    out_dir = Path(".")
    if args.trace:
        task["trace"] = Path(args.trace).name
        out_dir = Path(args.trace).parent
    _validate_task(sc, task, "arguments")
    return run_task(sc, 0, task, args.workers, out_dir)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wconvex", description="Convex metric space verifiers and solvers.")
    p.add_argument("--version", action="version", version=f"wconvex {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run a scenario file or bundled scenario")
    r.add_argument("config")
    r.add_argument("--out", help="report path (default: the config's 'output' field)")
    r.add_argument("--workers", type=int, help="threads per task (default: $WCONVEX_WORKERS or 1)")

    sub.add_parser("list", help="list spaces, node kinds, sets, maps, tasks and bundled scenarios")

    v = sub.add_parser("verify", help="run one check on one function")
    v.add_argument("--space", help="catalogue key or JSON space spec")
    v.add_argument("--fn", required=True, help="catalogue function name or JSON expression")
    v.add_argument("--check", default="wconvex", help="one of: " + ", ".join(FUNCTION_CHECKS))
    v.add_argument("--n", type=int, default=DEFAULT_N, help="sample count")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--x", help="JSON point: segment start (dyadic, segment checks)")
    v.add_argument("--y", help="JSON point: segment end")
    v.add_argument("--x0", help="JSON point: ball centre (local Lipschitz, bounded above)")
    v.add_argument("--h", type=float, help="level for the sublevel check")
    v.add_argument("--workers", type=int)

    pr = sub.add_parser("project", help="nearest point of a convex set")
    pr.add_argument("--space", required=True, help="catalogue key or JSON space spec")
    pr.add_argument("--set", required=True, help="JSON set spec, e.g. '{\"kind\":\"ball\",...}'")
    pr.add_argument("--x", required=True, help="JSON point")
    pr.add_argument("--starts", type=int, default=4)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--expect-distance", type=float)
    pr.add_argument("--workers", type=int)

    fp = sub.add_parser("fixpoint", help="Mann iteration or residual minimisation")
    fp.add_argument("--map", required=True, help="catalogue map name or JSON map spec")
    fp.add_argument("--space", help="catalogue key or JSON space spec (JSON maps only)")
    fp.add_argument("--x0", help="JSON starting point")
    fp.add_argument("--method", default="mann", choices=["mann", "residual"])
    fp.add_argument("--schedule", type=float, default=0.5)
    fp.add_argument("--tol", type=float, default=1e-6)
    fp.add_argument("--max-iter", type=int, default=100_000)
    fp.add_argument("--seed", type=int, default=0)
    fp.add_argument("--trace", help="write the residual trace to this CSV file")
    fp.add_argument("--workers", type=int)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.cmd == "list":
            print(list_catalog())
            return 0
        if args.cmd == "run":
            report = run_scenario(args.config, args.out, args.workers)
            s = report["summary"]
            for t in report["tasks"]:
                label = t.get("label") or t.get("check") or t["type"]
                print(f"[{t['status']:>12}] tasks[{t['index']}] {t['type']}: {label}")
            print(f"{s['passed']} passed, {s['failed']} failed, {s['inconclusive']} inconclusive "
                  f"in {report['timing']['total_seconds']:.1f}s")
            if s["inconclusive"]:
                print(f"warning: {s['inconclusive']} inconclusive task(s)", file=sys.stderr)
            return exit_code(report)
        rec = {"verify": _cli_verify, "project": _cli_project, "fixpoint": _cli_fixpoint}[args.cmd](args)
        print(json.dumps(rec, indent=2, allow_nan=False))
        if rec["status"] == "inconclusive":
            print("warning: inconclusive", file=sys.stderr)
        return 1 if rec["status"] == "failed" else 0
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
