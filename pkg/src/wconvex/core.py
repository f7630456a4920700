"""Space abstraction, segments, verdicts and the axiom checkers.

Points are plain numpy payload rows.  A single point is a 1-D array of
length ``space.width``; a batch is an ``(m, width)`` array.  Every space
operation broadcasts over leading axes so verifiers evaluate whole sample
streams at once.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

EPS_EQ = 1e-9
DELTA_STRICT = 1e-7
DEGENERATE = 1e-12
T_GRID = np.linspace(0.0, 1.0, 17)

WORKERS_ENV = "WCONVEX_WORKERS"


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class PointTypeError(TypeError):
    """Payload incompatible with the space it was handed to."""


class ExtensionUnsupported(NotImplementedError):
    """The space has no geodesic-extension oracle."""


class ResourceError(RuntimeError):
    pass


def as_points(a) -> np.ndarray:
    return np.asarray(a, dtype=float)


class Space:
    """A metric together with a single-valued convex structure W.

    Subclasses implement ``_metric``, ``_combine`` and ``_sample``; the
    public methods add shape/domain checks.  ``_extend`` is optional and
    advertised through ``supports_extend``.
    """

    name = "space"
    width = 1
    supports_extend = False

    @property
    def dim_hint(self) -> int:
        return self.width

    def _check(self, *pts):
        for p in pts:
            if p.shape[-1:] != (self.width,):
                raise PointTypeError(
                    f"{self.name}: expected payload of width {self.width}, got shape {p.shape}"
                )

    def metric(self, a, b):
        a, b = as_points(a), as_points(b)
        self._check(a, b)
        return self._metric(a, b)

    def combine(self, x, y, t):
        x, y = as_points(x), as_points(y)
        self._check(x, y)
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0) or np.any(t > 1.0) or np.any(np.isnan(t)):
            raise DomainError("combine: t must lie in [0, 1]")
        if t.ndim and x.ndim > 1 or t.ndim and y.ndim > 1:
            t = t[..., None]
        return self._combine(x, y, t)

    def extend(self, y, x, lam):
        """Return xi with ``combine(y, xi, lam) == x``."""
        if not self.supports_extend:
            raise ExtensionUnsupported(f"{self.name} has no extension oracle")
        y, x = as_points(y), as_points(x)
        self._check(x, y)
        lam = np.asarray(lam, dtype=float)
        if np.any(lam <= 0.0) or np.any(lam >= 1.0):
            raise DomainError("extend: lambda must lie in (0, 1)")
        if lam.ndim and (x.ndim > 1 or y.ndim > 1):
            lam = lam[..., None]
        return self._extend(y, x, lam)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self._sample(rng, n)

    def sample_around(self, rng: np.random.Generator, center, n: int, radius: float) -> np.ndarray:
        """Points spread over a neighbourhood of ``center`` of size about ``radius``.

        Spaces without a natural translation fall back to the global sampler.
        """
        return self._sample(rng, n)

    # payload conversion for configs and reports
    def point(self, payload) -> np.ndarray:
        p = as_points(payload)
        self._check(p)
        self.validate(p)
        return p

    def valid_mask(self, p) -> np.ndarray:
        return np.all(np.isfinite(as_points(p)), axis=-1)

    def validate(self, p) -> None:
        if not np.all(np.isfinite(p)):
            raise DomainError(f"{self.name}: non-finite payload")

    def to_payload(self, p) -> Any:
        return as_points(p).tolist()

    def describe(self) -> dict:
        return {"kind": self.name}

    def _extend(self, y, x, lam):  # pragma: no cover - guarded by supports_extend
        raise ExtensionUnsupported(self.name)

    def __repr__(self):
        return f"{type(self).__name__}({self.describe()})"


def distance(space: Space, a, b) -> float:
    return float(space.metric(a, b))


def combine(space: Space, x, y, t: float) -> np.ndarray:
    return space.combine(x, y, t)


def extend(space: Space, y, x, lam: float) -> np.ndarray:
    xi = space.extend(y, x, lam)
    space.validate(xi)
    return xi


def same_point(space: Space, a, b, eps: float = EPS_EQ) -> bool:
    return bool(space.metric(a, b) <= eps)


@dataclass(frozen=True)
class Segment:
    space: Space
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", as_points(self.x))
        object.__setattr__(self, "y", as_points(self.y))
        if self.length <= DEGENERATE:
            raise DomainError("degenerate segment: d(x, y) = 0")

    @property
    def length(self) -> float:
        return float(self.space.metric(self.x, self.y))

    def at(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        if lam.ndim == 0:
            return self.space.combine(self.x, self.y, lam)
        xs = np.broadcast_to(self.x, lam.shape + self.x.shape)
        ys = np.broadcast_to(self.y, lam.shape + self.y.shape)
        return self.space.combine(xs, ys, lam)


@dataclass
class Verdict:
    """Outcome of a sampled property check.

    ``status`` is one of ``passed``, ``failed`` or ``inconclusive``.  A
    witness is attached exactly when the status is ``failed``.
    """

    property: str
    status: str
    samples_checked: int
    worst_violation: float
    tolerance: float
    seed: int | None
    witness: dict | None = None
    skipped: int = 0
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "passed"

    @property
    def failed(self) -> bool:
        return self.status == "failed"

    def __post_init__(self):
        if self.status not in ("passed", "failed", "inconclusive"):
            raise ValueError(self.status)
        if (self.witness is not None) != (self.status == "failed"):
            raise ValueError("witness must be present iff the verdict failed")

    def to_record(self, space: Space | None = None, **extra) -> dict:
        rec = {
            "property": self.property,
            "status": self.status,
            "n": self.samples_checked,
            "seed": self.seed,
            "worst_violation": _jsonable(self.worst_violation),
            "tolerance": self.tolerance,
            "skipped": self.skipped,
            "witness": _witness_payload(self.witness, space),
        }
        if self.details:
            rec["details"] = _jsonable(self.details)
        rec.update(extra)
        return rec


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if not np.isfinite(v):
            return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
        return v
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _witness_payload(w, space):
    if w is None:
        return None
    out = {}
    for k, v in w.items():
        if isinstance(v, np.ndarray) and space is not None and v.shape == (space.width,):
            out[k] = space.to_payload(v)
        else:
            out[k] = _jsonable(v)
    return out


# ---------------------------------------------------------------- sampling


def make_rng(seed, *stream) -> np.random.Generator:
    if seed is None:
        seed = 0
    return np.random.default_rng([int(seed) & (2**64 - 1), *stream])


def draw_t(rng: np.random.Generator, n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Mix of the 1/16 grid and uniform draws; the first 17 hit the grid."""
    grid = T_GRID[(T_GRID >= lo) & (T_GRID <= hi)]
    t = rng.uniform(lo, hi, n)
    pick = rng.random(n) < 0.25
    t[pick] = grid[rng.integers(0, len(grid), pick.sum())]
    k = min(n, len(grid))
    t[:k] = grid[:k]
    return t


def worker_count(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    return max(1, int(os.environ.get(WORKERS_ENV, "1") or 1))


def chunked(fn: Callable[[slice], np.ndarray], n: int, workers: int | None = None) -> np.ndarray:
    """Evaluate ``fn`` over index chunks, in threads when asked.

    Chunk results are concatenated in index order, so reductions over the
    result are independent of the worker count.
    """
    w = worker_count(workers)
    if n == 0:
        return np.zeros(0)
    if w == 1:
        return fn(slice(0, n))
    bounds = np.linspace(0, n, w + 1).astype(int)
    slices = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=w) as ex:
        parts = list(ex.map(fn, slices))
    return np.concatenate(parts)


def rel_excess(lhs, rhs):
    """(lhs - rhs) / (1 + |rhs|): the unit-free violation used everywhere."""
    return (lhs - rhs) / (1.0 + np.abs(rhs))


def reduce_violations(
    prop: str,
    viol: np.ndarray,
    tol: float,
    seed,
    witness_of: Callable[[int], dict],
    skipped: np.ndarray | None = None,
    details: dict | None = None,
) -> Verdict:
    """Max-reduction with lowest-index tie breaking."""
    viol = np.asarray(viol, dtype=float)
    if skipped is not None:
        viol = np.where(skipped, -np.inf, viol)
        n_skip = int(np.sum(skipped))
    else:
        n_skip = 0
    checked = int(viol.size - n_skip)
    if checked == 0:
        return Verdict(prop, "inconclusive", 0, float("nan"), tol, seed,
                       skipped=n_skip, details=details or {})
    # NaN counts as a violation
    viol = np.where(np.isnan(viol), np.inf, viol)
    i = int(np.argmax(viol))
    worst = float(viol[i])
    if worst <= tol:
        return Verdict(prop, "passed", checked, worst, tol, seed,
                       skipped=n_skip, details=details or {})
    w = witness_of(i)
    w["index"] = i
    w["violation"] = worst
    return Verdict(prop, "failed", checked, worst, tol, seed, witness=w,
                   skipped=n_skip, details=details or {})


# ------------------------------------------------------------- checkers


def check_metric_axioms(space: Space, n: int = 10_000, seed=0, workers=None) -> Verdict:
    """Symmetry, identity, nonnegativity and triangle inequality on n triples."""
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = make_rng(seed, 0)
    a, b, c = space.sample(rng, n), space.sample(rng, n), space.sample(rng, n)

    def viol(s):
        ab = space.metric(a[s], b[s])
        ba = space.metric(b[s], a[s])
        ac = space.metric(a[s], c[s])
        bc = space.metric(b[s], c[s])
        aa = space.metric(a[s], a[s])
        v = np.stack([
            -ab,  # nonnegativity
            np.abs(ab - ba) / (1.0 + np.abs(ab)),
            aa,
            rel_excess(ac, ab + bc),
        ])
        return v.max(axis=0)

    v = chunked(viol, n, workers)

    def witness(i):
        ab, ba = float(space.metric(a[i], b[i])), float(space.metric(b[i], a[i]))
        ac, bc = float(space.metric(a[i], c[i])), float(space.metric(b[i], c[i]))
        return {"a": a[i], "b": b[i], "c": c[i], "d_ab": ab, "d_ba": ba, "d_ac": ac, "d_bc": bc,
                "d_aa": float(space.metric(a[i], a[i]))}

    return reduce_violations("metric_axioms", v, EPS_EQ, seed, witness)


def check_convex_structure(space: Space, n: int = 10_000, seed=0, workers=None) -> Verdict:
    """d(u, W(x,y;t)) <= (1-t) d(u,x) + t d(u,y) on n sampled (u, x, y, t)."""
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = make_rng(seed, 1)
    u, x, y = space.sample(rng, n), space.sample(rng, n), space.sample(rng, n)
    t = draw_t(rng, n)

    def viol(s):
        z = space.combine(x[s], y[s], t[s])
        lhs = space.metric(u[s], z)
        rhs = (1 - t[s]) * space.metric(u[s], x[s]) + t[s] * space.metric(u[s], y[s])
        return rel_excess(lhs, rhs)

    v = chunked(viol, n, workers)

    def witness(i):
        z = space.combine(x[i], y[i], t[i])
        rhs = (1 - t[i]) * space.metric(u[i], x[i]) + t[i] * space.metric(u[i], y[i])
        return {"u": u[i], "x": x[i], "y": y[i], "t": float(t[i]),
                "lhs": float(space.metric(u[i], z)), "rhs": float(rhs)}

    return reduce_violations("convex_structure", v, EPS_EQ, seed, witness)


def check_segment_identities(space: Space, n: int = 10_000, seed=0, workers=None) -> Verdict:
    """d(x,W) = t d(x,y), d(y,W) = (1-t) d(x,y) and additivity along segments.

    Pairs closer than 1e-12 are skipped and counted.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = make_rng(seed, 2)
    x, y = space.sample(rng, n), space.sample(rng, n)
    t = draw_t(rng, n)
    dxy = space.metric(x, y)
    skip = dxy < DEGENERATE

    def viol(s):
        z = space.combine(x[s], y[s], t[s])
        d = dxy[s]
        xz = space.metric(x[s], z)
        yz = space.metric(y[s], z)
        v = np.stack([
            np.abs(xz - t[s] * d) / (1 + t[s] * d),
            np.abs(yz - (1 - t[s]) * d) / (1 + (1 - t[s]) * d),
            np.abs(xz + yz - d) / (1 + d),
        ])
        return v.max(axis=0)

    v = chunked(viol, n, workers)

    def witness(i):
        z = space.combine(x[i], y[i], t[i])
        return {"x": x[i], "y": y[i], "t": float(t[i]), "d_xy": float(dxy[i]),
                "d_xz": float(space.metric(x[i], z)), "d_yz": float(space.metric(y[i], z))}

    return reduce_violations("segment_identities", v, EPS_EQ, seed, witness, skipped=skip)


def check_idempotence(space: Space, n: int = 1000, seed=0) -> Verdict:
    """combine(x, x, t) = x."""
    rng = make_rng(seed, 3)
    x = space.sample(rng, n)
    t = draw_t(rng, n)
    v = space.metric(space.combine(x, x, t), x)
    return reduce_violations("idempotence", v, EPS_EQ, seed,
                             lambda i: {"x": x[i], "t": float(t[i])})


def check_extension(space: Space, n: int = 1000, seed=0) -> Verdict:
    """combine(y, extend(y, x, lam), lam) = x wherever extend is defined."""
    if not space.supports_extend:
        raise ExtensionUnsupported(space.name)
    rng = make_rng(seed, 4)
    x, y = space.sample(rng, n), space.sample(rng, n)
    lam = rng.uniform(0.05, 0.95, n)
    xi = space.extend(y, x, lam)
    ok = space.valid_mask(xi)
    back = space.combine(y, np.where(ok[:, None], xi, y), lam)
    v = space.metric(back, x) / (1 + space.metric(x, y))
    return reduce_violations("extension_round_trip", v, EPS_EQ, seed,
                             lambda i: {"x": x[i], "y": y[i], "lam": float(lam[i]), "xi": xi[i]},
                             skipped=~ok)
