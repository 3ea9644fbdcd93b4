"""Stable and unstable manifolds as polylines, their intersections, and smooth censuses.

Curves are stored as continuous lifts to the plane.  For toral maps the lift
of f is the linear map itself, so a grown curve never needs re-stitching and
the integer offset between two lifts at a crossing identifies the homoclinic
point exactly.  Horseshoe curves live in the unit square and are clipped to
the branch domains before each step; every component remembers the branch
symbols it went through.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
from scipy.spatial import cKDTree

from .census import CensusTable
from .shift import SymbolicPoint
from .systems import (
    AffineHorseshoe, HenonMap, IdentityMap, TorusAutomorphism, apply, least_period,
    point_from_itinerary,
)


class EpsTooLarge(ValueError):
    def __init__(self, eps, bound):
        self.eps = eps
        self.bound = bound
        super().__init__(f"eps={eps} exceeds the safe radius {bound:.6g} for this system")


class BudgetExceeded(RuntimeError):
    """Growth would exceed the vertex budget.

    ``partial`` is the last curve that fit and ``iteration`` the number of
    completed steps.
    """

    def __init__(self, partial, iteration, budget, needed=None):
        self.partial = partial
        self.iteration = iteration
        self.budget = budget
        self.needed = needed
        super().__init__(f"vertex budget {budget} exceeded after {iteration} iterations"
                         + (f" (next step needs {needed})" if needed is not None else ""))


class NotOnManifold(ValueError):
    pass


DEFAULT_GAP = 0.1
DEDUP_TOL = 1e-9
ANGLE_MIN = 1e-3


# polylines ------------------------------------------------------------------

@dataclass
class TorusPolyline:
    """Piecewise-linear curve made of one or more components.

    ``vertices`` are lifts (plane coordinates; reduce mod 1 for the torus
    point), ``comp`` the nondecreasing component id of each vertex, and
    ``tangents`` optional unit tangents carried through the dynamics.
    ``tags`` hold one tuple of branch symbols per component.
    """

    vertices: np.ndarray
    comp: np.ndarray
    max_gap: float
    torus: bool
    tangents: np.ndarray | None = None
    tags: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        self.comp = np.asarray(self.comp, dtype=np.int64)
        if len(self.comp) != len(self.vertices):
            raise ValueError("comp must have one entry per vertex")
        if len(self.comp) and np.any(np.diff(self.comp) < 0):
            raise ValueError("component ids must be nondecreasing")

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def n_components(self) -> int:
        return int(self.comp[-1]) + 1 if len(self.comp) else 0

    @property
    def seg_index(self) -> np.ndarray:
        """Index i of every segment (vertices i, i+1)."""
        return np.nonzero(self.comp[:-1] == self.comp[1:])[0]

    def segments(self):
        i = self.seg_index
        return self.vertices[i], self.vertices[i + 1]

    def segment_lengths(self) -> np.ndarray:
        a, b = self.segments()
        return np.hypot(*(b - a).T)

    @property
    def length(self) -> float:
        return float(self.segment_lengths().sum())

    @property
    def arc_param(self) -> np.ndarray:
        """Cumulative arc length per vertex.

        Consecutive components are separated by a virtual step of one
        ``max_gap`` so the parameter is strictly increasing over the curve.
        """
        d = np.hypot(*np.diff(self.vertices, axis=0).T) if len(self.vertices) > 1 else np.zeros(0)
        d = np.where(self.comp[1:] == self.comp[:-1], d, self.max_gap)
        return np.concatenate([[0.0], np.cumsum(d)])

    def gap_ok(self, slack: float = 1e-9) -> bool:
        lens = self.segment_lengths()
        return bool(np.all(lens <= self.max_gap * (1 + slack)))

    def points(self) -> np.ndarray:
        """Vertices as points of the phase space (reduced mod 1 on the torus)."""
        if not self.torus:
            return self.vertices.copy()
        r = np.mod(self.vertices, 1.0)
        r[r >= 1.0] = 0.0
        return r

    def component(self, c: int) -> "TorusPolyline":
        m = self.comp == c
        return TorusPolyline(self.vertices[m], np.zeros(m.sum(), dtype=np.int64), self.max_gap,
                             self.torus, None if self.tangents is None else self.tangents[m],
                             (self.tags[c],) if self.tags else (), dict(self.meta))


def polyline(points, max_gap=DEFAULT_GAP, torus=True, tangent=None, meta=None) -> TorusPolyline:
    """Single-component polyline through ``points``, refined to ``max_gap``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    t = None
    if tangent is not None:
        t = np.tile(np.asarray(tangent, float) / np.linalg.norm(tangent), (len(pts), 1))
    c = TorusPolyline(pts, np.zeros(len(pts), dtype=np.int64), max_gap, torus, t, (), meta or {})
    return _subdivide(c)


def segment(center, direction, half_length, max_gap=DEFAULT_GAP, torus=True, meta=None) -> TorusPolyline:
    """Straight segment center +- half_length * direction with tangents."""
    d = np.asarray(direction, float)
    d = d / np.linalg.norm(d)
    c = np.asarray(center, float)
    return polyline([c - half_length * d, c + half_length * d], max_gap, torus, d, meta)


def _concat(curves, max_gap, torus, meta=None) -> TorusPolyline:
    verts, comps, tans, tags = [], [], [], []
    off = 0
    with_tan = all(c.tangents is not None for c in curves)
    for c in curves:
        if c.vertex_count == 0:
            continue
        verts.append(c.vertices)
        comps.append(c.comp + off)
        if with_tan:
            tans.append(c.tangents)
        tags.extend(c.tags if c.tags else [()] * c.n_components)
        off += c.n_components
    if not verts:
        return TorusPolyline(np.zeros((0, 2)), np.zeros(0, dtype=np.int64), max_gap, torus, None, (), meta or {})
    return TorusPolyline(np.concatenate(verts), np.concatenate(comps), max_gap, torus,
                         np.concatenate(tans) if with_tan and tans else None, tuple(tags), meta or {})


def _subdivide(c: TorusPolyline, max_gap=None) -> TorusPolyline:
    """Insert equally spaced vertices so every segment is at most max_gap long."""
    gap = c.max_gap if max_gap is None else max_gap
    V = c.vertex_count
    if V < 2:
        return replace(c, max_gap=gap)
    d = np.diff(c.vertices, axis=0)
    L = np.hypot(d[:, 0], d[:, 1])
    same = c.comp[1:] == c.comp[:-1]
    q = np.where(same, np.maximum(1, np.ceil(L / gap - 1e-12)).astype(np.int64), 1)
    if np.all(q == 1):
        return replace(c, max_gap=gap)
    reps = np.concatenate([q, [1]])
    base = np.repeat(np.arange(V), reps)
    start = np.repeat(np.cumsum(reps) - reps, reps)
    j = np.arange(len(base)) - start
    frac = j / reps[base]
    step = np.vstack([d, np.zeros((1, 2))])
    verts = c.vertices[base] + frac[:, None] * step[base]
    tans = None
    if c.tangents is not None:
        tans = c.tangents[base]
    return TorusPolyline(verts, c.comp[base], gap, c.torus, tans, c.tags, c.meta)


def dump_geometry(c: TorusPolyline) -> str:
    """One line per segment: ``x1 y1 x2 y2 wrapflag``.

    The start is reduced to the fundamental square and the end keeps the
    unwrapped displacement; wrapflag is 1 when the segment leaves the square.
    """
    a, b = c.segments()
    lines = []
    if c.torus:
        base = np.floor(a)
        a = a - base
        b = b - base
    for (x1, y1), (x2, y2) in zip(a, b):
        wrap = int(c.torus and not (0 <= x2 < 1 and 0 <= y2 < 1))
        lines.append(f"{x1:.12g} {y1:.12g} {x2:.12g} {y2:.12g} {wrap}")
    return "\n".join(lines) + ("\n" if lines else "")


# local manifolds ------------------------------------------------------------

def _lift(p) -> np.ndarray:
    return np.array([float(p[0]), float(p[1])])


def _check_system(system):
    if not isinstance(system, (TorusAutomorphism, AffineHorseshoe, HenonMap)):
        raise TypeError(f"no manifold support for {type(system).__name__}")


def _check_eps(system, eps):
    if not eps > 0:
        raise ValueError("eps must be positive")
    if isinstance(system, (TorusAutomorphism, AffineHorseshoe)):
        bound = system.eps_bound()
        if eps > bound:
            raise EpsTooLarge(eps, bound)


def _check_periodic(system, p):
    if isinstance(system, HenonMap):
        return 1
    return least_period(system, p)


def _side_dir(system, side):
    if side not in ("stable", "unstable"):
        raise ValueError("side must be 'stable' or 'unstable'")
    if isinstance(system, TorusAutomorphism):
        return system.v_u if side == "unstable" else system.v_s
    return system.unstable_direction() if side == "unstable" else system.stable_direction()


def _pieces(system, p, intervals, side, max_gap, meta):
    d = _side_dir(system, side)
    base = _lift(p)
    curves = []
    for lo, hi in intervals:
        if hi <= lo:
            continue
        curves.append(polyline([base + lo * d, base + hi * d], max_gap, system.torus, d))
    out = _concat(curves, max_gap, system.torus, meta)
    if isinstance(system, AffineHorseshoe):
        out = replace(out, tags=tuple(() for _ in range(out.n_components)))
    return out


def _sq_clip(system, p, side, lo, hi):
    """Clip the coordinate interval [lo, hi] around p to the unit square (horseshoe)."""
    if not isinstance(system, AffineHorseshoe):
        return lo, hi
    c = float(p[1]) if side == "unstable" else float(p[0])
    return max(lo, -c), min(hi, 1.0 - c)


def local_manifold(system, p, eps, side, max_gap=DEFAULT_GAP) -> TorusPolyline:
    """W^s_eps(p) or W^u_eps(p): the eigen/axis segment of coordinate radius eps about p."""
    _check_system(system)
    _check_eps(system, eps)
    _check_periodic(system, p)
    lo, hi = _sq_clip(system, p, side, -eps, eps)
    meta = {"kind": "local", "side": side, "eps": eps, "base": tuple(_lift(p))}
    return _pieces(system, p, [(lo, hi)], side, max_gap, meta)


def fundamental_domain(system, p, eps, side, max_gap=DEFAULT_GAP) -> TorusPolyline:
    """W^u_eps(p) minus f^-k W^u_eps(p) (or the stable analogue with f^k), k the period of p.

    The inner ends are open; they are stored as vertices and flagged in
    ``meta['open_inner']``.
    """
    _check_system(system)
    _check_eps(system, eps)
    k = _check_periodic(system, p)
    if isinstance(system, TorusAutomorphism):
        rate = system.expansion if side == "unstable" else 1.0 / abs(system.lam_s)
    elif isinstance(system, AffineHorseshoe):
        rate = float(system.mu) if side == "unstable" else 1.0 / float(system.kappa)
    else:
        raise TypeError("fundamental domains need a certified linear or affine system")
    inner = eps / rate ** k
    meta = {"kind": "fundamental", "side": side, "eps": eps, "inner": inner, "period": k,
            "base": tuple(_lift(p)), "open_inner": True}
    ivs = []
    for lo, hi in ((-eps, -inner), (inner, eps)):
        a, b = _sq_clip(system, p, side, lo, hi)
        ivs.append((a, b))
    return _pieces(system, p, ivs, side, max_gap, meta)


# growth ---------------------------------------------------------------------

def _clip_box(a, b, box):
    """Liang-Barsky parameters [t0, t1] of segments a->b inside an axis-aligned box."""
    (x0, x1), (y0, y1) = box
    d = b - a
    t0 = np.zeros(len(a))
    t1 = np.ones(len(a))
    ok = np.ones(len(a), dtype=bool)
    for axis, lo, hi in ((0, x0, x1), (1, y0, y1)):
        p = d[:, axis]
        q0 = a[:, axis] - lo
        q1 = hi - a[:, axis]
        flat = p == 0
        ok &= ~(flat & ((q0 < 0) | (q1 < 0)))
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = np.where(flat, -np.inf, np.where(p > 0, -q0 / p, q1 / -p))
            tb = np.where(flat, np.inf, np.where(p > 0, q1 / p, -q0 / p))
        t0 = np.maximum(t0, ta)
        t1 = np.minimum(t1, tb)
    ok &= t0 <= t1
    return ok, t0, t1


def _horseshoe_split(h: AffineHorseshoe, c: TorusPolyline, forward: bool, flat_tol=1e-15):
    """Split c into components lying in single branch domains; returns (pieces, branch list)."""
    if forward:
        lo = float(1 / h.mu)
        boxes = [((0.0, 1.0), (0.0, lo)), ((0.0, 1.0), (1.0 - lo, 1.0))]
    else:
        k = float(h.kappa)
        boxes = [((0.0, k), (0.0, 1.0)), ((1.0 - k, 1.0), (0.0, 1.0))]
    out_v, out_c, out_t, tags, branch = [], [], [], [], []
    cid = 0
    for comp in range(c.n_components):
        m = np.nonzero(c.comp == comp)[0]
        V = c.vertices[m]
        T = c.tangents[m] if c.tangents is not None else None
        tag = c.tags[comp] if c.tags else ()
        if len(V) == 1:
            for s, box in enumerate(boxes):
                (x0, x1), (y0, y1) = box
                if x0 <= V[0, 0] <= x1 and y0 <= V[0, 1] <= y1:
                    out_v.append(V.copy()); out_c.append(np.full(1, cid))
                    if T is not None:
                        out_t.append(T.copy())
                    tags.append(tag); branch.append(s); cid += 1
                    break
            continue
        a, b = V[:-1], V[1:]
        for s, box in enumerate(boxes):
            ok, t0, t1 = _clip_box(a, b, box)
            run = []
            prev_end = None
            for i in np.nonzero(ok)[0]:
                p0 = a[i] + t0[i] * (b[i] - a[i])
                p1 = a[i] + t1[i] * (b[i] - a[i])
                if run and prev_end is not None and t0[i] == 0.0 and prev_end == i - 1:
                    run.append((p1, i))
                else:
                    if len(run) > 1:
                        _emit(run, T, out_v, out_c, out_t, cid)
                        tags.append(tag); branch.append(s); cid += 1
                    run = [(p0, i), (p1, i)]
                prev_end = i if t1[i] == 1.0 else None
            if len(run) > 1:
                _emit(run, T, out_v, out_c, out_t, cid)
                tags.append(tag); branch.append(s); cid += 1
    if not out_v:
        return None, []
    verts = np.concatenate(out_v)
    comps = np.concatenate(out_c)
    keep = np.ones(len(verts), dtype=bool)
    # drop degenerate repeated vertices created by clipping at existing vertices
    dup = (comps[1:] == comps[:-1]) & np.all(np.abs(np.diff(verts, axis=0)) <= flat_tol, axis=1)
    keep[1:] &= ~dup
    verts, comps = verts[keep], comps[keep]
    tans = np.concatenate(out_t)[keep] if out_t else None
    # components reduced to a single point are dropped unless the input was a single point
    res = TorusPolyline(verts, comps, c.max_gap, False, tans, tuple(tags), dict(c.meta))
    return res, branch


def _emit(run, T, out_v, out_c, out_t, cid):
    out_v.append(np.array([p for p, _ in run]))
    out_c.append(np.full(len(run), cid))
    if T is not None:
        out_t.append(np.array([T[i] for _, i in run]))


def _step(system, c: TorusPolyline, forward: bool) -> TorusPolyline:
    if isinstance(system, TorusAutomorphism):
        M = system.A if forward else system.Ainv
        V = c.vertices @ M.T
        T = None
        if c.tangents is not None:
            T = c.tangents @ M.T
            T /= np.linalg.norm(T, axis=1)[:, None]
        return _subdivide(TorusPolyline(V, c.comp, c.max_gap, True, T, c.tags, c.meta))
    if isinstance(system, AffineHorseshoe):
        pieces, branch = _horseshoe_split(system, c, forward)
        if pieces is None:
            return TorusPolyline(np.zeros((0, 2)), np.zeros(0, dtype=np.int64), c.max_gap, False, None, (), c.meta)
        k, m = float(system.kappa), float(system.mu)
        b = np.asarray(branch)[pieces.comp]
        X, Y = pieces.vertices[:, 0], pieces.vertices[:, 1]
        if forward:
            nx = np.where(b == 0, k * X, 1 - k + k * X)
            ny = np.where(b == 0, m * Y, m * Y - m + 1)
            tags = tuple(t + (s,) for t, s in zip(pieces.tags, branch))
        else:
            nx = np.where(b == 0, X / k, (X - (1 - k)) / k)
            ny = np.where(b == 0, Y / m, Y / m + 1 - 1 / m)
            tags = tuple((s,) + t for t, s in zip(pieces.tags, branch))
        nx = np.clip(nx, 0.0, 1.0)
        ny = np.clip(ny, 0.0, 1.0)
        T = None
        if pieces.tangents is not None:
            J = np.array([k, m]) if forward else np.array([1 / k, 1 / m])
            T = pieces.tangents * J
            T /= np.linalg.norm(T, axis=1)[:, None]
        return _subdivide(TorusPolyline(np.column_stack([nx, ny]), pieces.comp, c.max_gap, False, T, tags, c.meta))
    if isinstance(system, HenonMap):
        return _step_nonlinear(system, c, forward)
    if isinstance(system, IdentityMap):
        return c
    raise TypeError(f"cannot grow curves for {type(system).__name__}")


def _step_nonlinear(system, c, forward, max_rounds=30):
    """Map vertices; refine in the source until image gaps are below max_gap."""
    f = system.forward if forward else system.backward
    src = c
    for _ in range(max_rounds):
        X, Y = f(src.vertices[:, 0], src.vertices[:, 1])
        img = np.column_stack([X, Y])
        d = np.hypot(*np.diff(img, axis=0).T)
        same = src.comp[1:] == src.comp[:-1]
        q = np.where(same, np.maximum(1, np.ceil(d / c.max_gap)).astype(np.int64), 1)
        if np.all(q == 1):
            T = None
            if src.tangents is not None:
                T = np.array([(system.jacobian(v) if forward else np.linalg.inv(system.jacobian(f(*v)))) @ t
                              for v, t in zip(src.vertices, src.tangents)])
                T /= np.linalg.norm(T, axis=1)[:, None]
            return TorusPolyline(img, src.comp, c.max_gap, False, T, src.tags, src.meta)
        # subdivide the source segments by the counts q
        src = _subdivide_counts(src, q)
    raise RuntimeError("nonlinear refinement did not converge")


def _subdivide_counts(c, q):
    V = c.vertex_count
    reps = np.concatenate([q, [1]])
    base = np.repeat(np.arange(V), reps)
    start = np.repeat(np.cumsum(reps) - reps, reps)
    frac = (np.arange(len(base)) - start) / reps[base]
    step = np.vstack([np.diff(c.vertices, axis=0), np.zeros((1, 2))])
    verts = c.vertices[base] + frac[:, None] * step[base]
    tans = c.tangents[base] if c.tangents is not None else None
    return TorusPolyline(verts, c.comp[base], c.max_gap, c.torus, tans, c.tags, c.meta)


def predicted_vertices(system, c: TorusPolyline, forward=True) -> int:
    """Vertex count after one linear step (exact for toral maps, an upper bound for the horseshoe)."""
    if isinstance(system, TorusAutomorphism):
        a, b = c.segments()
        M = system.A if forward else system.Ainv
        L = np.hypot(*((b - a) @ M.T).T)
        return int(np.maximum(1, np.ceil(L / c.max_gap - 1e-12)).sum()) + c.n_components
    return 0


def grow(system, curve: TorusPolyline, iterations: int, budget: int | None = None) -> TorusPolyline:
    """Image of ``curve`` under f^iterations (negative: f^-1), refined to its max_gap.

    Raises BudgetExceeded, carrying the last curve within budget, as soon as a
    step would produce more than ``budget`` vertices.
    """
    forward = iterations >= 0
    cur = curve
    for i in range(abs(iterations)):
        if budget is not None:
            need = predicted_vertices(system, cur, forward)
            if need > budget:
                raise BudgetExceeded(cur, i, budget, need)
        nxt = _step(system, cur, forward)
        if budget is not None and nxt.vertex_count > budget:
            raise BudgetExceeded(cur, i, budget, nxt.vertex_count)
        cur = nxt
    return cur


# intersections --------------------------------------------------------------

@dataclass
class Crossing:
    point: tuple
    angle: float
    arc_a: float
    arc_b: float
    seg_a: int
    seg_b: int
    comp_a: int
    comp_b: int
    lift_a: np.ndarray = field(repr=False)
    lift_b: np.ndarray = field(repr=False)

    @property
    def offset(self) -> tuple:
        """Integer vector lift_a - lift_b (torus curves)."""
        d = self.lift_a - self.lift_b
        return (int(round(d[0])), int(round(d[1])))


@dataclass
class IntersectionResult:
    records: list
    rejected: list
    merges: int
    candidates: int

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def as_tuples(self):
        return [(r.point, r.angle, r.arc_a, r.arc_b) for r in self.records]


def _cells(p0, p1, cell, ncell, torus):
    lo = np.floor(np.minimum(p0, p1) / cell).astype(np.int64)
    hi = np.floor(np.maximum(p0, p1) / cell).astype(np.int64)
    nx = hi[:, 0] - lo[:, 0] + 1
    ny = hi[:, 1] - lo[:, 1] + 1
    cnt = nx * ny
    idx = np.repeat(np.arange(len(p0)), cnt)
    start = np.repeat(np.cumsum(cnt) - cnt, cnt)
    j = np.arange(len(idx)) - start
    cx = lo[idx, 0] + j % nx[idx]
    cy = lo[idx, 1] + j // nx[idx]
    if torus:
        cx %= ncell
        cy %= ncell
        key = cx * ncell + cy
    else:
        key = (cx + (1 << 20)) * (1 << 21) + (cy + (1 << 20))
    return key, idx


def intersections(a: TorusPolyline, b: TorusPolyline, angle_min=ANGLE_MIN, dedup_tol=DEDUP_TOL,
                  slack=1e-12) -> IntersectionResult:
    """All crossings of the segments of a and b.

    Candidate pairs come from a uniform grid whose cell is at least the
    larger max_gap (torus cells wrap, and each candidate is tested against
    the 9 neighbouring lattice translates).  Parallel pairs never cross.
    Crossings closer than dedup_tol are merged, keeping the larger angle;
    crossings below angle_min are returned in ``rejected``.
    """
    torus = a.torus and b.torus
    ia, ib = a.seg_index, b.seg_index
    if len(ia) == 0 or len(ib) == 0:
        return IntersectionResult([], [], 0, 0)
    A0, A1 = a.vertices[ia], a.vertices[ia + 1]
    B0, B1 = b.vertices[ib], b.vertices[ib + 1]
    gap = max(a.max_gap, b.max_gap,
              float(np.hypot(*(A1 - A0).T).max()), float(np.hypot(*(B1 - B0).T).max()))
    if torus:
        ncell = max(1, int(math.floor(1.0 / gap)))
        cell = 1.0 / ncell
        fa = np.floor(A0)
        fb = np.floor(B0)
        ra0, ra1 = A0 - fa, A1 - fa
        rb0, rb1 = B0 - fb, B1 - fb
    else:
        ncell = 0
        cell = gap
        ra0, ra1, rb0, rb1 = A0, A1, B0, B1
    ka, sa = _cells(ra0, ra1, cell, ncell, torus)
    kb, sb = _cells(rb0, rb1, cell, ncell, torus)
    keep = np.isin(kb, ka)
    kb, sb = kb[keep], sb[keep]
    order = np.argsort(kb, kind="stable")
    kb, sb = kb[order], sb[order]
    lo = np.searchsorted(kb, ka, "left")
    hi = np.searchsorted(kb, ka, "right")
    cnt = hi - lo
    pa = np.repeat(sa, cnt)
    start = np.repeat(np.cumsum(cnt) - cnt, cnt)
    pb = sb[np.repeat(lo, cnt) + (np.arange(cnt.sum()) - start)]
    pair = np.unique(pa.astype(np.int64) * len(ib) + pb)
    pa, pb = pair // len(ib), pair % len(ib)
    trans = [(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)] if torus else [(0, 0)]
    hits = []
    da = ra1[pa] - ra0[pa]
    db = rb1[pb] - rb0[pb]
    cross = da[:, 0] * db[:, 1] - da[:, 1] * db[:, 0]
    na = np.hypot(*da.T)
    nb = np.hypot(*db.T)
    nonpar = np.abs(cross) > 1e-14 * na * nb
    for tx, ty in trans:
        w = rb0[pb] + np.array([tx, ty]) - ra0[pa]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = (w[:, 0] * db[:, 1] - w[:, 1] * db[:, 0]) / cross
            v = (w[:, 0] * da[:, 1] - w[:, 1] * da[:, 0]) / cross
        ok = nonpar & (u >= -slack) & (u <= 1 + slack) & (v >= -slack) & (v <= 1 + slack)
        for k in np.nonzero(ok)[0]:
            hits.append((pa[k], pb[k], min(max(u[k], 0.0), 1.0), min(max(v[k], 0.0), 1.0)))
    arc_a, arc_b = a.arc_param, b.arc_param
    recs = []
    for ka_, kb_, u, v in hits:
        sa_i, sb_i = ia[ka_], ib[kb_]
        la = a.vertices[sa_i] + u * (a.vertices[sa_i + 1] - a.vertices[sa_i])
        lb = b.vertices[sb_i] + v * (b.vertices[sb_i + 1] - b.vertices[sb_i])
        da_, db_ = a.vertices[sa_i + 1] - a.vertices[sa_i], b.vertices[sb_i + 1] - b.vertices[sb_i]
        ang = math.atan2(abs(da_[0] * db_[1] - da_[1] * db_[0]), abs(da_[0] * db_[0] + da_[1] * db_[1]))
        pt = np.mod(la, 1.0) if torus else la.copy()
        if torus:
            pt[pt >= 1.0] = 0.0
        recs.append(Crossing((float(pt[0]), float(pt[1])), ang,
                             float(arc_a[sa_i] + u * (arc_a[sa_i + 1] - arc_a[sa_i])),
                             float(arc_b[sb_i] + v * (arc_b[sb_i + 1] - arc_b[sb_i])),
                             int(sa_i), int(sb_i), int(a.comp[sa_i]), int(b.comp[sb_i]), la, lb))
    recs.sort(key=lambda r: (r.arc_a, r.arc_b))
    recs, merges = _dedup(recs, dedup_tol, torus)
    good = [r for r in recs if r.angle >= angle_min]
    bad = [r for r in recs if r.angle < angle_min]
    return IntersectionResult(good, bad, merges, len(pair))


def _dedup(recs, tol, torus):
    if len(recs) < 2:
        return recs, 0
    pts = np.array([r.point for r in recs])
    tree = cKDTree(pts, boxsize=1.0) if torus else cKDTree(pts)
    parent = list(range(len(recs)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in sorted(tree.query_pairs(tol)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups = {}
    for i in range(len(recs)):
        groups.setdefault(find(i), []).append(i)
    out = []
    for root in sorted(groups):
        members = groups[root]
        best = max(members, key=lambda i: (recs[i].angle, -i))
        out.append(recs[best])
    return out, len(recs) - len(out)


# orders ---------------------------------------------------------------------

@dataclass
class HomoclinicRecord:
    location: tuple
    theta_s: int
    theta_u: int
    angle: float
    arc_s: float
    arc_u: float
    lattice: tuple | None = None
    itinerary: SymbolicPoint | None = None


def _theta(c: float, eps: float, rate: float) -> int:
    """min n >= 0 with c * rate^-n <= eps."""
    if c <= eps:
        return 0
    n = max(0, math.ceil(math.log(c / eps) / math.log(rate)))
    while c / rate ** n > eps:
        n += 1
    while n > 0 and c / rate ** (n - 1) <= eps:
        n -= 1
    return n


def toral_coordinates(system: TorusAutomorphism, offset) -> tuple:
    """(t, s) with t v_u - s v_s = offset: the unstable coordinate of the point
    seen from W^u(p) and its stable coordinate seen from W^s(p)."""
    t, s = system.coords(np.asarray(offset, dtype=float))
    return float(t), float(-s)


def toral_orders(system: TorusAutomorphism, offset, eps) -> tuple:
    t, s = toral_coordinates(system, offset)
    return _theta(abs(s), eps, abs(1 / system.lam_s)), _theta(abs(t), eps, system.expansion)


def _horseshoe_orders(h: AffineHorseshoe, p, s: SymbolicPoint, eps, max_steps=400):
    """Orders by exact strip coordinates of sigma^n(s) against f^n(p)."""
    P = (Fraction(p[0]), Fraction(p[1]))
    e = Fraction(repr(float(eps)))

    def stable_at(n):
        z = point_from_itinerary(h, s.shift(n), exact=True)
        q = apply(h, P, n)
        return z[1] == q[1] and abs(z[0] - q[0]) <= e

    def unstable_at(n):
        z = point_from_itinerary(h, s.shift(-n), exact=True)
        q = apply(h, P, -n)
        return z[0] == q[0] and abs(z[1] - q[1]) <= e

    ts = next((n for n in range(max_steps) if stable_at(n)), None)
    tu = next((n for n in range(max_steps) if unstable_at(n)), None)
    if ts is None or tu is None:
        raise NotOnManifold("itinerary does not reach the local manifolds of p")
    return ts, tu


def _lattice_search(system, p, x, tol, radius):
    """Integer vectors k1, k2 with x - p - k1 on the unstable line and x - p - k2 on the stable line."""
    w = np.asarray(x, float) - _lift(p)
    found = []
    for normal_row in (1, 0):
        # coordinate along the other eigendirection must vanish
        F = system.eigenframe()[normal_row]
        c = float(F @ w)
        if abs(F[1]) < 1e-15:
            raise NotOnManifold("degenerate eigenframe")
        k1 = np.arange(-radius, radius + 1)
        k2 = np.round((c - k1 * F[0]) / F[1])
        r = np.abs(k1 * F[0] + k2 * F[1] - c)
        m = r <= tol
        if not m.any():
            raise NotOnManifold(f"no lattice translate puts x on the {'unstable' if normal_row else 'stable'} line")
        best = np.argmin(np.where(m, np.abs(k1) + np.abs(k2), np.inf))
        found.append((int(k1[best]), int(k2[best])))
    return found


def order_smooth(system, p, x, eps, tol=1e-9, search_radius=10 ** 6):
    """(theta_s, theta_u) of a homoclinic point x of p.

    ``x`` may be a HomoclinicRecord or Crossing (exact data is taken from
    it), a SymbolicPoint for the horseshoe, or a plain point.  Toral orders
    come from eigenframe coordinates of the lattice translates that place x
    on W^u(p) and W^s(p); horseshoe orders come from exact strip coordinates.
    """
    _check_eps(system, eps)
    if isinstance(system, TorusAutomorphism):
        if isinstance(x, HomoclinicRecord) and x.lattice is not None:
            return toral_orders(system, x.lattice, eps)
        if isinstance(x, Crossing):
            return toral_orders(system, x.offset, eps)
        pt = x.location if isinstance(x, HomoclinicRecord) else x
        k_u, k_s = _lattice_search(system, p, pt, tol, search_radius)
        w = np.asarray(pt, float) - _lift(p)
        t = float(system.coords(w - np.asarray(k_u, float))[0])
        s = float(system.coords(w - np.asarray(k_s, float))[1])
        if abs(t) < tol and abs(s) < tol:
            raise NotOnManifold("x coincides with p")
        return _theta(abs(s), eps, abs(1 / system.lam_s)), _theta(abs(t), eps, system.expansion)
    if isinstance(system, AffineHorseshoe):
        if isinstance(x, HomoclinicRecord):
            if x.itinerary is None:
                raise NotOnManifold("record carries no itinerary")
            x = x.itinerary
        if not isinstance(x, SymbolicPoint):
            raise NotOnManifold("horseshoe orders need the itinerary of x")
        return _horseshoe_orders(system, p, x, eps)
    raise TypeError(f"no smooth orders for {type(system).__name__}")


def _fixed_word(h: AffineHorseshoe, p):
    s = h.strip(Fraction(p[1]))
    if apply(h, (Fraction(p[0]), Fraction(p[1])), 1) != (Fraction(p[0]), Fraction(p[1])):
        raise ValueError("horseshoe censuses are implemented for fixed points")
    return (s,)


def census_smooth(system, p, eps, n_max, budget=10 ** 7, max_gap=DEFAULT_GAP,
                  angle_min=ANGLE_MIN, dedup_tol=DEDUP_TOL, n_min=0) -> CensusTable:
    """Counts of homoclinic points of p with orders (n, 0) for n_min <= n <= n_max.

    The local unstable manifold is intersected with f^-n of the stable
    fundamental domain.  ``budget`` caps the vertices of the grown piece; when
    it is hit the table stops at the last complete n and is flagged.
    """
    if not isinstance(system, (TorusAutomorphism, AffineHorseshoe)):
        raise TypeError("census_smooth needs a certified toral or horseshoe system")
    _check_eps(system, eps)
    if least_period(system, p) != 1:
        raise ValueError("census_smooth is implemented for fixed points")
    word = _fixed_word(system, p) if isinstance(system, AffineHorseshoe) else None
    wu = local_manifold(system, p, eps, "unstable", max_gap)
    piece = fundamental_domain(system, p, eps, "stable", max_gap)
    meta = {"system": getattr(system, "name", ""), "p": [str(c) for c in p], "eps": eps,
            "max_gap": max_gap, "dedup_tol": dedup_tol, "angle_min": angle_min, "budget": budget}
    seen = {}
    diag = {}
    complete = -1
    stop_reason = None
    for n in range(0, n_max + 1):
        if n > 0:
            try:
                piece = grow(system, piece, -1, budget)
            except BudgetExceeded as e:
                stop_reason = f"vertex budget {budget} exceeded growing n={n} (needs {e.needed})"
                break
        res = intersections(wu, piece, angle_min, dedup_tol)
        for cr in res.records:
            rec = _make_record(system, p, cr, piece, word, eps)
            key = rec.lattice if rec.lattice is not None else rec.itinerary
            seen.setdefault(key, rec)
        diag[n] = {"dedup_merges": res.merges, "rejected": len(res.rejected), "vertices": piece.vertex_count}
        complete = n
    recs = sorted((r for r in seen.values() if r.theta_u == 0 and r.theta_s <= complete),
                  key=lambda r: (r.theta_s, r.arc_u))
    table = CensusTable(metadata=meta)
    for n in range(n_min, complete + 1):
        at = [r for r in recs if r.theta_s == n]
        table.add(n, len(at), angle_min_observed=min((r.angle for r in at), default=None), **diag[n])
    if stop_reason:
        table.truncated = True
        table.metadata["truncated_reason"] = stop_reason
        table.metadata["complete_through"] = complete
    table.records = [r for r in recs if r.theta_s >= n_min]
    return table


def _make_record(system, p, cr: Crossing, piece, word, eps) -> HomoclinicRecord:
    if isinstance(system, TorusAutomorphism):
        off = cr.offset
        ts, tu = toral_orders(system, off, eps)
        return HomoclinicRecord(cr.point, ts, tu, cr.angle, cr.arc_b, cr.arc_a, lattice=off)
    tag = piece.tags[cr.comp_b]
    s = SymbolicPoint(word, tuple(tag), word, 0).canonical()
    ts, tu = _horseshoe_orders(system, p, s, eps)
    return HomoclinicRecord(cr.point, ts, tu, cr.angle, cr.arc_b, cr.arc_a, itinerary=s)


# homoclinic relation --------------------------------------------------------

@dataclass
class Relation:
    status: str
    forward: dict
    backward: dict

    @property
    def related(self) -> bool:
        return self.status == "related"

    def __bool__(self):
        return self.related


def _search_crossing(system, src, dst, eps, side, budget, max_iter, max_gap):
    """Grow the fundamental domain of src on ``side`` until it crosses the opposite local manifold of dst."""
    k = least_period(system, src)
    dom = fundamental_domain(system, src, eps, side, max_gap)
    target = local_manifold(system, dst, eps, "stable" if side == "unstable" else "unstable", max_gap)
    step = k if side == "unstable" else -k
    for it in range(0, max_iter + 1):
        if it > 0:
            try:
                dom = grow(system, dom, step, budget)
            except BudgetExceeded:
                return {"found": False, "iterations": it - 1, "reason": "budget"}
        res = intersections(dom, target)
        if res.records:
            r = res.records[0]
            return {"found": True, "iterations": it, "point": r.point, "angle": r.angle,
                    "vertices": dom.vertex_count}
    return {"found": False, "iterations": max_iter, "reason": "max_iter"}


def homoclinically_related(system, p, q, eps=0.1, budget=10 ** 6, max_iter=40, max_gap=DEFAULT_GAP) -> Relation:
    """``related`` when transverse crossings of W^u(p) with W^s(q) and of W^s(p) with W^u(q) are found.

    Anything else is ``not_found``: the search is inconclusive and never
    claims the points are unrelated.
    """
    _check_eps(system, eps)
    fwd = _search_crossing(system, p, q, eps, "unstable", budget, max_iter, max_gap)
    bwd = _search_crossing(system, p, q, eps, "stable", budget, max_iter, max_gap) if fwd["found"] else \
        {"found": False, "iterations": 0, "reason": "skipped"}
    return Relation("related" if fwd["found"] and bwd["found"] else "not_found", fwd, bwd)


# lambda-lemma ---------------------------------------------------------------

def tangent_convergence(system: TorusAutomorphism, seed: TorusPolyline, iterations: int, p=(0, 0),
                        eps=0.1, budget=10 ** 6) -> list:
    """Largest angle to v_u of the tangents of f^k(seed) inside the eps-window about p, k = 0..iterations.

    The window is taken in eigenframe coordinates of the lift relative to p;
    after every step the curve is clipped to twice the window so it stays
    small.  Tangents are pushed forward by the derivative, not recovered
    from vertex differences.  Steps with no vertex in the window give NaN.
    """
    if seed.tangents is None:
        raise ValueError("seed needs tangents (build it with segment())")
    base = _lift(p)
    F = system.eigenframe()

    def window_angle(c):
        tc = (c.vertices - base) @ F.T
        inside = (np.abs(tc[:, 0]) <= eps) & (np.abs(tc[:, 1]) <= eps)
        if not inside.any():
            return math.nan
        tt = c.tangents[inside] @ F.T
        return float(np.max(np.arctan2(np.abs(tt[:, 1]), np.abs(tt[:, 0]))))

    def clip(c):
        tc = (c.vertices - base) @ F.T
        near = (np.abs(tc[:, 0]) <= 2 * eps) & (np.abs(tc[:, 1]) <= 2 * eps)
        if near.all():
            return c
        keep = near.copy()
        keep[:-1] |= near[1:] & (c.comp[:-1] == c.comp[1:])
        keep[1:] |= near[:-1] & (c.comp[1:] == c.comp[:-1])
        # keeping isolated runs; re-number components so broken runs stay separate
        idx = np.nonzero(keep)[0]
        brk = np.concatenate([[True], (np.diff(idx) != 1) | (c.comp[idx[1:]] != c.comp[idx[:-1]])])
        comp = np.cumsum(brk) - 1
        return TorusPolyline(c.vertices[idx], comp, c.max_gap, c.torus, c.tangents[idx], (), c.meta)

    out = [window_angle(seed)]
    cur = clip(seed)
    for _ in range(iterations):
        cur = clip(grow(system, cur, 1, budget))
        out.append(window_angle(cur))
    return out
