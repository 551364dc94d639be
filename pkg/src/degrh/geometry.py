"""Splitting the domain along arcs that run between boundary points.

The boundary is a closed counterclockwise curve ``tau(t)``, ``t`` in
``[0, 2 pi)``.  Orbit arcs are non-crossing chords, so the faces can be
found combinatorially: walk counterclockwise along the boundary until an
arc end point is reached, follow the arc to its partner end point and keep
walking.  Each face comes out with an ordered boundary word
``[A_1, G_1, ..., A_m, G_m]`` oriented like the outer boundary.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

TWO_PI = 2.0 * np.pi
GEOM_TOL = 1e-10
ENDPOINT_TOL = 1e-6
TRANSVERSAL_TOL = 1e-3
MIN_ORBIT_SAMPLES = 256


class GeometryError(ValueError):
    pass


# --------------------------------------------------------------------------
# domain


class DomainSpec:
    """Smooth Jordan domain given by a counterclockwise boundary parametrisation."""

    def __init__(self, tau: Callable, t0: float = 0.0, n_samples: int = 2048, kind: str = "curve", meta=None):
        self._tau = tau
        self.t0 = float(t0) % TWO_PI
        self.kind = kind
        self.meta = meta or {}
        t = np.linspace(0.0, TWO_PI, n_samples, endpoint=False)
        self.sample_t = t
        self.samples = self.point(t)
        p0, p1 = self.point(np.array([0.0, TWO_PI]))
        if np.hypot(*(p0 - p1)) > 1e-8:
            raise GeometryError("boundary curve is not closed")
        if self.signed_area() <= 0:
            raise GeometryError("boundary must be counterclockwise (positive signed area)")
        if not _polygon_is_simple(self.samples):
            raise GeometryError("boundary curve self-intersects")
        d = self.samples[:, None, :] - self.samples[None, ::8, :]
        self.diameter = float(np.sqrt((d**2).sum(-1)).max())

    # constructors -----------------------------------------------------
    @classmethod
    def circle(cls, center=(0.0, 0.0), radius=1.0, t0=0.0):
        cx, cy = center

        def tau(t):
            t = np.asarray(t, dtype=float)
            return np.stack([cx + radius * np.cos(t), cy + radius * np.sin(t)], axis=-1)

        return cls(tau, t0=t0, kind="circle", meta={"center": [cx, cy], "radius": radius})

    @classmethod
    def parametric(cls, fx: Callable, fy: Callable, t0=0.0):
        def tau(t):
            t = np.asarray(t, dtype=float)
            return np.stack([np.real(fx(t)), np.real(fy(t))], axis=-1).astype(float)

        return cls(tau, t0=t0, kind="parametric")

    @classmethod
    def from_samples(cls, points, t0=0.0):
        """Periodic cubic spline through closed-curve samples (uniform parameter)."""
        pts = np.asarray(points, dtype=float)
        if np.hypot(*(pts[0] - pts[-1])) < 1e-12:
            pts = pts[:-1]
        n = len(pts)
        if n < 8:
            raise GeometryError("need at least 8 boundary samples")
        s = np.linspace(0.0, TWO_PI, n + 1)
        spl = CubicSpline(s, np.vstack([pts, pts[:1]]), bc_type="periodic")

        def tau(t):
            return spl(np.mod(np.asarray(t, dtype=float), TWO_PI))

        return cls(tau, t0=t0, kind="samples")

    # evaluation -------------------------------------------------------
    def point(self, t):
        return np.asarray(self._tau(np.asarray(t, dtype=float)), dtype=float)

    def complex_point(self, t):
        p = self.point(t)
        return p[..., 0] + 1j * p[..., 1]

    def tangent(self, t, h=1e-6):
        return (self.point(np.asarray(t) + h) - self.point(np.asarray(t) - h)) / (2 * h)

    def signed_area(self):
        x, y = self.samples[:, 0], self.samples[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def param_of(self, p) -> float:
        """Boundary parameter of the boundary point closest to ``p``."""
        p = np.asarray(p, dtype=float)
        d = np.hypot(*(self.samples - p).T)
        k = int(np.argmin(d))
        h = TWO_PI / len(self.sample_t)
        t0 = self.sample_t[k]
        res = minimize_scalar(
            lambda t: float(np.sum((self.point(t) - p) ** 2)),
            bounds=(t0 - 2 * h, t0 + 2 * h),
            method="bounded",
            options={"xatol": 1e-14},
        )
        t = float(res.x)
        # Newton polish on (tau(t) - p) . tau'(t) = 0
        for _ in range(4):
            d = self.point(t) - p
            tp = self.tangent(t, 1e-5)
            tpp = (self.point(t + 1e-4) - 2 * self.point(t) + self.point(t - 1e-4)) / 1e-8
            g = float(d @ tp)
            dg = float(tp @ tp + d @ tpp)
            if dg <= 0:
                break
            step = g / dg
            t -= step
            if abs(step) < 1e-15:
                break
        return t % TWO_PI

    def distance_to_boundary(self, p) -> float:
        t = self.param_of(p)
        return float(np.hypot(*(self.point(t) - np.asarray(p, float))))

    def contains(self, pts):
        return points_in_polygon(np.asarray(pts, dtype=float).reshape(-1, 2), self.samples)

    def rel(self, t):
        """Parameter measured from the base point, in [0, 2 pi)."""
        return np.mod(np.asarray(t, dtype=float) - self.t0, TWO_PI)


# --------------------------------------------------------------------------
# orbit arcs


@dataclass
class OrbitArc:
    """An orbit connecting two boundary points; ``curve(s)``, s in [0, 1]."""

    id: int
    curve: Callable
    n_samples: int = MIN_ORBIT_SAMPLES
    t_start: float = float("nan")
    t_end: float = float("nan")
    polyline: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        n = max(int(self.n_samples), MIN_ORBIT_SAMPLES)
        s = np.linspace(0.0, 1.0, n)
        self.polyline = np.asarray(self.curve(s), dtype=float).reshape(n, 2)

    @classmethod
    def segment(cls, id, a, b, n_samples=MIN_ORBIT_SAMPLES):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)

        def curve(s):
            s = np.asarray(s, dtype=float)[..., None]
            return a + s * (b - a)

        return cls(id, curve, n_samples)

    @classmethod
    def from_polyline(cls, id, points):
        pts = np.asarray(points, dtype=float)
        seg = np.hypot(*np.diff(pts, axis=0).T)
        s_nodes = np.concatenate([[0.0], np.cumsum(seg)]) / seg.sum()

        def curve(s):
            s = np.asarray(s, dtype=float)
            return np.stack([np.interp(s, s_nodes, pts[:, 0]), np.interp(s, s_nodes, pts[:, 1])], axis=-1)

        return cls(id, curve, max(len(pts), MIN_ORBIT_SAMPLES))

    def point(self, s):
        return np.asarray(self.curve(np.asarray(s, dtype=float)), dtype=float)

    def tangent(self, s, h=1e-6):
        s = np.clip(np.asarray(s, dtype=float), h, 1 - h)
        return (self.point(s + h) - self.point(s - h)) / (2 * h)

    def xy(self, s):
        p = self.point(s)
        return p[..., 0], p[..., 1]


# --------------------------------------------------------------------------
# decomposition data


@dataclass
class BoundaryArc:
    """Boundary sub-arc ``u in [u0, u1]`` measured from the base point (u1 may exceed 2 pi)."""

    u0: float
    u1: float

    def t(self, t0):
        return (t0 + self.u0) % TWO_PI, (t0 + self.u1) % TWO_PI


@dataclass
class OrbitRef:
    """An orbit in a boundary word, traversed from ``start`` to ``end`` ('a' = s=0, 'b' = s=1)."""

    orbit: int  # index into Decomposition.orbits
    start: str
    end: str


@dataclass
class Component:
    id: int
    word: list  # alternating BoundaryArc, OrbitRef
    orientation: str = "preserved"  # or "reversed"
    polygon: np.ndarray = field(default=None, repr=False)
    closed_orbits: list = field(default_factory=list)

    @property
    def arcs(self):
        return [w for w in self.word if isinstance(w, BoundaryArc)]

    @property
    def orbit_refs(self):
        return [w for w in self.word if isinstance(w, OrbitRef)]

    @property
    def m(self):
        return len(self.orbit_refs)


@dataclass
class OrbitInfo:
    """Per-orbit bookkeeping: incident components and ordered ends."""

    index: int
    arc: OrbitArc
    components: tuple  # (preserved side id, reversed side id) once oriented
    minus: str  # 'a' or 'b': end playing p^- seen from the preserved side
    plus: str

    def end_param(self, which: str):
        return self.arc.t_start if which == "a" else self.arc.t_end

    @property
    def t_minus(self):
        return self.end_param(self.minus)

    @property
    def t_plus(self):
        return self.end_param(self.plus)


@dataclass
class Decomposition:
    domain: DomainSpec
    orbits: list  # OrbitInfo
    components: list  # Component, components[0] is the base component
    closed_orbits: list = field(default_factory=list)

    @property
    def N(self):
        return len(self.orbits)

    def component(self, cid: int) -> Component:
        for c in self.components:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def adjacency(self):
        adj = {c.id: [] for c in self.components}
        for o in self.orbits:
            a, b = o.components
            adj[a].append((b, o.index))
            adj[b].append((a, o.index))
        return adj

    def orientation(self, cid):
        return self.component(cid).orientation

    def component_of(self, p, tol=1e-9):
        return component_of(self, p, tol)

    def sample_interior(self, cid, n=40, margin=None):
        """Lattice points strictly inside a component, at least ``margin`` from its boundary."""
        comp = self.component(cid)
        poly = comp.polygon
        if margin is None:
            margin = 1e-3 * self.domain.diameter
        lo, hi = poly.min(0), poly.max(0)
        gx = np.linspace(lo[0], hi[0], n + 2)[1:-1]
        gy = np.linspace(lo[1], hi[1], n + 2)[1:-1]
        X, Y = np.meshgrid(gx, gy)
        pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
        inside = points_in_polygon(pts, poly)
        pts = pts[inside]
        if len(pts):
            d = polygon_distance(pts, poly)
            pts = pts[d > margin]
        return pts

    def interior_anchor(self, cid):
        """A deterministic deep interior point (approximate centre of the largest inscribed disk)."""
        comp = self.component(cid)
        pts = self.sample_interior(cid, n=60, margin=0.0)
        if len(pts) == 0:
            raise GeometryError(f"component {cid} has no interior samples")
        d = polygon_distance(pts, comp.polygon)
        return pts[int(np.argmax(d))]

    def euler_characteristic(self):
        if self.N == 0:
            return 1 - 1 + 2  # one vertex/edge loop, inner + outer face
        V = 2 * self.N
        E = 2 * self.N + self.N
        F = len(self.components) + 1
        return V - E + F


# --------------------------------------------------------------------------
# predicates


def _orient(a, b, c):
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])


def segments_intersect(p, q, tol=GEOM_TOL):
    """Any proper intersection between the segments of polylines ``p`` and ``q``."""
    a0, a1 = p[:-1][:, None, :], p[1:][:, None, :]
    b0, b1 = q[:-1][None, :, :], q[1:][None, :, :]
    d1 = _orient(a0, a1, b0)
    d2 = _orient(a0, a1, b1)
    d3 = _orient(b0, b1, a0)
    d4 = _orient(b0, b1, a1)
    hit = (d1 * d2 < -tol * tol) & (d3 * d4 < -tol * tol)
    return bool(np.any(hit))


def _polygon_is_simple(poly, stride=4):
    p = poly[::stride]
    p = np.vstack([p, p[:1]])
    n = len(p) - 1
    a0, a1 = p[:-1], p[1:]
    d1 = _orient(a0[:, None], a1[:, None], a0[None])
    d2 = _orient(a0[:, None], a1[:, None], a1[None])
    d3 = _orient(a0[None], a1[None], a0[:, None])
    d4 = _orient(a0[None], a1[None], a1[:, None])
    hit = (d1 * d2 < 0) & (d3 * d4 < 0)
    idx = np.arange(n)
    near = np.abs(idx[:, None] - idx[None, :])
    near = np.minimum(near, n - near) <= 1
    return not bool(np.any(hit & ~near))


def points_in_polygon(pts, poly):
    """Even-odd ray casting, vectorised over points."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    x, y = pts[:, 0:1], pts[:, 1:2]
    xa, ya = poly[:, 0][None, :], poly[:, 1][None, :]
    xb, yb = np.roll(poly[:, 0], -1)[None, :], np.roll(poly[:, 1], -1)[None, :]
    out = np.zeros(len(pts), dtype=bool)
    chunk = max(1, 2_000_000 // max(len(poly), 1))
    for s in range(0, len(pts), chunk):
        xs, ys = x[s : s + chunk], y[s : s + chunk]
        cond = (ya > ys) != (yb > ys)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = xa + (ys - ya) * (xb - xa) / (yb - ya)
        out[s : s + chunk] = (np.sum(cond & (xs < xint), axis=1) % 2) == 1
    return out


def winding_numbers(pts, poly):
    """Winding number of a closed polygon around each point (independent locator)."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    z = pts[:, 0] + 1j * pts[:, 1]
    w = poly[:, 0] + 1j * poly[:, 1]
    d = w[None, :] - z[:, None]
    ang = np.angle(np.roll(d, -1, axis=1) / d)
    return np.rint(ang.sum(axis=1) / TWO_PI).astype(int)


def polygon_distance(pts, poly):
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    a = poly
    b = np.roll(poly, -1, axis=0)
    out = np.empty(len(pts))
    chunk = max(1, 2_000_000 // max(len(poly), 1))
    for s in range(0, len(pts), chunk):
        p = pts[s : s + chunk][:, None, :]
        ab = b - a
        t = np.clip(np.sum((p - a) * ab, -1) / np.maximum(np.sum(ab * ab, -1), 1e-300), 0, 1)
        proj = a + t[..., None] * ab
        out[s : s + chunk] = np.sqrt(np.min(np.sum((p - proj) ** 2, -1), axis=1))
    return out


# --------------------------------------------------------------------------
# decomposition


def _validate_orbit(domain: DomainSpec, arc: OrbitArc):
    ends = arc.point(np.array([0.0, 1.0]))
    params = []
    for e in ends:
        t = domain.param_of(e)
        if np.hypot(*(domain.point(t) - e)) > ENDPOINT_TOL * max(1.0, domain.diameter):
            raise GeometryError(f"orbit {arc.id}: end point {e.tolist()} is not on the boundary")
        params.append(t)
    arc.t_start, arc.t_end = params
    inner = arc.polyline[1:-1]
    inside = domain.contains(inner)
    if not np.all(inside):
        raise GeometryError(f"orbit {arc.id}: interior leaves the domain")
    for s, t in ((0.0, params[0]), (1.0, params[1])):
        to = arc.tangent(np.array([s]))[0]
        tb = domain.tangent(np.array([t]))[0]
        sin = abs(to[0] * tb[1] - to[1] * tb[0]) / (np.hypot(*to) * np.hypot(*tb))
        if sin < TRANSVERSAL_TOL:
            raise GeometryError(f"orbit {arc.id} is tangent to the boundary at t={t:.6g}")


def decompose(domain: DomainSpec, orbits: Sequence[OrbitArc], reference=None, closed_orbits=()) -> Decomposition:
    """Faces of the subdivision of the domain by non-crossing orbit arcs.

    The component whose boundary contains the base point ``tau(t0)`` gets id
    1; the others are numbered breadth first.  Orientation flags are a
    2-colouring of the adjacency tree anchored at ``reference`` (component
    id, flag), by default ``(1, "preserved")``.
    """
    orbits = list(orbits)
    for arc in orbits:
        _validate_orbit(domain, arc)
    N = len(orbits)
    tol = ENDPOINT_TOL * max(1.0, domain.diameter)

    # end points in relative boundary order
    ends = []
    for k, arc in enumerate(orbits):
        ends.append((float(domain.rel(arc.t_start)), k, "a"))
        ends.append((float(domain.rel(arc.t_end)), k, "b"))
    ends.sort()
    if N:
        u = np.array([e[0] for e in ends])
        gaps = np.diff(np.concatenate([u, [u[0] + TWO_PI]]))
        if np.min(gaps) * domain.diameter < tol:
            raise GeometryError("orbit end points coincide")
        if min(u[0], TWO_PI - u[-1]) * domain.diameter < tol:
            raise GeometryError("base point s0 lies on an orbit end point")

    # crossing checks, combinatorial then geometric
    pos = {(k, w): i for i, (_, k, w) in enumerate(ends)}
    for i in range(N):
        a, b = sorted((pos[(i, "a")], pos[(i, "b")]))
        for j in range(i + 1, N):
            c, d = pos[(j, "a")], pos[(j, "b")]
            if (a < c < b) != (a < d < b):
                raise GeometryError(f"orbits {orbits[i].id} and {orbits[j].id} intersect")
            if segments_intersect(orbits[i].polyline, orbits[j].polyline):
                raise GeometryError(f"orbits {orbits[i].id} and {orbits[j].id} intersect")

    # face walk over boundary arcs; arc i runs from ends[i] to ends[i+1]
    if N == 0:
        faces = [[BoundaryArc(0.0, TWO_PI)]]
    else:
        n = len(ends)
        visited = [False] * n
        faces = []
        # start with the arc over the base point (from the last end to the first)
        order = [n - 1] + list(range(n - 1))
        for start in order:
            if visited[start]:
                continue
            word = []
            i = start
            while not visited[i]:
                visited[i] = True
                u0 = ends[i][0]
                u1 = ends[(i + 1) % n][0] + (TWO_PI if i == n - 1 else 0.0)
                word.append(BoundaryArc(u0, u1))
                _, k, w = ends[(i + 1) % n]
                other = "b" if w == "a" else "a"
                word.append(OrbitRef(k, w, other))
                i = pos[(k, other)]
            faces.append(word)
    if len(faces) != N + 1:
        raise GeometryError(f"expected {N + 1} components, found {len(faces)}")

    # adjacency: orbit -> faces
    inc = {k: [] for k in range(N)}
    for f, word in enumerate(faces):
        for w in word:
            if isinstance(w, OrbitRef):
                inc[w.orbit].append(f)
    for k, fs in inc.items():
        if len(fs) != 2 or fs[0] == fs[1]:
            raise GeometryError(f"orbit {orbits[k].id} does not separate two components")

    # breadth-first numbering from the base face (face 0 holds the base point)
    fid = {0: 1}
    queue = deque([0])
    while queue:
        f = queue.popleft()
        for w in faces[f]:
            if isinstance(w, OrbitRef):
                g = [x for x in inc[w.orbit] if x != f][0]
                if g not in fid:
                    fid[g] = len(fid) + 1
                    queue.append(g)
    if len(fid) != len(faces):
        raise GeometryError("adjacency graph is not connected")

    comps = []
    for f, word in enumerate(faces):
        c = Component(fid[f], word)
        c.polygon = _face_polygon(domain, orbits, word)
        comps.append(c)
    comps.sort(key=lambda c: c.id)

    infos = []
    for k, arc in enumerate(orbits):
        a, b = (fid[f] for f in inc[k])
        infos.append(OrbitInfo(k, arc, (a, b), "a", "b"))
    dec = Decomposition(domain, infos, comps, list(closed_orbits))
    assign_orientations(dec, reference or (1, "preserved"))
    return dec


def _face_polygon(domain: DomainSpec, orbits, word, n_per_radian=64):
    pts = []
    for w in word:
        if isinstance(w, BoundaryArc):
            n = max(8, int(np.ceil((w.u1 - w.u0) * n_per_radian)))
            u = np.linspace(w.u0, w.u1, n)
            pts.append(domain.point(domain.t0 + u)[:-1])
        else:
            poly = orbits[w.orbit].polyline
            if w.start == "b":
                poly = poly[::-1]
            pts.append(poly[:-1])
    return np.vstack(pts)


def assign_orientations(dec: Decomposition, reference=(1, "preserved")) -> Decomposition:
    """Proper 2-colouring of the adjacency tree; also fixes p^-/p^+ of each orbit."""
    ref_id, ref_flag = reference
    if ref_flag not in ("preserved", "reversed"):
        raise ValueError(f"bad orientation flag {ref_flag!r}")
    other = {"preserved": "reversed", "reversed": "preserved"}
    adj = dec.adjacency()
    flags = {ref_id: ref_flag}
    queue = deque([ref_id])
    while queue:
        c = queue.popleft()
        for d, _ in adj[c]:
            if d not in flags:
                flags[d] = other[flags[c]]
                queue.append(d)
            elif flags[d] == flags[c]:
                raise GeometryError("adjacency graph is not 2-colourable")
    for comp in dec.components:
        comp.orientation = flags[comp.id]
    for o in dec.orbits:
        a, b = o.components
        pres = a if flags[a] == "preserved" else b
        rev = b if pres == a else a
        o.components = (pres, rev)
        # on the preserved side the walk arrives at p^- and leaves along the orbit to p^+
        for w in dec.component(pres).orbit_refs:
            if w.orbit == o.index:
                o.minus, o.plus = w.start, w.end
    return dec


def component_of(dec: Decomposition, p, tol=1e-9) -> int:
    p = np.asarray(p, dtype=float).reshape(1, 2)
    scale = max(1.0, dec.domain.diameter)
    if not dec.domain.contains(p)[0] or dec.domain.distance_to_boundary(p[0]) < tol * scale:
        raise GeometryError(f"point {p[0].tolist()} is not inside the domain")
    for o in dec.orbits:
        if polygon_distance(p, o.arc.polyline)[0] < tol * scale or _on_polyline(p[0], o.arc.polyline, tol * scale):
            raise GeometryError(f"point {p[0].tolist()} lies on orbit {o.arc.id}")
    for c in dec.components:
        if points_in_polygon(p, c.polygon)[0]:
            return c.id
    raise GeometryError(f"point {p[0].tolist()} not located")


def _on_polyline(p, poly, tol):
    a, b = poly[:-1], poly[1:]
    ab = b - a
    t = np.clip(np.sum((p - a) * ab, -1) / np.maximum(np.sum(ab * ab, -1), 1e-300), 0, 1)
    proj = a + t[:, None] * ab
    return bool(np.min(np.hypot(*(proj - p).T)) < tol)


def relabel_base(dec: Decomposition, t0: float) -> Decomposition:
    """Rebuild the decomposition around a new base point ``tau(t0)``.

    Fails when the component holding the new base point carries the reversed
    flag, since the base component must be orientation preserving.
    """
    domain = dec.domain
    t0 = float(t0) % TWO_PI
    for o in dec.orbits:
        for t in (o.arc.t_start, o.arc.t_end):
            d = abs((t - t0 + np.pi) % TWO_PI - np.pi)
            if d * domain.diameter < ENDPOINT_TOL:
                raise GeometryError("new base point is an orbit end point")
    # locate the old component whose boundary arcs contain t0
    u = float(domain.rel(t0))
    hit = None
    for c in dec.components:
        for a in c.arcs:
            if a.u0 <= u <= a.u1 or a.u0 <= u + TWO_PI <= a.u1:
                hit = c
    if hit is None:
        raise GeometryError("base point not on any boundary arc")
    if hit.orientation != "preserved":
        raise GeometryError(
            f"the component containing tau({t0:.6g}) is orientation reversed by first integrals; "
            "choose a base point on the boundary of an orientation-preserved component"
        )
    new_domain = DomainSpec(domain._tau, t0=t0, kind=domain.kind, meta=domain.meta)
    return decompose(new_domain, [o.arc for o in dec.orbits], closed_orbits=dec.closed_orbits)
