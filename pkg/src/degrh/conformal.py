"""Numerical disk maps of Jordan domains and the first-integral atlas.

A map of a Jordan domain D onto the unit disk with f(p*) = 0 is written
``f(z) = (z - p*) exp(Phi(z))`` with Phi holomorphic and
``Re Phi = -log|z - p*|`` on the boundary.  Phi is the Cauchy integral of a
real density solving the interior double-layer equation, discretised by
Nystrom on Gauss-Legendre panels.  Panels are graded geometrically towards
corners, which is where orbits collapse under the global first integral.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import legendre as npleg

from .geometry import TWO_PI, BoundaryArc, Decomposition, OrbitRef, _polygon_is_simple, points_in_polygon

log = logging.getLogger(__name__)

N_GAUSS = 16
GRADING_DEPTH = 12
BOUNDARY_TOL = 1e-6
AGREE_TOL = 1e-6


class ConformalError(ValueError):
    pass


def _gauss(n):
    x, w = npleg.leggauss(n)
    V = npleg.legvander(x, n - 1)
    Vinv = np.linalg.inv(V)
    dV = np.zeros_like(V)
    for k in range(n):
        c = np.zeros(n)
        c[k] = 1.0
        dV[:, k] = npleg.legval(x, npleg.legder(c))
    return x, w, Vinv, dV @ Vinv


_RULES = {}


def gauss_rule(n=N_GAUSS):
    if n not in _RULES:
        _RULES[n] = _gauss(n)
    return _RULES[n]


def graded_breaks(n_mid: int, depth: int, grade_start: bool, grade_end: bool):
    """Panel breakpoints on [0, 1], halving towards graded ends."""
    b = list(np.linspace(0.0, 1.0, n_mid + 1))
    h = 1.0 / n_mid
    if grade_start and depth:
        b = [0.0] + [h * 2.0**-k for k in range(depth, 0, -1)] + b[1:]
    if grade_end and depth:
        b = b[:-1] + [1.0 - h * 2.0**-k for k in range(1, depth + 1)] + [1.0]
    return np.array(sorted(set(b)))


@dataclass
class Segment:
    """Smooth boundary piece ``fn(t)`` for t running linearly from ``ta`` to ``tb``."""

    fn: Callable
    ta: float
    tb: float

    def t_of_u(self, u):
        return self.ta + (self.tb - self.ta) * np.asarray(u, dtype=float)

    def u_of_t(self, t):
        return (np.asarray(t, dtype=float) - self.ta) / (self.tb - self.ta)

    def reversed(self):
        return Segment(self.fn, self.tb, self.ta)


class PanelCurve:
    """Gauss-Legendre panel discretisation of a closed chain of segments."""

    def __init__(self, segments, n_gauss=N_GAUSS, n_mid=16, depth=GRADING_DEPTH, corners=True):
        self.segments = list(segments)
        x, w, _, D = gauss_rule(n_gauss)
        self.n_gauss = n_gauss
        seg_id, panel_a, panel_b = [], [], []
        for s in range(len(self.segments)):
            br = graded_breaks(n_mid, depth if corners else 0, corners, corners)
            seg_id += [s] * (len(br) - 1)
            panel_a += list(br[:-1])
            panel_b += list(br[1:])
        self.panel_seg = np.array(seg_id)
        self.panel_a = np.array(panel_a)
        self.panel_b = np.array(panel_b)
        P = len(self.panel_a)
        half = 0.5 * (self.panel_b - self.panel_a)
        self.u = (0.5 * (self.panel_a + self.panel_b))[:, None] + half[:, None] * x[None, :]
        self.w = half[:, None] * w[None, :]
        self.z = np.empty((P, n_gauss), dtype=complex)
        for p in range(P):
            seg = self.segments[self.panel_seg[p]]
            self.z[p] = np.asarray(seg.fn(seg.t_of_u(self.u[p])), dtype=complex)
        # spectral derivatives in u, panel by panel
        self.D = D
        self.dz = (self.z @ D.T) / half[:, None]
        self.ddz = (self.dz @ D.T) / half[:, None]
        self.half = half
        if np.any(np.abs(self.dz) < 1e-14):
            raise ConformalError("degenerate boundary parametrisation")

    @property
    def n_panels(self):
        return len(self.panel_a)

    def flat(self, a):
        return np.asarray(a).reshape(-1)

    def panel_length(self):
        return np.sum(np.abs(self.dz) * self.w, axis=1)

    def locate(self, seg, u):
        """Panel index holding local parameter u of segment seg."""
        idx = np.nonzero(self.panel_seg == seg)[0]
        a = self.panel_a[idx]
        k = np.clip(np.searchsorted(a, u, side="right") - 1, 0, len(idx) - 1)
        return idx[k]

    def interp(self, values, seg, u):
        """Legendre interpolation of nodal values at (seg, u); u may be an array."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        _, _, Vinv, _ = gauss_rule(self.n_gauss)
        out = np.empty(u.shape, dtype=np.result_type(values, float))
        panels = self.locate(seg, u)
        for p in np.unique(panels):
            m = panels == p
            coef = Vinv @ values[p]
            xloc = (u[m] - 0.5 * (self.panel_a[p] + self.panel_b[p])) / self.half[p]
            out[m] = npleg.legval(xloc, coef)
        return out


class ConformalMap:
    """Holomorphic map of a Jordan domain onto the unit disk, f(p*) = 0, f'(p*) > 0."""

    def __init__(self, segments, p_star: complex, orientation="preserved", corners=True,
                 n_gauss=N_GAUSS, n_mid=None, depth=GRADING_DEPTH, min_nodes=1024):
        segs = list(segments)
        if orientation == "reversed":
            segs = [s.reversed() for s in segs[::-1]]
        elif orientation != "preserved":
            raise ValueError(f"bad orientation {orientation!r}")
        self.orientation = orientation
        self.p_star = complex(p_star)
        nseg = len(segs)
        if n_mid is None:
            per_seg = int(np.ceil(min_nodes / (n_gauss * nseg)))
            n_mid = max(8, per_seg - (2 * depth if corners else 0))
        self.curve = c = PanelCurve(segs, n_gauss, n_mid, depth, corners)

        zf, dzf, ddzf, wf = (c.flat(a) for a in (c.z, c.dz, c.ddz, c.w))
        poly = zf
        pts = np.stack([poly.real, poly.imag], -1)
        area = 0.5 * np.sum(pts[:, 0] * np.roll(pts[:, 1], -1) - np.roll(pts[:, 0], -1) * pts[:, 1])
        if area <= 0:
            raise ConformalError("boundary walk is not counterclockwise for the requested orientation")
        if not _polygon_is_simple(pts, stride=1):
            raise ConformalError("image boundary self-intersects")
        self.polygon = pts
        self.scale = float(np.max(np.abs(zf - zf.mean())))
        if not points_in_polygon(np.array([[self.p_star.real, self.p_star.imag]]), pts)[0]:
            raise ConformalError("normalisation point is not inside the domain")
        if np.min(np.abs(zf - self.p_star)) < 1e-3 * 2 * self.scale:
            raise ConformalError("normalisation point too close to the boundary")

        # interior double-layer equation (1/2 + K) mu = -log|z - p*|, in the
        # subtracted form mu_i + sum_j K_ij (mu_j - mu_i) = g_i that uses K 1 = 1/2
        # exactly; this keeps nodes next to corners accurate.
        n = len(zf)
        diff = zf[None, :] - zf[:, None]
        np.fill_diagonal(diff, 1.0)
        K = np.imag(dzf[None, :] / diff) * wf[None, :] / TWO_PI
        np.fill_diagonal(K, 0.0)
        A = np.eye(n) + K - np.diag(K.sum(axis=1))
        g = -np.log(np.abs(zf - self.p_star))
        mu = np.linalg.solve(A, g)
        self.mu = mu.reshape(c.z.shape)
        self._mu = mu
        self._zf, self._dzf, self._wf = zf, dzf, wf
        self.residual = float(np.max(np.abs(A @ mu - g)))

        # rotation so that f'(p*) > 0
        self._rot = 0.0
        phi0 = self._phi(np.array([self.p_star]))[0]
        self._rot = -phi0.imag

        # boundary values at nodes from the subtracted Cauchy integral
        dmu = ((self.mu @ c.D.T) / c.half[:, None]).reshape(-1)
        S = (mu[None, :] - mu[:, None]) * (dzf * wf)[None, :] / diff
        np.fill_diagonal(S, dmu * wf)
        phib = mu + S.sum(axis=1) / (2j * np.pi)
        fb = (zf - self.p_star) * np.exp(phib + 1j * self._rot)
        self.boundary_modulus_defect = float(np.max(np.abs(np.abs(fb) - 1.0)))
        theta = np.unwrap(np.angle(fb))
        total = theta[-1] - theta[0]
        if abs(total - TWO_PI) > 0.5:
            raise ConformalError(f"boundary correspondence does not wind once ({total / TWO_PI:.3f})")
        theta -= TWO_PI * np.floor(theta[0] / TWO_PI)
        self.theta = theta.reshape(c.z.shape)
        self.fb = fb.reshape(c.z.shape)
        dth = np.diff(theta)
        # corner panels are nearly flat; allow roundoff-level wiggles there
        if np.any(dth < -1e-4):
            raise ConformalError("boundary correspondence is not monotone")

    # ------------------------------------------------------------------
    def _phi(self, z, subtract=True):
        z = np.asarray(z, dtype=complex).reshape(-1)
        zf, dzf, wf, mu = self._zf, self._dzf, self._wf, self._mu
        out = np.empty(len(z), dtype=complex)
        chunk = max(1, 4_000_000 // len(zf))
        for s in range(0, len(z), chunk):
            zz = z[s : s + chunk]
            d = zf[None, :] - zz[:, None]
            k = np.argmin(np.abs(d), axis=1)
            mstar = mu[k] if subtract else np.zeros(len(zz))
            val = ((mu[None, :] - mstar[:, None]) * (dzf * wf)[None, :] / d).sum(axis=1) / (2j * np.pi)
            val = self._near_correction(zz, mstar, val)
            out[s : s + chunk] = mstar + val
        return out + 1j * self._rot

    def _near_correction(self, zz, mstar, val):
        """Replace contributions of panels close to a target by refined quadrature.

        Each near panel is split geometrically towards the target's projection
        onto it, so every piece is about as long as its distance to the target.
        """
        c = self.curve
        plen = c.panel_length()
        for p in range(c.n_panels):
            dist = np.min(np.abs(c.z[p][None, :] - zz[:, None]), axis=1)
            near = dist < 1.5 * plen[p]
            if not np.any(near):
                continue
            idx = np.nonzero(near)[0]
            coarse = (
                (self.mu[p][None, :] - mstar[idx][:, None]) * (c.dz[p] * c.w[p])[None, :]
                / (c.z[p][None, :] - zz[idx][:, None])
            ).sum(1)
            fine = np.concatenate([self._graded(p, zz[idx[i:i + 64]], mstar[idx[i:i + 64]])
                                   for i in range(0, len(idx), 64)])
            val[idx] += (fine - coarse) / (2j * np.pi)
        return val

    def _graded(self, p, zt, ms):
        c = self.curve
        x, w, Vinv, _ = gauss_rule(c.n_gauss)
        seg = c.segments[c.panel_seg[p]]
        a, b = c.panel_a[p], c.panel_b[p]
        mid, h = 0.5 * (a + b), c.half[p]
        cz = Vinv @ c.z[p]
        cd = npleg.legder(cz)
        # projection of each target onto the panel (Gauss-Newton in the local coordinate)
        xc = x[np.argmin(np.abs(c.z[p][None, :] - zt[:, None]), axis=1)]
        for _ in range(8):
            r = npleg.legval(xc, cz) - zt
            d = npleg.legval(xc, cd)
            xc = np.clip(xc - np.real(np.conj(d) * r) / np.abs(d) ** 2, -1.0, 1.0)
        d = np.abs(npleg.legval(xc, cd))
        eps = np.maximum(np.abs(npleg.legval(xc, cz) - zt) / d, 1e-15)
        J = int(min(55, np.ceil(np.log2(2.0 / eps.min())) + 1))
        off = eps[:, None] * 2.0 ** np.arange(J)[None, :]
        n = len(zt)
        br = np.concatenate([-np.ones((n, 1)), np.ones((n, 1)), xc[:, None] - off, xc[:, None] + off], axis=1)
        br = np.sort(np.clip(br, -1.0, 1.0), axis=1)
        hs = 0.5 * (br[:, 1:] - br[:, :-1])
        xs = ((0.5 * (br[:, 1:] + br[:, :-1]))[:, :, None] + hs[:, :, None] * x[None, None, :]).reshape(n, -1)
        ws = (hs[:, :, None] * w[None, None, :]).reshape(n, -1) * h
        zu = np.asarray(seg.fn(seg.t_of_u(mid + h * xs).ravel()), dtype=complex).reshape(xs.shape)
        dzu = npleg.legval(xs, Vinv @ c.dz[p])
        muu = npleg.legval(xs, Vinv @ self.mu[p])
        return ((muu - ms[:, None]) * dzu * ws / (zu - zt[:, None])).sum(1)

    # ------------------------------------------------------------------
    def forward(self, z):
        """f(z) for interior points z (array-like)."""
        z = np.asarray(z, dtype=complex)
        shp = z.shape
        zr = z.reshape(-1)
        out = (zr - self.p_star) * np.exp(self._phi(zr))
        return out.reshape(shp)

    def derivative(self, z, h=1e-6):
        z = np.asarray(z, dtype=complex)
        hh = h * self.scale
        return (self.forward(z + hh) - self.forward(z - hh)) / (2 * hh)

    def boundary_angle(self, seg: int, t):
        """Correspondence angle at parameter t of (walk-ordered) segment ``seg``."""
        s = self.curve.segments[seg]
        return self.curve.interp(self.theta, seg, s.u_of_t(t))

    def boundary_value(self, seg: int, t):
        s = self.curve.segments[seg]
        u = s.u_of_t(t)
        re = self.curve.interp(self.fb.real, seg, u)
        im = self.curve.interp(self.fb.imag, seg, u)
        return re + 1j * im

    def segment_end_angles(self, seg: int):
        """Angles at the start and end of a segment, extrapolated from its end panels."""
        a = self.curve.interp(self.theta, seg, np.array([0.0, 1.0]))
        return float(a[0]), float(a[1])

    def inverse(self, w, seeds=None, tol=1e-13, maxit=60):
        """Newton inversion w -> z, seeded from interior samples."""
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        if seeds is None:
            seeds = self._seed_table()
        sz, sw = seeds
        z = sz[np.argmin(np.abs(sw[None, :] - w[:, None]), axis=1)]
        act = np.arange(len(w))
        for _ in range(maxit):
            za = z[act]
            dz = (self.forward(za) - w[act]) / self.derivative(za)
            # damp steps that leave the domain
            z_new = za - dz
            inside = points_in_polygon(np.stack([z_new.real, z_new.imag], -1), self.polygon)
            z[act] = np.where(inside, z_new, za - 0.5 * dz)
            act = act[np.abs(dz) >= tol * self.scale]
            if act.size == 0:
                break
        return z

    def _seed_table(self):
        if getattr(self, "_seeds", None) is None:
            lo, hi = self.polygon.min(0), self.polygon.max(0)
            g = np.linspace(0, 1, 42)[1:-1]
            X, Y = np.meshgrid(lo[0] + (hi[0] - lo[0]) * g, lo[1] + (hi[1] - lo[1]) * g)
            pts = np.stack([X.ravel(), Y.ravel()], -1)
            pts = pts[points_in_polygon(pts, self.polygon)]
            zs = pts[:, 0] + 1j * pts[:, 1]
            self._seeds = (zs, self.forward(zs))
        return self._seeds


def riemann_map(boundary, p_star, orientation="preserved", corners=None, **kw) -> ConformalMap:
    """Disk map of a Jordan domain.

    ``boundary`` is a list of ``Segment`` (corners at every junction), a
    callable ``t -> complex`` on [0, 2 pi] for a smooth closed curve, or an
    array of closed-curve samples (interpolated by a periodic spline).
    """
    if callable(boundary):
        segs = [Segment(boundary, 0.0, TWO_PI)]
        corners = False if corners is None else corners
    elif isinstance(boundary, (list, tuple)) and boundary and isinstance(boundary[0], Segment):
        segs = list(boundary)
        corners = True if corners is None else corners
    else:
        from scipy.interpolate import CubicSpline

        pts = np.asarray(boundary)
        if pts.ndim == 2:
            pts = pts[:, 0] + 1j * pts[:, 1]
        if abs(pts[0] - pts[-1]) < 1e-12:
            pts = pts[:-1]
        s = np.linspace(0, TWO_PI, len(pts) + 1)
        spl = CubicSpline(s, np.concatenate([pts, pts[:1]]), bc_type="periodic")
        segs = [Segment(lambda t: spl(np.mod(t, TWO_PI)), 0.0, TWO_PI)]
        corners = False if corners is None else corners
    return ConformalMap(segs, p_star, orientation, corners, **kw)


# --------------------------------------------------------------------------
# atlas


@dataclass
class ArcCorrespondence:
    """One boundary arc of a component as seen from the disk (counterclockwise order)."""

    seg: int  # segment index in the map's walk
    t_start: float  # boundary parameter at the disk-ccw start
    t_end: float
    angle_start: float
    angle_end: float
    orbit_after: int  # orbit index at the end of the arc (or -1)


@dataclass
class ComponentChart:
    id: int
    orientation: str
    cmap: ConformalMap
    p_star: np.ndarray  # point of the component mapped to 0
    rotation: complex = 1.0 + 0j
    arcs: list = field(default_factory=list)
    corner_angles: dict = field(default_factory=dict)  # orbit index -> angle
    seeds: tuple = None
    cauchy: tuple = None  # (panels, boundary values of F, mean) for the fast inverse


class FirstIntegralAtlas:
    def __init__(self, dec: Decomposition, F: Callable, charts: dict):
        self.dec = dec
        self.F = F
        self.charts = charts
        self.cauchy_tol = 1e-10

    # evaluation -------------------------------------------------------
    def Z(self, cid, x, y):
        ch = self.charts[cid]
        xi = np.asarray(self.F(np.asarray(x, float), np.asarray(y, float)), dtype=complex)
        return ch.rotation * ch.cmap.forward(xi)

    def Z_boundary(self, cid, t):
        """Z on the outer boundary arc of component cid at parameter t."""
        ch = self.charts[cid]
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(t.shape, dtype=complex)
        done = np.zeros(t.shape, dtype=bool)
        for arc in ch.arcs:
            lo, hi = sorted((arc.t_start, arc.t_end))
            tt = lo + np.mod(t - lo, TWO_PI)
            m = (tt <= hi) & ~done
            if np.any(m):
                out[m] = ch.rotation * ch.cmap.boundary_value(arc.seg, tt[m])
                done |= m
        if not np.all(done):
            raise ConformalError(f"parameters not on the boundary of component {cid}")
        return out

    def angle_of_t(self, cid, t):
        ch = self.charts[cid]
        rot = np.angle(ch.rotation)
        for arc in ch.arcs:
            lo, hi = sorted((arc.t_start, arc.t_end))
            tt = lo + np.mod(t - lo, TWO_PI)
            if tt <= hi:
                return float(ch.cmap.boundary_angle(arc.seg, tt)[0] + rot)
        raise ConformalError(f"parameter {t} not on the boundary of component {cid}")

    def t_of_angle(self, cid, psi):
        """Inverse boundary correspondence: disk angles -> (arc index, boundary parameter)."""
        ch = self.charts[cid]
        psi = np.atleast_1d(np.asarray(psi, dtype=float))
        rot = np.angle(ch.rotation)
        a0 = ch.arcs[0].angle_start + rot
        rel = a0 + np.mod(psi - a0, TWO_PI)
        arc_idx = np.full(psi.shape, -1)
        t = np.full(psi.shape, np.nan)
        for k, arc in enumerate(ch.arcs):
            lo, hi = arc.angle_start + rot, arc.angle_end + rot
            m = (rel > lo) & (rel < hi)
            if not np.any(m):
                continue
            arc_idx[m] = k
            t[m] = self._invert_arc(ch, arc, rel[m] - rot)
        return arc_idx, t

    def _invert_arc(self, ch, arc, target):
        cm = ch.cmap
        curve = cm.curve
        seg = arc.seg
        # dense monotone table then Newton on the panel interpolant
        pan = np.nonzero(curve.panel_seg == seg)[0]
        u_tab = np.concatenate([[0.0], curve.u[pan].ravel(), [1.0]])
        th_tab = np.concatenate([[arc.angle_start], cm.theta[pan].ravel(), [arc.angle_end]])
        u = np.interp(target, np.maximum.accumulate(th_tab), u_tab)
        x, w, Vinv, D = gauss_rule(curve.n_gauss)
        for _ in range(30):
            th = curve.interp(cm.theta, seg, u)
            p = curve.locate(seg, u)
            dth = np.empty_like(u)
            for q in np.unique(p):
                m = p == q
                coef = npleg.legder(Vinv @ cm.theta[q])
                xloc = (u[m] - 0.5 * (curve.panel_a[q] + curve.panel_b[q])) / curve.half[q]
                dth[m] = npleg.legval(xloc, coef) / curve.half[q]
            step = (th - target) / np.where(dth > 0, dth, np.inf)
            u = np.clip(u - step, 0.0, 1.0)
            if np.max(np.abs(step), initial=0.0) < 1e-15:
                break
        return curve.segments[seg].t_of_u(u)

    def inverse(self, cid, w, tol=1e-12, maxit=50, method="cauchy"):
        """Z_j^{-1} as (x, y) pairs.

        The image-plane point is either the Cauchy integral of the boundary
        correspondence (default, no iteration) or a Newton inversion of the
        disk map; F is then inverted by Newton in (x, y).
        """
        ch = self.charts[cid]
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        if method == "cauchy" and np.all(np.abs(w) < 1.0):
            xi = self.image_point(cid, w)
        else:
            xi = ch.cmap.inverse(w / ch.rotation)
        return self._F_inverse(cid, xi, tol, maxit)

    def image_point(self, cid, w):
        """M_j^{-1}(w / rotation) by the Cauchy integral of its boundary values."""
        from .quad import CirclePanels

        ch = self.charts[cid]
        if ch.cauchy is None:
            corners = [self.corner_angle(cid, k) for k in ch.corner_angles]

            def xi_of(psi):
                t = self.t_of_angle(cid, psi)[1]
                p = self.dec.domain.point(t)
                return np.asarray(self.F(p[..., 0], p[..., 1]), dtype=complex)

            pan = CirclePanels(corners, n_nodes=1024, refine=xi_of, tol=self.cauchy_tol)
            vals = xi_of(pan.nodes().reshape(-1)).reshape(pan.shape)
            ch.cauchy = (pan, vals, pan.integrate(vals) / TWO_PI)
        pan, vals, mean = ch.cauchy
        w = np.asarray(w, dtype=complex)
        return 0.5 * (pan.schwarz(vals, w) + mean)

    def image_derivative(self, cid, w):
        """d xi / dZ at disk points, so that dZ/d xi = 1 / image_derivative."""
        self.image_point(cid, np.zeros(1))
        pan, vals, _ = self.charts[cid].cauchy
        return 0.5 * pan.schwarz_derivative(vals, np.asarray(w, dtype=complex))

    def _F_inverse(self, cid, xi, tol=1e-12, maxit=50):
        ch = self.charts[cid]
        if ch.seeds is None:
            pts = self.dec.sample_interior(cid, n=40, margin=0.0)
            ch.seeds = (pts, np.asarray(self.F(pts[:, 0], pts[:, 1]), dtype=complex))
        sp, sf = ch.seeds
        k = np.argmin(np.abs(sf[None, :] - xi[:, None]), axis=1)
        x, y = sp[k, 0].copy(), sp[k, 1].copy()
        h = 1e-7 * max(1.0, self.dec.domain.diameter)
        for _ in range(maxit):
            r = np.asarray(self.F(x, y), dtype=complex) - xi
            fx = (self.F(x + h, y) - self.F(x - h, y)) / (2 * h)
            fy = (self.F(x, y + h) - self.F(x, y - h)) / (2 * h)
            a, b, c, d = fx.real, fy.real, fx.imag, fy.imag
            det = a * d - b * c
            dx = (d * r.real - b * r.imag) / det
            dy = (-c * r.real + a * r.imag) / det
            x, y = x - dx, y - dy
            if np.max(np.hypot(dx, dy)) < tol:
                break
        return np.stack([x, y], -1)

    def orbit_image(self, cid, orbit_index):
        ch = self.charts[cid]
        return ch.rotation * np.exp(1j * ch.corner_angles[orbit_index])

    def corner_angle(self, cid, orbit_index):
        ch = self.charts[cid]
        return float(ch.corner_angles[orbit_index] + np.angle(ch.rotation))

    def boundary_pushforward(self, cid, h: Callable, psi, tol=1e-12):
        """Values of a boundary function h(t) at disk angles psi (none may hit a corner)."""
        psi = np.atleast_1d(np.asarray(psi, dtype=float))
        for o in self.charts[cid].corner_angles:
            d = np.abs(np.angle(np.exp(1j * (psi - self.corner_angle(cid, o)))))
            if np.any(d < tol):
                raise ConformalError("sample coincides with a discontinuity point")
        arc, t = self.t_of_angle(cid, psi)
        if np.any(arc < 0):
            raise ConformalError("angle not covered by the boundary correspondence")
        return np.asarray(h(t)), arc, t


def _component_segments(dec: Decomposition, comp, F):
    tau = dec.domain.point
    t0 = dec.domain.t0

    def make(fn_t0):
        return lambda t: np.asarray(F(*tau(t).T), dtype=complex)

    segs = []
    for w in comp.word:
        if isinstance(w, BoundaryArc):
            segs.append(Segment(make(None), t0 + w.u0, t0 + w.u1))
    return segs


def build_atlas(dec: Decomposition, F: Callable, normalization: dict | None = None, align_tree=True, **kw) -> FirstIntegralAtlas:
    """Z_j = rotation_j * M_j(F) for every component, aligned along the adjacency tree."""
    normalization = normalization or {}
    # F must collapse each orbit
    for o in dec.orbits:
        vals = np.asarray(F(o.arc.polyline[:, 0], o.arc.polyline[:, 1]), dtype=complex)
        if np.std(vals) > AGREE_TOL * max(1.0, np.abs(vals).max()):
            raise ConformalError(f"first integral is not constant on orbit {o.arc.id}")
    charts = {}
    for comp in dec.components:
        segs = _component_segments(dec, comp, F)
        if comp.id in normalization:
            p = np.asarray(normalization[comp.id], dtype=float)
        else:
            p = dec.interior_anchor(comp.id)
        pst = complex(F(p[0], p[1]))
        corners = dec.N > 0
        cm = ConformalMap(segs, pst, comp.orientation, corners=corners, **kw)
        ch = ComponentChart(comp.id, comp.orientation, cm, p)
        # arcs in disk-ccw order
        nseg = len(segs)
        word_orbits = [w.orbit for w in comp.word if isinstance(w, OrbitRef)]
        for k in range(nseg):
            s = cm.curve.segments[k]
            a0, a1 = cm.segment_end_angles(k)
            if comp.orientation == "preserved":
                after = word_orbits[k] if word_orbits else -1
            else:
                # reversed walk: segment k is word arc nseg-1-k, followed by the orbit before it
                after = word_orbits[(nseg - 2 - k) % nseg] if word_orbits else -1
            ch.arcs.append(ArcCorrespondence(k, s.ta, s.tb, a0, a1, after))
        # corner angles: average the two one-sided extrapolations
        for k, arc in enumerate(ch.arcs):
            if arc.orbit_after < 0:
                continue
            nxt = ch.arcs[(k + 1) % nseg]
            a_end = arc.angle_end
            a_next = nxt.angle_start
            if k == nseg - 1:
                a_next += TWO_PI
            if abs(a_end - a_next) > 1e-3:
                log.warning("component %d: corner angle mismatch %.2e", comp.id, abs(a_end - a_next))
            ang = 0.5 * (a_end + a_next)
            ch.corner_angles[arc.orbit_after] = ang
            arc.angle_end = ang
            if k == nseg - 1:
                nxt.angle_start = ang - TWO_PI
            else:
                nxt.angle_start = ang
        if dec.N == 0:
            ch.arcs[0].angle_end = ch.arcs[0].angle_start + TWO_PI
        charts[comp.id] = ch
    atlas = FirstIntegralAtlas(dec, F, charts)
    if align_tree:
        align(atlas)
    return atlas


def align(atlas: FirstIntegralAtlas, anchor: int | None = None):
    """Rotate charts breadth first from the anchor so shared orbit images agree."""
    dec = atlas.dec
    anchor = dec.components[0].id if anchor is None else anchor
    adj = dec.adjacency()
    seen = {anchor}
    queue = deque([anchor])
    while queue:
        j = queue.popleft()
        for k, o in adj[j]:
            if k in seen:
                continue
            c = atlas.orbit_image(j, o)
            d = atlas.orbit_image(k, o)
            if abs(abs(d) - 1) > 1e-6 or abs(abs(c) - 1) > 1e-6:
                raise ConformalError("orbit image is not on the unit circle")
            atlas.charts[k].rotation *= c / d
            seen.add(k)
            queue.append(k)
    return atlas


def rotation_factor(c: complex, d: complex) -> complex:
    """Unimodular factor taking the image d to c."""
    if abs(abs(d) - 1) > 1e-6 or abs(abs(c) - 1) > 1e-6:
        raise ConformalError("alignment needs unimodular images")
    return c / d
