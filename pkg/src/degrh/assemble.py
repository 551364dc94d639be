"""Global solutions: disk solves pulled back through the atlas and glued across orbits."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numpy.polynomial import legendre as npleg

from .conformal import ConformalError, build_atlas, gauss_rule
from .diskrh import DiskError, DiskPoint, DiskProblem, DiskSolver
from .field import VectorField, closed_orbit_period
from .geometry import TWO_PI, decompose, points_in_polygon, polygon_distance
from .indexcalc import BoundaryData, compute_indices

log = logging.getLogger(__name__)

PERIOD_TOL = 1e-8
POLE_EPS = 1e-8
GLUE_TOL = 1e-3
EXCLUSION = 0.05  # fraction of the domain diameter
DENSITY_CAP = 1e3
FIT_DEGREE = 10
FD_STEP = 1.25e-4  # fraction of the diameter; the h^4 stencil error meets rounding near here


class AssemblyError(RuntimeError):
    pass


class PeriodError(AssemblyError):
    """A declared closed orbit carries a nonzero period; Lu = f has no global solution."""


@dataclass
class ClosedOrbit:
    curve: Callable  # s -> (x, y) arrays
    s_range: tuple = (0.0, TWO_PI)
    id: object = None


@dataclass
class Problem:
    field: VectorField
    F: Callable
    domain: object
    orbits: list
    Lambda: Callable
    phi: Callable | None = None
    f: Callable | None = None
    closed_orbits: list = field(default_factory=list)
    normalization: dict | None = None
    n_nodes: int = 4096
    pompeiu_theta: int = 64
    pompeiu_depth: int = 6


@dataclass
class Context:
    problem: Problem
    dec: object
    atlas: object
    indices: object
    data: BoundaryData


def prepare(problem: Problem) -> Context:
    dec = decompose(problem.domain, problem.orbits)
    atlas = build_atlas(dec, problem.F, problem.normalization)
    data = BoundaryData(problem.Lambda, problem.phi)
    idx = compute_indices(dec, data)
    return Context(problem, dec, atlas, idx, data)


def check_periods(problem: Problem, n_quad=512):
    """Period of eta over every declared closed orbit; raises PeriodError when one is nonzero."""
    out = []
    f = problem.f if problem.f is not None else (lambda x, y: np.zeros(np.shape(x), dtype=complex))
    for k, co in enumerate(problem.closed_orbits):
        per = closed_orbit_period(problem.field, f, co.curve, n_quad=n_quad, s_range=co.s_range)
        out.append({"orbit": co.id if co.id is not None else k, "period": per})
        if abs(per) > PERIOD_TOL:
            raise PeriodError(
                f"closed orbit {out[-1]['orbit']} has period {per:.6g}; a global solution needs zero period"
            )
    return out


# ---------------------------------------------------------------------------
# per-component disk problems


def _disk_problem(ctx: Context, cid, rhs=None):
    """rhs(cid, ang, t) -> real boundary data at disk angles; rhs_point via rhs(cid, None, t) at orbit ends."""
    dec, atlas, jumps = ctx.dec, ctx.atlas, ctx.indices.jumps
    comp = dec.component(cid)
    pts = []
    for ref in comp.orbit_refs:
        k = ref.orbit
        o = dec.orbits[k]
        j = jumps[k]
        c = atlas.corner_angle(cid, k)
        lm = complex(ctx.data.lam(o.t_minus))
        lp = complex(ctx.data.lam(o.t_plus))
        pm = pp = 0.0
        if rhs is not None:
            pm = float(rhs(cid, c, np.array([o.t_minus]))[0])
            pp = float(rhs(cid, c, np.array([o.t_plus]))[0])
        pts.append(DiskPoint(c, j.alpha, j.q, lm, lp, pm, pp, tag=k))

    def lam(ang):
        t = atlas.t_of_angle(cid, ang)[1]
        return ctx.data.lam(t)

    psi = None
    if rhs is not None:

        def psi(ang):
            t = atlas.t_of_angle(cid, ang)[1]
            return rhs(cid, ang, t)

    return DiskProblem(pts, lam, psi, ctx.indices.component(cid).kappa)


def _solver(ctx, cid, rhs=None):
    try:
        return DiskSolver(_disk_problem(ctx, cid, rhs), n_nodes=ctx.problem.n_nodes)
    except DiskError as e:
        raise AssemblyError(f"component {cid}: {e}") from e


# ---------------------------------------------------------------------------
# Pompeiu transform on the disk


class PolarDensity:
    """A density on the unit disk sampled on Gauss radial panels x uniform angles.

    ``T(z)`` evaluates -(1/pi) int g(zeta)/(zeta - z) dA by splitting the
    kernel into its Fourier modes; each mode reduces to two one-dimensional
    radial integrals (inside and outside |z|).
    """

    def __init__(self, g: Callable, n_theta=128, depth=8, n_gauss=16, values=None):
        br = [0.0] + [1.0 - 2.0**-k for k in range(1, depth + 1)] + [1.0]
        self.ra, self.rb = np.array(br[:-1]), np.array(br[1:])
        x, w, self.Vinv, _ = gauss_rule(n_gauss)
        self.xg, self.wg = x, w
        h = 0.5 * (self.rb - self.ra)
        self.rho = ((0.5 * (self.ra + self.rb))[:, None] + h[:, None] * x[None, :]).reshape(-1)
        self.n_gauss = n_gauss
        self.theta = TWO_PI * np.arange(n_theta) / n_theta
        Z = self.rho[:, None] * np.exp(1j * self.theta[None, :])
        if values is None:
            values = np.asarray(g(Z), dtype=complex).reshape(Z.shape)
        self.values = values
        self.coef = np.fft.fft(values, axis=1) / n_theta  # g = sum_n c_n e^{i n theta}
        self.modes = np.fft.fftfreq(n_theta, 1.0 / n_theta).astype(int)
        self.sq, self.sw = gauss_rule(48)[:2]
        self.sq = 0.5 * (self.sq + 1.0)
        self.sw = 0.5 * self.sw

    def _modes_at(self, rho):
        """g_n(rho) for every mode, rho any shape -> (..., n_modes)."""
        rho = np.asarray(rho, dtype=float)
        flat = rho.reshape(-1)
        k = np.clip(np.searchsorted(self.ra, flat, side="right") - 1, 0, len(self.ra) - 1)
        mid = 0.5 * (self.ra[k] + self.rb[k])
        h = 0.5 * (self.rb[k] - self.ra[k])
        V = npleg.legvander((flat - mid) / h, self.n_gauss - 1)
        c = self.coef.reshape(len(self.ra), self.n_gauss, -1)
        out = np.empty((flat.size, c.shape[-1]), dtype=complex)
        for p in np.unique(k):
            m = k == p
            out[m] = V[m] @ (self.Vinv @ c[p])
        return out.reshape(rho.shape + (c.shape[-1],))

    def boundary_coefficients(self):
        """T g on |z| = 1 is sum_{n<=0} b_n e^{-i(1-n) theta}; returns (powers 1-n, b_n)."""
        if getattr(self, "_bc", None) is None:
            n = self.modes
            keep = n <= 0
            h = 0.5 * (self.rb - self.ra)
            w = (h[:, None] * self.wg[None, :]).reshape(-1)
            b = 2.0 * np.sum((w * self.rho)[:, None] * self.coef[:, keep] * self.rho[:, None] ** (-n[keep])[None, :], axis=0)
            self._bc = (1 - n[keep], b)
        return self._bc

    def T(self, z, chunk=256):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        shp = z.shape
        z = z.reshape(-1)
        rad = np.abs(z)
        if np.any(rad > 1.0 + 1e-12):
            raise AssemblyError("Pompeiu transform evaluated outside the closed disk")
        out = np.empty(len(z), dtype=complex)
        on = rad >= 1.0 - 1e-14
        if np.any(on):
            pw, b = self.boundary_coefficients()
            th = np.angle(z[on])
            out[on] = np.exp(-1j * th[:, None] * pw[None, :]) @ b
        idx = np.flatnonzero(~on)
        n = self.modes
        s, sw = self.sq, self.sw
        inner_m = n <= 0
        outer_m = n >= 1
        for a in range(0, len(idx), chunk):
            ii = idx[a : a + chunk]
            zz = z[ii]
            r = np.abs(zz)
            th = np.angle(zz)
            gi = self._modes_at(r[:, None] * s[None, :])  # (T, J, M)
            wi = sw[None, :, None] * s[None, :, None] ** (1.0 - n[None, None, :])
            inner = r[:, None] * np.sum(gi * wi, axis=1)  # (T, M)
            val = 2.0 * np.sum((np.exp(-1j * (1 - n)[None, :] * th[:, None]) * inner)[:, inner_m], axis=1)
            rho = r[:, None] + (1.0 - r[:, None]) * s[None, :]
            go = self._modes_at(rho)
            ratio = (r[:, None] / rho)[:, :, None] ** (n[None, None, :] - 1.0)
            outer = (1.0 - r)[:, None] * np.sum(go * ratio * sw[None, :, None], axis=1)
            val -= 2.0 * np.sum((np.exp(1j * (n - 1)[None, :] * th[:, None]) * outer)[:, outer_m], axis=1)
            out[ii] = val
        return out.reshape(shp)


def pompeiu(g, z, **kw):
    """T g(z) = -(1/pi) int_D g(zeta)/(zeta - z) dA(zeta); g a callable on the disk or a PolarDensity."""
    dens = g if isinstance(g, PolarDensity) else PolarDensity(g, **kw)
    return dens.T(z)


def _lconj_f(ctx, x, y, h=1e-6):
    """L(conj F) by central differences of F."""
    F = ctx.problem.F
    Fx = (F(x + h, y) - F(x - h, y)) / (2 * h)
    Fy = (F(x, y + h) - F(x, y - h)) / (2 * h)
    A, B = ctx.problem.field.coefficients(x, y)
    return A * np.conj(Fx) + B * np.conj(Fy)


@dataclass
class XiFit:
    """h(xi) ~ sum c_mn u^m conj(u)^n with u = (xi - center)/scale, and its conj(xi)-antiderivative."""

    center: complex
    scale: float
    pairs: np.ndarray  # (n_terms, 2) exponents (m, n)
    coef: np.ndarray
    residual: float = 0.0

    def _u(self, xi):
        return (np.asarray(xi, dtype=complex) - self.center) / self.scale

    def h(self, xi):
        u = self._u(xi)
        m, n = self.pairs[:, 0], self.pairs[:, 1]
        return (u[..., None] ** m * np.conj(u)[..., None] ** n) @ self.coef

    def K(self, xi):
        """d K / d conj(xi) = h."""
        u = self._u(xi)
        m, n = self.pairs[:, 0], self.pairs[:, 1]
        return self.scale * ((u[..., None] ** m * np.conj(u)[..., None] ** (n + 1)) @ (self.coef / (n + 1)))


def _h_values(ctx, x, y):
    """h = f / L(conj F), so that L(K o F) = f whenever dK/d conj(xi) = h."""
    f = ctx.problem.f
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.asarray(f(x, y), dtype=complex) / _lconj_f(ctx, x, y)


def fit_xi_polynomial(ctx, cid, degree=FIT_DEGREE, n=48):
    """Least-squares fit of h over the component, away from the orbits where h may blow up."""
    dec = ctx.dec
    pts = dec.sample_interior(cid, n=n)
    pts = pts[_exclusion_mask(ctx, pts, radius=0.02 * dec.domain.diameter)]
    xi = np.asarray(ctx.problem.F(pts[:, 0], pts[:, 1]), dtype=complex)
    hv = _h_values(ctx, pts[:, 0], pts[:, 1])
    ok = np.isfinite(hv)
    xi, hv = xi[ok], hv[ok]
    pairs = np.array([(m, k - m) for k in range(degree + 1) for m in range(k + 1)])
    if xi.size < 2 * len(pairs):
        return XiFit(0j, 1.0, pairs[:1], np.zeros(1, dtype=complex), float("nan"))
    c = complex(np.mean(xi))
    R = float(np.max(np.abs(xi - c))) or 1.0
    u = (xi - c) / R
    V = u[:, None] ** pairs[None, :, 0] * np.conj(u)[:, None] ** pairs[None, :, 1]
    coef, *_ = np.linalg.lstsq(V, hv, rcond=1e-13)
    res = float(np.max(np.abs(V @ coef - hv)) / max(1.0, np.max(np.abs(hv))))
    return XiFit(c, R, pairs, coef, res)


def _density(ctx, cid, stats, fit=None):
    """g = (f - h_fit L(conj F)) / L(conj Z_j) on the disk; L(conj Z) = conj(dZ/dxi) L(conj F)."""
    f = ctx.problem.f
    atlas = ctx.atlas

    def g(zd):
        zd = np.asarray(zd, dtype=complex)
        flat = zd.reshape(-1)
        xi = atlas.image_point(cid, flat)
        xy = atlas._F_inverse(cid, xi)
        x, y = xy[:, 0], xy[:, 1]
        lcf = _lconj_f(ctx, x, y)
        num = np.asarray(f(x, y), dtype=complex)
        if fit is not None:
            num = num - fit.h(np.asarray(ctx.problem.F(x, y), dtype=complex)) * lcf
        den = lcf / np.conj(atlas.image_derivative(cid, flat))
        with np.errstate(divide="ignore", invalid="ignore"):
            val = num / den
        bad = ~np.isfinite(val)
        val[bad] = 0.0
        cap = DENSITY_CAP * max(1.0, float(np.median(np.abs(val))))
        big = np.abs(val) > cap
        val[big] = cap * val[big] / np.abs(val[big])
        stats[cid] = {"capped": int(big.sum() + bad.sum()), "samples": int(val.size), "cap": cap,
                      "max_density": float(np.max(np.abs(val))) if val.size else 0.0}
        return val.reshape(zd.shape)

    return g


def build_particular(ctx: Context):
    """v_j = K_j(F) + T g_j + const_j per component, constants chosen so v is continuous across orbits.

    K_j is the conj(xi)-antiderivative of a polynomial fit of f / L(conj F);
    the Pompeiu transform only carries the fit remainder, which keeps the
    disk density small where the conformal map crowds.
    """
    pr = ctx.problem
    stats = {}
    fits = {c.id: fit_xi_polynomial(ctx, c.id) for c in ctx.dec.components}
    dens = {}
    for c in ctx.dec.components:
        dens[c.id] = PolarDensity(_density(ctx, c.id, stats, fits[c.id]), n_theta=pr.pompeiu_theta,
                                  depth=pr.pompeiu_depth)
        stats[c.id]["fit_residual"] = fits[c.id].residual
    v = Particular(ctx, dens, fits, {}, stats)
    first = ctx.dec.components[0].id
    v.const[first] = 0j
    adj = ctx.dec.adjacency()
    queue = deque([first])
    while queue:
        j = queue.popleft()
        for k, o in adj[j]:
            if k in v.const:
                continue
            v.const[k] = 0j
            v.const[k] = v.orbit(j, o) - v.orbit(k, o)
            queue.append(k)
    return v


@dataclass
class Particular:
    ctx: Context
    dens: dict
    fits: dict
    const: dict
    stats: dict

    def _K(self, cid, x, y):
        xi = np.asarray(self.ctx.problem.F(np.asarray(x, float), np.asarray(y, float)), dtype=complex)
        return self.fits[cid].K(xi)

    def at(self, cid, x, y, z):
        """v at physical points (x, y) of component cid with disk images z."""
        return self._K(cid, x, y) + self.dens[cid].T(z) + self.const[cid]

    def boundary(self, cid, ang, t):
        """v at boundary parameters t whose disk angles are ang."""
        p = self.ctx.dec.domain.point(np.atleast_1d(t))
        z = np.exp(1j * np.atleast_1d(ang)) * np.ones(p.shape[:-1])
        return self._K(cid, p[..., 0], p[..., 1]) + self.dens[cid].T(z) + self.const[cid]

    def orbit(self, cid, k):
        """The (constant) value of v on orbit k seen from component cid."""
        o = self.ctx.dec.orbits[k]
        c = self.ctx.atlas.orbit_image(cid, k)
        return complex(self.boundary(cid, np.angle(c), o.t_minus)[0])


# ---------------------------------------------------------------------------
# global solutions


@dataclass
class GlobalSolution:
    ctx: Context
    solvers: dict
    params: dict
    mode: str
    particular_term: bool = True
    v: Particular | None = None
    orbit_values: list = field(default_factory=list)
    poles: list = field(default_factory=list)
    moments: dict = field(default_factory=dict)
    label: str = ""

    # -- evaluation ------------------------------------------------------
    def disk_w(self, cid, z):
        s = self.solvers.get(cid)
        if s is None or (self.mode == "homogeneous" and self.params.get(cid) is None):
            return np.zeros(np.shape(z), dtype=complex)
        return s.w(z, self.params.get(cid), self.particular_term)

    def component_ids(self, x, y):
        pts = np.stack([np.ravel(x), np.ravel(y)], -1)
        ids = np.zeros(len(pts), dtype=int)
        for c in self.ctx.dec.components:
            m = points_in_polygon(pts, c.polygon) & (ids == 0)
            ids[m] = c.id
        return ids.reshape(np.shape(x))

    def evaluate(self, x, y):
        """u at interior points (NaN outside the domain or on orbits; inf at poles)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ids = self.component_ids(x, y)
        out = np.full(x.shape, np.nan + 0j)
        for comp in self.ctx.dec.components:
            cid = comp.id
            m = ids == cid
            if not np.any(m):
                continue
            if cid not in self.solvers and self.v is None:
                out[m] = 0.0  # component below the homogeneous threshold
                continue
            z = self.ctx.atlas.Z(cid, x[m], y[m])
            rad = np.abs(z)
            z = np.where(rad >= 1.0, z / np.maximum(rad, 1e-300) * (1.0 - 1e-13), z)
            val = self.disk_w(cid, z)
            if self.v is not None:
                val = val + self.v.at(cid, x[m], y[m], z)
            if self.ctx.indices.component(cid).kappa < 0 and self.particular_term:
                val = np.where(np.abs(z) < POLE_EPS, np.inf, val)
            out[m] = val
        return out

    def boundary_value(self, t):
        """u at boundary parameters t (away from orbit ends)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.full(t.shape, np.nan + 0j)
        atlas = self.ctx.atlas
        for cid, ch in atlas.charts.items():
            rot = np.angle(ch.rotation)
            for arc in ch.arcs:
                lo, hi = sorted((arc.t_start, arc.t_end))
                tt = lo + np.mod(t - lo, TWO_PI)
                m = (tt < hi) & (tt > lo) & np.isnan(out.real)
                if not np.any(m):
                    continue
                ang = ch.cmap.boundary_angle(arc.seg, tt[m]) + rot
                s = self.solvers.get(cid)
                val = np.zeros(int(m.sum()), dtype=complex)
                if s is not None and not (self.mode == "homogeneous" and self.params.get(cid) is None):
                    val = s.boundary_eval(ang, self.params.get(cid), self.particular_term)
                if self.v is not None:
                    val = val + self.v.boundary(cid, ang, tt[m])
                out[m] = val
        return out

    def orbit_value(self, k):
        for rec in self.orbit_values:
            if rec["orbit_index"] == k:
                return rec["value"]
        raise KeyError(k)


def _point_index(solver, k):
    for i, p in enumerate(solver.points):
        if p.tag == k:
            return i
    raise KeyError(k)


def _orbit_table(ctx, solvers, params, particular=True, v=None):
    rows = []
    for o in ctx.dec.orbits:
        k = o.index
        j = ctx.indices.jumps[k]
        sides = []
        for cid in o.components:
            s = solvers[cid]
            i = _point_index(s, k)
            d = params.get(cid)
            lim = s.orbit_limit(i, d, particular)
            rad = s.radial_limit(i, d, particular)
            sides.append({"component": cid, "limit": lim, "radial": rad})
        rec = {"orbit": o.arc.id, "orbit_index": k, "alpha": j.alpha, "q": j.q, "sides": sides}
        vo = v.orbit(o.components[0], k) if v is not None else 0j
        if j.alpha > 0 and particular:
            s = solvers[o.components[0]]
            cf, eps_theory = s.closed_form(_point_index(s, k))
            errs = {e: max(abs(sd["radial"] - e * cf) for sd in sides) for e in (1, -1)}
            eps = min(errs, key=errs.get)
            rec.update(closed_form=cf, sign=eps, sign_predicted=eps_theory, closed_form_error=errs[eps])
            scale = 1.0 + abs(cf)
            if errs[eps] > GLUE_TOL * scale * 10:
                raise AssemblyError(f"orbit {o.arc.id}: limits do not match the closed form (error {errs[eps]:.3g})")
        rec["glue_error"] = abs(sides[0]["limit"] - sides[1]["limit"])
        rec["value"] = sides[0]["limit"] + vo
        rec["v"] = vo
        rows.append(rec)
    return rows


# ---------------------------------------------------------------------------
# solves


def solve_homogeneous(ctx: Context):
    """Basis of solutions of Re(conj(Lambda) u) = 0 that vanish on every orbit."""
    basis = []
    solvers = {}
    for c in ctx.dec.components:
        kap = ctx.indices.component(c.id).kappa
        if kap < 0:
            continue
        s = _solver(ctx, c.id, None)
        solvers[c.id] = s
        K = s.homogeneous_basis()
        for col in range(K.shape[1]):
            sol = GlobalSolution(ctx, solvers, {c.id: K[:, col]}, "homogeneous", particular_term=False,
                                 label=f"component {c.id} basis {col + 1}")
            basis.append(sol)
    if len(basis) != ctx.indices.r_homogeneous:
        log.warning("basis size %d differs from the index count %d", len(basis), ctx.indices.r_homogeneous)
    return basis


def _glue_free_parameters(ctx, solvers, base_params, particular, v):
    """Choose free parameters so limits agree across orbits with alpha = 0 (nongeneric orbits)."""
    zero = [o for o in ctx.dec.orbits if ctx.indices.jumps[o.index].alpha == 0.0]
    if not zero:
        return base_params
    layout, off = {}, 0
    for cid, s in solvers.items():
        if s.n_free:
            layout[cid] = (off, s.n_free)
            off += s.n_free
    if off == 0:
        return base_params

    def limits(params):
        out = []
        for o in zero:
            a, b = o.components
            la = solvers[a].orbit_limit(_point_index(solvers[a], o.index), params.get(a), particular)
            lb = solvers[b].orbit_limit(_point_index(solvers[b], o.index), params.get(b), particular)
            out += [la - lb]
        return np.array(out)

    def unpack(x):
        p = dict(base_params)
        for cid, (a, n) in layout.items():
            p[cid] = x[a : a + n]
        return p

    r0 = limits(unpack(np.zeros(off)))
    M = np.zeros((2 * len(zero), off))
    for i in range(off):
        e = np.zeros(off)
        e[i] = 1.0
        d = limits(unpack(e)) - r0
        M[:, i] = np.concatenate([d.real, d.imag])
    rhs = -np.concatenate([r0.real, r0.imag])
    x, *_ = np.linalg.lstsq(M, rhs, rcond=1e-10)
    return unpack(x)


def _rh(ctx: Context, rhs, v=None, allow_nongeneric=False):
    if not ctx.indices.generic and not allow_nongeneric:
        raise AssemblyError("boundary data is not generic (an orbit has alpha = 0)")
    solvers = {c.id: _solver(ctx, c.id, rhs) for c in ctx.dec.components}
    params = {cid: (np.zeros(s.n_free) if s.n_free else None) for cid, s in solvers.items()}
    params = _glue_free_parameters(ctx, solvers, params, True, v)
    sol = GlobalSolution(ctx, solvers, params, "rh" if v is None else "full", True, v)
    sol.orbit_values = _orbit_table(ctx, solvers, params, True, v)
    for cid, s in solvers.items():
        if s.kappa < 0:
            m, a = s.laurent(params.get(cid))
            order = s.pole_order(params.get(cid))
            am1 = complex(a[m == -1][0])
            am2 = complex(a[m == -2][0])
            sol.moments[cid] = s.moments()
            if order > 0:
                loc = ctx.atlas.charts[cid].p_star
                sol.poles.append({
                    "component": cid,
                    "location": [float(loc[0]), float(loc[1])],
                    "order": order,
                    "a_minus1": am1,
                    "a_minus2": am2,
                    "smooth_correction": "v" if v is not None else "none",
                })
    return sol


def solve_rh(ctx: Context, allow_nongeneric=False):
    """Particular solution of Lu = 0, Re(conj(Lambda) u) = phi; free parameters set to zero."""
    phi = ctx.data

    def rhs(cid, ang, t):
        return phi.ph(t)

    return _rh(ctx, rhs, None, allow_nongeneric)


def check_solvability_continuous(sol: GlobalSolution):
    """Moment residuals per negative-index component; all zero iff that component has no pole."""
    return {cid: np.asarray(m) for cid, m in sol.moments.items()}


def component_moments(ctx: Context, cid, phi):
    """Moment residuals of one component for real boundary data phi(t), without a global solve."""

    def rhs(c, ang, t):
        return np.real(np.asarray(phi(np.atleast_1d(np.asarray(t, dtype=float))), dtype=complex))

    return _solver(ctx, cid, rhs).moments()


def solve_full(ctx: Context, allow_nongeneric=True):
    """u = w + v with v a pulled-back Pompeiu transform and w solving the corrected boundary problem."""
    pr = ctx.problem
    check_periods(pr)
    if pr.f is None:
        return solve_rh(ctx, allow_nongeneric)
    v = build_particular(ctx)
    data = ctx.data

    def rhs(cid, ang, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        vb = v.boundary(cid, ang, t)
        return data.ph(t) - np.real(np.conj(data.lam(t)) * vb)

    sol = _rh(ctx, rhs, v, allow_nongeneric)
    sol.mode = "full"
    sol.density_stats = v.stats
    return sol


# ---------------------------------------------------------------------------
# residuals


def _exclusion_mask(ctx, pts, sol=None, radius=None):
    dec = ctx.dec
    diam = dec.domain.diameter
    rad = EXCLUSION * diam if radius is None else radius
    keep = np.ones(len(pts), dtype=bool)
    for o in dec.orbits:
        keep &= polygon_distance(pts, o.arc.polyline) > rad
    if sol is not None:
        for p in sol.poles:
            keep &= np.hypot(pts[:, 0] - p["location"][0], pts[:, 1] - p["location"][1]) > rad
    return keep


def _d4(g, h):
    """Fourth-order central difference of g at shift 0."""
    return (8 * (g(h) - g(-h)) - (g(2 * h) - g(-2 * h))) / (12 * h)


def residual_report(sol: GlobalSolution, n_grid=41, n_boundary=720, h=None):
    """Sup and RMS residuals of Lu - f inside and of Re(conj(Lambda) u) - phi on the boundary."""
    ctx = sol.ctx
    dom = ctx.dec.domain
    diam = dom.diameter
    h = FD_STEP * diam if h is None else h
    # boundary
    t = dom.t0 + TWO_PI * (np.arange(n_boundary) + 0.5) / n_boundary
    pb = dom.point(t)
    ends = []
    for o in ctx.dec.orbits:
        ends += [dom.point(np.array([o.t_minus]))[0], dom.point(np.array([o.t_plus]))[0]]
    keep = np.ones(len(t), dtype=bool)
    for e in ends:
        keep &= np.hypot(pb[:, 0] - e[0], pb[:, 1] - e[1]) > EXCLUSION * diam
    ub = sol.boundary_value(t[keep])
    target = ctx.data.ph(t[keep]) if sol.mode != "homogeneous" else 0.0
    rb = np.real(np.conj(ctx.data.lam(t[keep])) * ub) - target
    # interior
    lo, hi = pb.min(0), pb.max(0)
    gx = np.linspace(lo[0], hi[0], n_grid + 2)[1:-1]
    gy = np.linspace(lo[1], hi[1], n_grid + 2)[1:-1]
    X, Y = np.meshgrid(gx, gy)
    pts = np.stack([X.ravel(), Y.ravel()], -1)
    inside = dom.contains(pts)
    pts = pts[inside]
    d = np.array([dom.distance_to_boundary(p) for p in pts])
    pts = pts[(d > 4 * h) & _exclusion_mask(ctx, pts, sol)]
    x, y = pts[:, 0], pts[:, 1]
    ux = _d4(lambda s: sol.evaluate(x + s, y), h)
    uy = _d4(lambda s: sol.evaluate(x, y + s), h)
    A, B = ctx.problem.field.coefficients(x, y)
    Lu = A * ux + B * uy
    f = ctx.problem.f
    fv = np.asarray(f(x, y), dtype=complex) if (f is not None and sol.mode == "full") else 0.0
    ri = np.abs(Lu - fv)
    ri = ri[np.isfinite(ri)]
    return {
        "interior_sup": float(ri.max()) if ri.size else 0.0,
        "interior_rms": float(np.sqrt(np.mean(ri**2))) if ri.size else 0.0,
        "interior_points": int(ri.size),
        "boundary_sup": float(np.max(np.abs(rb))) if rb.size else 0.0,
        "boundary_rms": float(np.sqrt(np.mean(rb**2))) if rb.size else 0.0,
        "boundary_points": int(rb.size),
        "exclusion_radius": EXCLUSION * diam,
    }


def convergence_table(problem: Problem, solve=solve_rh, levels=2, n_grid=21):
    """Solve at M, 2M, ...; residuals per level and the change of u and orbit values between levels.

    The residuals of a converged solve sit on the finite-difference floor, so
    the level-to-level change is the meaningful convergence measure.
    """
    rows, prev = [], None
    for k in range(levels):
        pr = replace(problem, n_nodes=problem.n_nodes * 2**k)
        sol = solve(prepare(pr))
        rep = residual_report(sol, n_grid=n_grid)
        pts = np.concatenate([sol.ctx.dec.sample_interior(c.id, n=8, margin=0.1) for c in sol.ctx.dec.components])
        u = sol.evaluate(pts[:, 0], pts[:, 1])
        ov = np.array([r["value"] for r in sol.orbit_values], dtype=complex)
        row = {"M": pr.n_nodes, "interior_sup": rep["interior_sup"], "boundary_sup": rep["boundary_sup"]}
        if prev is not None:
            ok = np.isfinite(u) & np.isfinite(prev[0])
            row["u_change"] = float(np.max(np.abs(u[ok] - prev[0][ok]))) if ok.any() else 0.0
            row["orbit_change"] = float(np.max(np.abs(ov - prev[1]))) if ov.size else 0.0
        rows.append(row)
        prev = (u, ov)
    return rows
