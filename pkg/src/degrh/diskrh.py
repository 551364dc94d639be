"""Riemann-Hilbert problems on the unit disk with piecewise continuous symbols.

A component's problem arrives here as: points c_k on the circle (images of
orbits) carrying jump data (alpha_k, q_k), a unimodular symbol lam(psi) and
real data psi_fn(psi) defined away from the c_k.  We look for w holomorphic
in the disk with Re(conj(lam) w) = psi_fn on the circle, bounded near every
c_k.

Conventions used throughout:

* ``c-`` is the one-sided limit from smaller angles, ``c+`` from larger ones.
* (z - c)^a uses the branch exp(a Log((z - c)/(i c))); its argument on the
  circle tends to 0 at c+ and to pi at c-.
* w = P w0 with P(z) = prod (z - c_k)^{alpha_k} (times (z - c0)/(i c0) when the
  number of odd q_k is odd), and w0 = z^kappa e^{i gamma} W.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .quad import TWO_PI, CirclePanels, schwarz_fft

RANK_TOL = 1e-10
CONTINUITY_TOL = 1e-4
JUMP_TOL = 1e-6


class DiskError(ValueError):
    """Inconsistent disk data."""


# ---------------------------------------------------------------------------
# small pieces


def schwarz(samples):
    """Holomorphic evaluator with real part ``samples`` (uniform grid from angle 0)."""
    return schwarz_fft(samples)[0]


def winding_number(samples, max_increment=np.pi / 2):
    z = np.asarray(samples, dtype=complex)
    inc = np.angle(np.roll(z, -1) / z)
    if np.max(np.abs(inc)) >= max_increment:
        raise DiskError("phase increment too large to count the winding")
    r = np.sum(inc) / TWO_PI
    k = int(round(r))
    if abs(r - k) > 1e-6:
        raise DiskError("winding residual too large")
    return k


def wrap(x):
    return np.mod(x, TWO_PI)


def half_angle(psi, c):
    """Argument of (zeta - c)^1 on the circle for the relative branch, in (0, pi)."""
    return 0.5 * wrap(np.asarray(psi, dtype=float) - c)


def rel_power(z, c, a):
    """(z - c)^a, z in the closed disk (z != c), relative branch."""
    c = np.exp(1j * c)
    u = (np.asarray(z, dtype=complex) - c) / (1j * c)
    arg = np.angle(u)
    arg = np.where(arg < -0.5 * np.pi, arg + TWO_PI, arg)  # Im u >= 0 up to rounding
    return np.exp(a * (np.log(np.abs(u)) + 1j * arg))


def boundary_rel_power(psi, c, a):
    d = wrap(np.asarray(psi, dtype=float) - c)
    return (2.0 * np.sin(0.5 * d)) ** a * np.exp(0.5j * a * d)


def singular_coefficient(g_plus, g_minus, alpha):
    """Coefficient of (z - c)^{-alpha} in a Cauchy integral with endpoint data g(c+), g(c-)."""
    if not 0.0 < alpha < 1.0:
        raise DiskError("alpha must lie in (0, 1)")
    s = np.exp(1j * np.pi * alpha)
    return (s * g_plus - g_minus / s) / (2j * math.sin(np.pi * alpha))


def orbit_value_closed_form(lam_minus, lam_plus, phi_minus, phi_plus, alpha):
    """(Lambda(p-) phi(p+) - Lambda(p+) phi(p-)) / (i sin(pi alpha)), before the sign."""
    if not 0.0 < alpha < 1.0:
        raise DiskError("closed form needs 0 < alpha < 1")
    return (lam_minus * phi_plus - lam_plus * phi_minus) / (1j * math.sin(np.pi * alpha))


# ---------------------------------------------------------------------------
# alternating function


@dataclass
class AlternatingAssignment:
    odd: np.ndarray  # sorted angles with odd q
    c0: float | None  # auxiliary point, present when len(odd) is odd
    points: np.ndarray  # sorted augmented set

    def beta(self, psi):
        psi = wrap(np.asarray(psi, dtype=float))
        n = len(self.points)
        if n == 0:
            return np.ones(psi.shape)
        count = np.searchsorted(self.points, psi, side="right")
        return np.where((count - 1) % 2 == 0, 1.0, -1.0)

    def beta_sides(self, c):
        """(beta(c-), beta(c+)) at a point of the augmented set or elsewhere."""
        eps = 1e-9
        return float(self.beta(c - eps)[()]), float(self.beta(c + eps)[()])

    @property
    def arcs(self):
        p = self.points
        return [(p[s], p[(s + 1) % len(p)]) for s in range(len(p))]


def auxiliary_point(all_points):
    """Midpoint of the longest gap between consecutive discontinuity points."""
    p = np.sort(wrap(np.asarray(all_points, dtype=float)))
    if len(p) == 0:
        return 0.0
    gaps = np.diff(np.concatenate([p, [p[0] + TWO_PI]]))
    k = int(np.argmax(gaps))
    return float(wrap(p[k] + 0.5 * gaps[k]))


def build_beta(odd_points, all_points=None):
    odd = np.sort(wrap(np.asarray(odd_points, dtype=float)))
    if len(odd) > 1 and np.min(np.diff(odd)) < 1e-12:
        raise DiskError("duplicate odd points")
    c0 = None
    pts = odd
    if len(odd) % 2:
        c0 = auxiliary_point(odd if all_points is None else all_points)
        pts = np.sort(np.concatenate([odd, [c0]]))
    return AlternatingAssignment(odd, c0, pts)


# ---------------------------------------------------------------------------
# problem data


@dataclass
class DiskPoint:
    angle: float
    alpha: float
    q: int
    lam_minus: complex = 1.0
    lam_plus: complex = 1.0
    psi_minus: float = 0.0
    psi_plus: float = 0.0
    tag: object = None


@dataclass
class DiskProblem:
    points: list  # DiskPoint
    lam: Callable  # psi -> unimodular symbol, away from the points
    psi: Callable = None  # psi -> real data; None for the homogeneous problem
    kappa: int | None = None  # expected index, cross-checked

    def check_jumps(self, tol=JUMP_TOL):
        for p in self.points:
            want = np.exp(1j * np.pi * (p.alpha + p.q)) * p.lam_plus
            if abs(p.lam_minus - want) > tol:
                raise DiskError(f"jump relation fails at angle {p.angle:.6f}")


def build_lambda_tilde(problem, psi):
    """lam * prod conj(zeta - c)^a / |zeta - c|^a at angles psi."""
    psi = np.asarray(psi, dtype=float)
    ph = np.zeros(psi.shape)
    for p in problem.points:
        ph += p.alpha * half_angle(psi, p.angle)
    return np.asarray(problem.lam(psi), dtype=complex) * np.exp(-1j * ph)


def build_lambda0(problem, assignment, psi):
    lt = build_lambda_tilde(problem, psi)
    if assignment.c0 is not None:
        lt = lt * np.exp(-1j * half_angle(psi, assignment.c0))
    return assignment.beta(psi) * lt


# ---------------------------------------------------------------------------
# solver


@dataclass
class Model:
    angle: float
    alpha: float
    B: complex  # coefficient of (z - c)^{-alpha}
    h_minus: float
    h_plus: float


class DiskSolver:
    """All boundary bookkeeping for one component's disk problem.

    After construction the object is read-only; evaluations are pure.
    """

    def __init__(self, problem: DiskProblem, n_nodes=4096, n_gauss=16, depth=12, tol=1e-10):
        problem.check_jumps()
        self.problem = problem
        self.points = sorted(problem.points, key=lambda p: wrap(p.angle))
        ang = np.array([wrap(p.angle) for p in self.points])
        self.assignment = build_beta([wrap(p.angle) for p in self.points if p.q % 2], ang)
        c0 = self.assignment.c0
        breaks = list(ang) + ([c0] if c0 is not None else [])
        def sample(t):
            cols = [np.asarray(problem.lam(t), dtype=complex)]
            if problem.psi is not None:
                cols.append(np.asarray(problem.psi(t), dtype=complex))
            return np.stack(cols, -1)

        self.panels = pn = CirclePanels(breaks, n_nodes=n_nodes, n_gauss=n_gauss, depth=depth,
                                        refine=sample, tol=tol)
        psi = pn.nodes()
        self.psi = psi
        self.zeta = np.exp(1j * psi)

        # reduced symbol and its index
        lam0 = build_lambda0(problem, self.assignment, psi)
        self.lam0 = lam0
        self.continuity_defect = self._continuity_defect(lam0)
        if self.continuity_defect > CONTINUITY_TOL:
            raise DiskError(f"reduced symbol is discontinuous (defect {self.continuity_defect:.3g})")
        self.kappa = winding_number(lam0)
        if problem.kappa is not None and problem.kappa != self.kappa:
            raise DiskError(f"winding {self.kappa} differs from the index {problem.kappa}")

        # gamma: Re on the circle, Im by conjugation
        g = np.unwrap(np.angle(lam0 * self.zeta ** (-self.kappa)))
        g -= TWO_PI * np.round(np.mean(g) / TWO_PI)
        self.re_gamma = g
        self.im_gamma = pn.hilbert(g)
        self._pt_re_gamma = {}
        self._pt_im_gamma = {}
        for c in breaks:
            gc = 0.5 * (pn.interp(g, [c], side="-")[0] + pn.interp(g, [c])[0])
            self._pt_re_gamma[c] = gc
            self._pt_im_gamma[c] = pn.hilbert_at(g, [c], [gc])[0]

        # modulus of P on the circle
        absP = np.ones_like(psi)
        for p in self.points:
            absP *= np.abs(2.0 * np.sin(0.5 * (psi - p.angle))) ** p.alpha
        if c0 is not None:
            absP *= np.abs(2.0 * np.sin(0.5 * (psi - c0)))
        self.absP = absP
        self.beta = self.assignment.beta(psi)

        self.homogeneous = problem.psi is None
        if self.homogeneous:
            self.psi_values = np.zeros_like(psi)
        else:
            self.psi_values = np.asarray(problem.psi(psi), dtype=float)
        self.rho = self.beta * self.psi_values / absP
        self.rho_hat = np.exp(self.im_gamma) * self.rho
        self._build_models()

    # -- construction helpers --------------------------------------------
    def _continuity_defect(self, lam0):
        pn = self.panels
        d = 0.0
        for c in pn.breaks:
            lo = pn.interp(lam0, [c], side="-")[0]
            hi = pn.interp(lam0, [c])[0]
            d = max(d, abs(lo - hi))
        return d

    def _others(self, c, skip):
        """prod_{l != skip} |c - c_l|^{alpha_l} times |c - c0| if present."""
        v = 1.0
        for p in self.points:
            if p is not skip:
                v *= abs(2.0 * math.sin(0.5 * (c - p.angle))) ** p.alpha
        if self.assignment.c0 is not None and skip != "c0":
            v *= abs(2.0 * math.sin(0.5 * (c - self.assignment.c0)))
        return v

    def _build_models(self):
        self.models = []
        model_re = np.zeros_like(self.psi)
        for p in self.points:
            if p.alpha == 0.0:
                continue
            c = wrap(p.angle)
            e = math.exp(self._pt_im_gamma[c]) / self._others(c, p)
            bm, bp = self.assignment.beta_sides(c)
            hm = e * bm * (0.0 if self.homogeneous else p.psi_minus)
            hp = e * bp * (0.0 if self.homogeneous else p.psi_plus)
            a = p.alpha
            B = hp + 1j * (hm - hp * math.cos(np.pi * a)) / math.sin(np.pi * a)
            self.models.append(Model(c, a, B, hm, hp))
            model_re += np.real(B * boundary_rel_power(self.psi, c, -a))
        self.K0 = 0.0
        c0 = self.assignment.c0
        if c0 is not None and not self.homogeneous:
            psi_c0 = float(self.problem.psi(np.array([c0]))[0])
            _, bp = self.assignment.beta_sides(c0)
            self.K0 = bp * math.exp(self._pt_im_gamma[c0]) * psi_c0 / self._others(c0, "c0")
            model_re += 0.5 * self.K0 / np.tan(0.5 * (self.psi - c0))
        self.remainder = self.rho_hat - model_re

    # -- holomorphic pieces ------------------------------------------------
    def gamma(self, z):
        return self.panels.schwarz(self.re_gamma, z)

    def P(self, z):
        z = np.asarray(z, dtype=complex)
        v = np.ones(z.shape, dtype=complex)
        for p in self.points:
            if p.alpha:
                v = v * rel_power(z, p.angle, p.alpha)
        c0 = self.assignment.c0
        if c0 is not None:
            e = np.exp(1j * c0)
            v = v * (z - e) / (1j * e)
        return v

    def _model_part(self, z):
        z = np.asarray(z, dtype=complex)
        v = np.zeros(z.shape, dtype=complex)
        for m in self.models:
            G0 = m.B * np.exp(-0.5j * np.pi * m.alpha)
            v = v + m.B * rel_power(z, m.angle, -m.alpha) - 1j * G0.imag
        if self.K0:
            e = np.exp(1j * self.assignment.c0)
            v = v + self.K0 * 1j * z / (z - e)
        return v

    def S_rho_hat(self, z):
        """S(rho_hat)(z) for |z| < 1."""
        if self.homogeneous:
            return np.zeros(np.shape(z), dtype=complex)
        return self._model_part(z) + self.panels.schwarz(self.remainder, z)

    def _free_part(self, z, d):
        """z^kappa (i d0 + sum d_l z^l - conj(d_l) z^-l), d real vector of length 2 kappa + 1."""
        z = np.asarray(z, dtype=complex)
        k = self.kappa
        if d is None or k < 0:
            return np.zeros(z.shape, dtype=complex)
        d = np.asarray(d, dtype=float)
        v = 1j * d[0] * z**k
        for l in range(1, k + 1):
            dl = d[2 * l - 1] + 1j * d[2 * l]
            v = v + dl * z ** (k + l) - np.conj(dl) * z ** (k - l)
        return v

    def w0(self, z, d=None, particular=True):
        z = np.asarray(z, dtype=complex)
        eg = np.exp(1j * self.gamma(z))
        out = self._free_part(z, d)
        if particular and not self.homogeneous:
            out = out + z**self.kappa * self.S_rho_hat(z) if self.kappa >= 0 else out + self.S_rho_hat(z) / z ** (-self.kappa)
        return eg * out

    def w(self, z, d=None, particular=True):
        """Component solution on the disk (free parameters d, see ``n_free``)."""
        return self.P(z) * self.w0(z, d, particular)

    @property
    def n_free(self):
        return 2 * self.kappa + 1 if self.kappa >= 0 else 0

    # -- boundary values -------------------------------------------------
    def _hilbert_remainder(self):
        if not hasattr(self, "_hr"):
            self._hr = self.panels.hilbert(self.remainder)
        return self._hr

    def boundary_S(self, psi=None):
        """Boundary values of S(rho_hat) at the nodes, or at angles psi off the breakpoints."""
        if psi is None:
            psi = self.psi
            r, hr = self.remainder, self._hilbert_remainder()
        else:
            psi = np.asarray(psi, dtype=float)
            r = self.panels.interp(self.remainder, psi)
            hr = self.panels.interp(self._hilbert_remainder(), psi)
        if self.homogeneous:
            return np.zeros(psi.shape, dtype=complex)
        zeta = np.exp(1j * psi)
        v = r + 1j * hr
        for m in self.models:
            G0 = m.B * np.exp(-0.5j * np.pi * m.alpha)
            v = v + m.B * boundary_rel_power(psi, m.angle, -m.alpha) - 1j * G0.imag
        if self.K0:
            e = np.exp(1j * self.assignment.c0)
            v = v + self.K0 * 1j * zeta / (zeta - e)
        return v

    def boundary_eval(self, psi, d=None, particular=True):
        """Boundary values of w at angles psi (away from the breakpoints)."""
        psi = np.asarray(psi, dtype=float)
        zeta = np.exp(1j * psi)
        P = np.ones(psi.shape, dtype=complex)
        for p in self.points:
            if p.alpha:
                P = P * boundary_rel_power(psi, p.angle, p.alpha)
        if self.assignment.c0 is not None:
            e = np.exp(1j * self.assignment.c0)
            P = P * (zeta - e) / (1j * e)
        g = self.panels.interp(self.re_gamma, psi) + 1j * self.panels.interp(self.im_gamma, psi)
        W = self._free_part(zeta, d)
        if particular and not self.homogeneous:
            W = W + zeta**self.kappa * self.boundary_S(psi)
        return P * np.exp(1j * g) * W

    def boundary_values(self, d=None, particular=True):
        return self.boundary_eval(self.psi, d, particular)

    def boundary_residual(self, d=None, particular=True):
        lam = np.asarray(self.problem.lam(self.psi), dtype=complex)
        target = self.psi_values if particular else 0.0
        return np.real(np.conj(lam) * self.boundary_values(d, particular)) - target

    # -- homogeneous problem -----------------------------------------------
    def zero_alpha_points(self):
        return [p for p in self.points if p.alpha == 0.0]

    def vanish_constraints(self):
        return vanish_constraints(self.kappa, [p.angle for p in self.zero_alpha_points()])

    def homogeneous_basis(self):
        """Real parameter vectors spanning the solutions that vanish at every c_k."""
        if self.kappa < 0:
            return np.zeros((0, 0))
        _, kernel = self.vanish_constraints()
        return kernel

    # -- orbit values ------------------------------------------------------
    def orbit_limit(self, k, d=None, particular=True):
        """Limit of w at the point with index k (in ``self.points``).

        For alpha > 0 the free terms drop out and the limit is
        B_k prod_{l != k} (c_k - c_l)^{alpha_l} (c_k - c0)/(i c0) c_k^kappa e^{i gamma(c_k)}.
        """
        p = self.points[k]
        c = wrap(p.angle)
        ck = np.exp(1j * c)
        Q = 1.0 + 0j
        for o in self.points:
            if o is not p and o.alpha:
                Q *= boundary_rel_power(c, o.angle, o.alpha)
        if self.assignment.c0 is not None:
            e = np.exp(1j * self.assignment.c0)
            Q *= (ck - e) / (1j * e)
        eg = np.exp(1j * self._pt_re_gamma[c] - self._pt_im_gamma[c])
        if p.alpha > 0:
            if not particular or self.homogeneous:
                return 0j
            m = next(m for m in self.models if m.angle == c)
            return complex(m.B * Q * ck**self.kappa * eg)
        # alpha = 0: boundary value of W at c from both sides, averaged
        pn = self.panels
        W = complex(self._free_part(np.array([ck]), d)[0])
        if particular and not self.homogeneous:
            r = self.remainder
            rl = pn.interp(r, [c], side="-")[0]
            rr = pn.interp(r, [c])[0]
            rc = 0.5 * (rl + rr)
            Hr = pn.hilbert_at(r, [c], [rc])[0]
            S = rc + 1j * Hr
            for m in self.models:
                G0 = m.B * np.exp(-0.5j * np.pi * m.alpha)
                S += m.B * boundary_rel_power(c, m.angle, -m.alpha) - 1j * G0.imag
            if self.K0:
                e = np.exp(1j * self.assignment.c0)
                S += self.K0 * 1j * ck / (ck - e)
            W += ck**self.kappa * S
        return complex(Q * eg * W)

    def radial_limit(self, k, d=None, particular=True, r_min=1e-5, r_max=1e-2, n=12):
        """Extrapolated limit of w along the radius into c_k; fit L + A r^alpha + B r."""
        p = self.points[k]
        ck = np.exp(1j * p.angle)
        r = np.geomspace(r_min, r_max, n)
        vals = self.w(ck * (1.0 - r), d, particular)
        a = p.alpha if p.alpha > 0 else 0.5
        M = np.stack([np.ones_like(r), r**a, r], axis=1).astype(complex)
        coef, *_ = np.linalg.lstsq(M, vals, rcond=None)
        return complex(coef[0])

    def closed_form(self, k):
        """Closed-form orbit value from one-sided data and its sign (-1)^q."""
        p = self.points[k]
        v = orbit_value_closed_form(p.lam_minus, p.lam_plus, p.psi_minus, p.psi_plus, p.alpha)
        return complex(v), (-1) ** (p.q % 2)

    # -- negative index --------------------------------------------------
    def moments(self):
        """Moments int rho_hat zeta^{-s} dzeta, s = 1..-kappa, from the Taylor coefficients of S(rho_hat)."""
        if self.kappa >= 0:
            return np.zeros(0, dtype=complex)
        n = -self.kappa
        c = taylor_coefficients(self.S_rho_hat, n)
        # S = a0 + 2 sum a_n z^n and the s-th moment is 2 pi i a_{s-1}
        a = np.concatenate([[c[0]], 0.5 * c[1:]])
        return TWO_PI * 1j * a

    def laurent(self, d=None, radius=0.1, n=256):
        return laurent_coefficients(lambda z: self.w(z, d), radius, n)

    def pole_order(self, d=None, rel_tol=1e-8):
        if self.kappa >= 0:
            return 0
        m, a = self.laurent(d)
        return pole_order_from_laurent(m, a, 0.1, -self.kappa, rel_tol)


# ---------------------------------------------------------------------------
# helpers shared with tests and assembly


def vanish_constraints(kappa, angles):
    """Real rows of i d0 + sum (d_l c^l - conj(d_l c^l)) = 0 and an orthonormal kernel basis."""
    if kappa < 0:
        return np.zeros((len(angles), 0)), np.zeros((0, 0))
    ncol = 2 * kappa + 1
    rows = []
    for c in angles:
        row = [1.0]
        for l in range(1, kappa + 1):
            row += [2.0 * math.sin(l * c), 2.0 * math.cos(l * c)]
        rows.append(row)
    A = np.array(rows, dtype=float).reshape(len(angles), ncol)
    if len(angles) == 0:
        return A, np.eye(ncol)
    _, s, vt = np.linalg.svd(A)
    rank = int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
    return A, vt[rank:].T.copy()


def homogeneous_family(kappa):
    """Number of real parameters of the homogeneous family for a continuous symbol of index kappa."""
    return 2 * kappa + 1 if kappa >= 0 else 0


def rho(psi_values, beta_values, abs_p):
    return np.asarray(beta_values) * np.asarray(psi_values) / np.asarray(abs_p)


def rho_hat(rho_values, im_gamma):
    return np.exp(np.asarray(im_gamma)) * np.asarray(rho_values)


def gamma_boundary(lam0_samples, kappa):
    """Re gamma = arg lam0 - kappa arg zeta on a uniform grid, and gamma as an evaluator."""
    lam0 = np.asarray(lam0_samples, dtype=complex)
    M = len(lam0)
    zeta = np.exp(1j * TWO_PI * np.arange(M) / M)
    if winding_number(lam0) != kappa:
        raise DiskError("winding of the reduced symbol differs from kappa")
    g = np.unwrap(np.angle(lam0 * zeta ** (-kappa)))
    g -= TWO_PI * np.round(np.mean(g) / TWO_PI)
    return g, schwarz(g)


def continuity_conditions(rho_hat_samples, kappa):
    """Moments int rho_hat zeta^{-s} dzeta, s = 1..-kappa, for uniform samples from angle 0."""
    if kappa >= 0:
        return np.zeros(0, dtype=complex)
    f = np.asarray(rho_hat_samples, dtype=float)
    M = len(f)
    t = TWO_PI * np.arange(M) / M
    return np.array([1j * TWO_PI * np.mean(f * np.exp(-1j * (s - 1) * t)) for s in range(1, -kappa + 1)])


def taylor_coefficients(fn, n, radius=0.5, m=128):
    t = TWO_PI * np.arange(m) / m
    vals = fn(radius * np.exp(1j * t))
    c = np.fft.fft(vals) / m
    return c[:n] / radius ** np.arange(n)


def laurent_coefficients(fn, radius=0.1, n=256):
    """Coefficients a_m, m = -n/2..n/2-1, of fn on the annulus around |z| = radius."""
    if radius <= 0:
        raise DiskError("contour radius must be positive")
    t = TWO_PI * np.arange(n) / n
    vals = fn(radius * np.exp(1j * t))
    c = np.fft.fft(vals) / n
    m = np.fft.fftfreq(n, 1.0 / n).astype(int)
    order = np.argsort(m)
    m, c = m[order], c[order]
    return m, c / radius**m.astype(float)


def pole_order_from_laurent(m, a, radius, max_order, rel_tol=1e-8):
    """Smallest s <= max_order such that a_{-j} is negligible for every j > s."""
    scaled = np.abs(a) * radius ** m.astype(float)
    ref = np.max(scaled[np.abs(m) <= max(8, max_order + 2)])
    if ref == 0:
        return 0
    neg = {int(-mm): s for mm, s in zip(m, scaled) if mm < 0}
    order = 0
    for j in sorted(neg):
        if neg[j] > rel_tol * ref:
            order = j
    return order
