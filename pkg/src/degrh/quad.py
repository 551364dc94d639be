"""Quadrature on the unit circle for piecewise smooth data.

Boundary data of the disk problems are smooth between a handful of
breakpoints and have power-law behaviour at them.  ``CirclePanels`` covers
the circle with Gauss-Legendre panels graded geometrically towards the
breakpoints, and provides interpolation, the conjugate function (boundary
Hilbert transform) and the Schwarz integral at interior points.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.special import roots_jacobi

from .conformal import gauss_rule

TWO_PI = 2.0 * np.pi


def schwarz_fft(samples):
    """Schwarz integral of real samples on a uniform grid (first node at angle 0).

    Returns ``(evaluate, coefficients)``; ``evaluate(z)`` sums
    a_0 + 2 sum_{n>=1} a_n z^n with a_n the discrete Fourier coefficients.
    """
    f = np.asarray(samples)
    if np.iscomplexobj(f):
        if np.max(np.abs(f.imag)) > 1e-12 * max(1.0, np.max(np.abs(f))):
            raise ValueError("Schwarz operator needs real boundary data")
        f = f.real
    M = len(f)
    a = np.fft.rfft(f) / M
    nmax = (M - 1) // 2  # drop the Nyquist mode, its conjugate is ambiguous
    coef = np.concatenate([[a[0].real], 2 * a[1 : nmax + 1]])

    def evaluate(z):
        z = np.asarray(z, dtype=complex)
        return np.polynomial.polynomial.polyval(z, coef)

    return evaluate, coef


def schwarz_direct(samples, z):
    """Trapezoid rule for (1/2pi) int f(t) (e^{it}+z)/(e^{it}-z) dt; oracle for tests."""
    f = np.asarray(samples, dtype=float)
    M = len(f)
    zeta = np.exp(1j * TWO_PI * np.arange(M) / M)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    return ((zeta[None, :] + z[:, None]) / (zeta[None, :] - z[:, None]) * f[None, :]).mean(axis=1)


def jacobi_rule(n, a, b):
    """Nodes/weights on [-1, 1] for weight (1-x)^a (1+x)^b."""
    return roots_jacobi(n, a, b)


class CirclePanels:
    """Graded Gauss-Legendre panels on [psi_0, psi_0 + 2 pi).

    ``breaks`` are angles where data may be non-smooth; panels end exactly
    at them, so no node ever sits on a breakpoint.
    """

    def __init__(self, breaks=(), n_nodes=4096, n_gauss=16, depth=12, refine=None, tol=1e-10, max_panels=4096):
        br = np.sort(np.mod(np.asarray(breaks, dtype=float), TWO_PI))
        self.breaks = br
        self.n_gauss = n_gauss
        total_panels = max(8, n_nodes // n_gauss)
        a_list, b_list, arc_list = [], [], []
        if len(br) == 0:
            edges = np.linspace(0.0, TWO_PI, total_panels + 1)
            a_list, b_list = list(edges[:-1]), list(edges[1:])
            arc_list = [0] * total_panels
            self.origin = 0.0
        else:
            self.origin = br[0]
            ends = np.concatenate([br, [br[0] + TWO_PI]])
            nb = len(br)
            budget = max(2 * nb, total_panels - 2 * depth * nb)
            for k in range(nb):
                lo, hi = ends[k], ends[k + 1]
                n_mid = max(2, int(round(budget * (hi - lo) / TWO_PI)))
                u = list(np.linspace(0.0, 1.0, n_mid + 1))
                h = 1.0 / n_mid
                u = [0.0] + [h * 2.0**-j for j in range(depth, 0, -1)] + u[1:-1]
                u = u + [1.0 - h * 2.0**-j for j in range(1, depth + 1)] + [1.0]
                e = lo + (hi - lo) * np.array(sorted(set(u)))
                a_list += list(e[:-1])
                b_list += list(e[1:])
                arc_list += [k] * (len(e) - 1)
        self.a = np.array(a_list)
        self.b = np.array(b_list)
        self.arc = np.array(arc_list)
        x, w, self._Vinv, D = gauss_rule(n_gauss)
        if refine is not None:
            self._refine(refine, x, tol, max_panels)
        self.half = 0.5 * (self.b - self.a)
        mid = 0.5 * (self.a + self.b)
        self.psi = mid[:, None] + self.half[:, None] * x[None, :]
        self.w = self.half[:, None] * w[None, :]
        self.D = D
        self.zeta = np.exp(1j * self.psi)

    def _refine(self, fn, x, tol, max_panels):
        """Bisect panels whose Legendre tails exceed tol (relative); breakpoint panels stay graded."""
        br = np.concatenate([self.breaks, self.breaks + TWO_PI])

        def touches(a, b):
            return bool(br.size) and (np.min(np.abs(br - a)) < 1e-14 or np.min(np.abs(br - b)) < 1e-14)

        # evaluate all panels in one call, then only the new halves
        h = 0.5 * (self.b - self.a)
        t = 0.5 * (self.a + self.b)[:, None] + h[:, None] * x[None, :]
        v = np.asarray(fn(t.reshape(-1))).reshape(t.shape[0], t.shape[1], -1)
        panels = [[self.a[k], self.b[k], self.arc[k], v[k]] for k in range(len(self.a))]
        scale = max(np.max(np.abs(v)), 1e-300)
        for _ in range(30):
            split = []
            for k, (a, b, _, val) in enumerate(panels):
                c = self._Vinv @ val
                if np.max(np.abs(c[-3:])) > tol * scale and b - a > 2e-12 and not touches(a, b):
                    split.append(k)
            if not split or len(panels) + len(split) > max_panels:
                break
            mids = [0.5 * (panels[k][0] + panels[k][1]) for k in split]
            tt = np.concatenate([0.5 * (lo + hi) + 0.5 * (hi - lo) * x
                                 for k, m in zip(split, mids) for lo, hi in ((panels[k][0], m), (m, panels[k][1]))])
            vv = np.asarray(fn(tt)).reshape(2 * len(split), len(x), -1)
            new = []
            sset = dict(zip(split, range(len(split))))
            for k, pnl in enumerate(panels):
                if k in sset:
                    i = sset[k]
                    m = mids[i]
                    new.append([pnl[0], m, pnl[2], vv[2 * i]])
                    new.append([m, pnl[1], pnl[2], vv[2 * i + 1]])
                else:
                    new.append(pnl)
            panels = new
        self.a = np.array([p[0] for p in panels])
        self.b = np.array([p[1] for p in panels])
        self.arc = np.array([p[2] for p in panels])

    # -- basic helpers ----------------------------------------------------
    @property
    def shape(self):
        return self.psi.shape

    @property
    def n(self):
        return self.psi.size

    def nodes(self):
        return self.psi.reshape(-1)

    def integrate(self, values):
        return np.sum(np.asarray(values).reshape(self.shape) * self.w)

    def derivative(self, values):
        v = np.asarray(values).reshape(self.shape)
        return (v @ self.D.T) / self.half[:, None]

    def rel(self, psi):
        return self.origin + np.mod(np.asarray(psi, dtype=float) - self.origin, TWO_PI)

    def locate(self, psi):
        p = self.rel(psi)
        k = np.searchsorted(self.a, p, side="right") - 1
        return np.clip(k, 0, len(self.a) - 1), p

    def _nearest_node(self, psi):
        flat = self.psi.reshape(-1)
        p = self.origin + np.mod(np.asarray(psi, dtype=float) - self.origin, TWO_PI)
        j = np.searchsorted(flat, p)
        lo, hi = (j - 1) % flat.size, j % flat.size
        dlo = np.abs(np.angle(np.exp(1j * (flat[lo] - p))))
        dhi = np.abs(np.angle(np.exp(1j * (flat[hi] - p))))
        return np.where(dlo <= dhi, lo, hi)

    def interp(self, values, psi, side=None):
        """Panel-wise Legendre interpolation; ``side`` picks the panel at a breakpoint ('-' or '+')."""
        v = np.asarray(values).reshape(self.shape)
        psi = np.atleast_1d(np.asarray(psi, dtype=float))
        k, p = self.locate(psi)
        if side == "-":
            # the panel ending at p
            k = np.searchsorted(self.b, p, side="left")
            k = np.where(k >= len(self.b), len(self.b) - 1, k)
            wrap = np.isclose(p, self.origin)
            k = np.where(wrap, len(self.b) - 1, k)
            p = np.where(wrap, self.b[-1], p)
        out = np.empty(psi.shape, dtype=v.dtype)
        for q in np.unique(k):
            m = k == q
            coef = self._Vinv @ v[q]
            xl = (p[m] - 0.5 * (self.a[q] + self.b[q])) / self.half[q]
            out[m] = npleg.legval(xl, coef)
        return out

    # -- conjugate function ---------------------------------------------
    def hilbert(self, values, chunk=1024):
        """Conjugate function at the nodes: (1/2pi) PV int f(t) cot((psi - t)/2) dt."""
        f = np.asarray(values, dtype=float).reshape(-1)
        psi = self.nodes()
        w = self.w.reshape(-1)
        df = self.derivative(f).reshape(-1)
        out = np.empty_like(f)
        for s in range(0, len(f), chunk):
            i = np.arange(s, min(s + chunk, len(f)))
            d = psi[i][:, None] - psi[None, :]
            with np.errstate(divide="ignore", invalid="ignore"):
                kern = 1.0 / np.tan(0.5 * d)
            kern[np.arange(len(i)), i] = 0.0
            val = ((f[None, :] - f[i][:, None]) * kern * w[None, :]).sum(axis=1)
            val += -2.0 * df[i] * w[i]
            out[i] = val / TWO_PI
        return out

    def hilbert_at(self, values, psi_t, f_t):
        """Conjugate function at arbitrary targets off the nodes, given f there."""
        f = np.asarray(values, dtype=float).reshape(-1)
        psi = self.nodes()
        w = self.w.reshape(-1)
        psi_t = np.atleast_1d(np.asarray(psi_t, dtype=float))
        f_t = np.atleast_1d(np.asarray(f_t, dtype=float))
        d = psi_t[:, None] - psi[None, :]
        kern = 1.0 / np.tan(0.5 * d)
        return ((f[None, :] - f_t[:, None]) * kern * w[None, :]).sum(axis=1) / TWO_PI

    # -- Schwarz integral at interior points -----------------------------
    def _graded_panel(self, p, fp, zi, fs):
        """Schwarz kernel sums over panel p, subdivided geometrically towards each target.

        ``fp`` is (K, n_gauss) for K stacked data sets, ``fs`` (K, n_targets).
        """
        x, w, _, _ = gauss_rule(self.n_gauss)
        mid, h = 0.5 * (self.a[p] + self.b[p]), self.half[p]
        coef = self._Vinv @ fp.T  # (n_gauss, K)
        rel = self.rel(np.angle(zi))
        tc = np.clip(rel, self.a[p], self.b[p])
        xc = (tc - mid) / h
        eps = np.maximum(np.abs(zi - np.exp(1j * tc)) / h, 1e-15)
        levels = np.clip(np.ceil(np.log2(2.0 / eps)) + 1, 1, 55).astype(int)
        out = np.empty((fp.shape[0], len(zi)), dtype=complex)
        for J in np.unique(levels):
            g = levels == J
            n = int(g.sum())
            off = eps[g, None] * 2.0 ** np.arange(J)[None, :]
            br = np.concatenate([-np.ones((n, 1)), np.ones((n, 1)), xc[g, None] - off, xc[g, None] + off], axis=1)
            br = np.sort(np.clip(br, -1.0, 1.0), axis=1)
            hs = 0.5 * (br[:, 1:] - br[:, :-1])
            xs = (0.5 * (br[:, 1:] + br[:, :-1]))[:, :, None] + hs[:, :, None] * x[None, None, :]
            ws = (hs[:, :, None] * w[None, None, :]).reshape(n, -1) * h
            xs = xs.reshape(n, -1)
            zu = np.exp(1j * (mid + h * xs))
            zg = zi[g]
            kern = (zu + zg[:, None]) / (zu - zg[:, None]) * ws
            fu = npleg.legval(xs, coef)  # (K, n, L)
            out[:, g] = ((fu - fs[:, g, None]) * kern[None]).sum(-1)
        return out

    def schwarz(self, values, z, chunk=256):
        """S(f)(z) = (1/2pi) int f(t) (e^{it} + z)/(e^{it} - z) dt for |z| < 1.

        The value of f at the nearest node is subtracted (its Schwarz integral
        is the constant itself) and panels close to z are refined adaptively.
        ``values`` may carry a leading axis of stacked data sets.
        """
        v = np.asarray(values)
        stacked = v.size != int(np.prod(self.shape))
        f = v.reshape((-1,) + self.shape)  # (K, P, G)
        nk = f.shape[0]
        fl = f.reshape(nk, -1)
        zeta = self.zeta.reshape(-1)
        w = self.w.reshape(-1)
        z = np.asarray(z, dtype=complex)
        shp = z.shape
        z = z.reshape(-1)
        if np.any(np.abs(z) >= 1.0):
            raise ValueError("Schwarz integral evaluated outside the open disk")
        out = np.empty((nk, len(z)), dtype=complex)
        plen = 2 * self.half
        fw = (fl * w[None, :]).T  # (N, K)
        for s in range(0, len(z), chunk):
            zz = z[s : s + chunk]
            k = self._nearest_node(np.angle(zz))
            fs = fl[:, k]  # (K, T)
            K = zeta[None, :] - zz[:, None]
            np.divide(zeta[None, :] + zz[:, None], K, out=K)
            val = (K @ fw).T - fs * (K @ w)[None, :]
            # adaptive refinement of nearby panels
            rr = np.abs(zz)
            rel = self.rel(np.angle(zz))
            gap = np.maximum(self.a[None, :] - rel[:, None], rel[:, None] - self.b[None, :])
            gap = np.minimum(np.maximum(gap, 0.0), TWO_PI - (self.b - self.a)[None, :] - gap)
            gap = np.clip(gap, 0.0, np.pi)
            dist2 = (1.0 - rr[:, None]) ** 2 + 4.0 * rr[:, None] * np.sin(0.5 * gap) ** 2
            ti, pi_ = np.nonzero(dist2 < (1.5 * plen[None, :]) ** 2)
            order = np.argsort(pi_, kind="stable")
            ti, pi_ = ti[order], pi_[order]
            cuts = np.flatnonzero(np.diff(pi_)) + 1
            for idx, pp in zip(np.split(ti, cuts), np.split(pi_, cuts)):
                if idx.size == 0:
                    continue
                p = pp[0]
                kern = ((self.zeta[p][None, :] + zz[idx][:, None]) / (self.zeta[p][None, :] - zz[idx][:, None])
                        * self.w[p][None, :])
                coarse = ((f[:, p][:, None, :] - fs[:, idx][:, :, None]) * kern[None]).sum(-1)
                fine = self._graded_panel(p, f[:, p], zz[idx], fs[:, idx])
                val[:, idx] += fine - coarse
            out[:, s : s + chunk] = fs + val / TWO_PI
        if stacked:
            return out.reshape((nk,) + shp)
        return out[0].reshape(shp)

    def schwarz_derivative(self, values, z, r_small=0.25):
        """d/dz S(f)(z) for continuous piecewise smooth f.

        Integration by parts gives S(f)'(z) = S(f')(z) / (i z), which reuses
        the near-boundary machinery of ``schwarz``; close to the centre the
        kernel 2 zeta / (zeta - z)^2 is smooth and summed directly.
        """
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        f = np.asarray(values).reshape(self.shape)
        out = np.empty(z.shape, dtype=complex)
        small = np.abs(z) < r_small
        if np.any(small):
            zs = z[small]
            zeta, w = self.zeta.reshape(-1), (f * self.w).reshape(-1)
            out[small] = (2.0 * zeta[None, :] / (zeta[None, :] - zs[:, None]) ** 2) @ w / TWO_PI
        if np.any(~small):
            zb = z[~small]
            out[~small] = self.schwarz(self.derivative(f), zb) / (1j * zb)
        return out

