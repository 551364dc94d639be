"""Vector fields L = A d/dx + B d/dy and the checks run on them.

All evaluators take ``(x, y)`` arrays and return complex arrays.  Partial
derivatives are central differences with step ``FD_STEP``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)

FD_STEP = 1e-5
NONSINGULAR_TOL = 1e-12
THETA_TOL = 1e-8
TANGENCY_TOL = 1e-8
MINIMALITY_TOL = 1e-6


class FieldError(ValueError):
    pass


def _as_complex_fn(fn):
    def wrapped(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.asarray(fn(x, y), dtype=complex)
        if out.shape != np.broadcast(x, y).shape:
            out = np.broadcast_to(out, np.broadcast(x, y).shape).copy()
        return out

    return wrapped


@dataclass(frozen=True)
class VectorField:
    """Complex vector field with coefficient evaluators ``A`` and ``B``."""

    A: Callable
    B: Callable
    name: str = "L"

    def __post_init__(self):
        object.__setattr__(self, "A", _as_complex_fn(self.A))
        object.__setattr__(self, "B", _as_complex_fn(self.B))

    def coefficients(self, x, y):
        return self.A(x, y), self.B(x, y)

    def apply(self, u: Callable, x, y, h: float = FD_STEP):
        """L u at (x, y) with u differentiated by central differences."""
        ux, uy = partials(u, x, y, h)
        a, b = self.coefficients(x, y)
        return a * ux + b * uy

    def check_nonsingular(self, x, y, tol: float = NONSINGULAR_TOL):
        a, b = self.coefficients(x, y)
        s = np.abs(a) + np.abs(b)
        if np.any(s <= tol):
            k = int(np.argmin(s))
            raise FieldError(
                f"vector field is singular near ({np.ravel(x)[k]:.6g}, {np.ravel(y)[k]:.6g})"
            )


def partials(u: Callable, x, y, h: float = FD_STEP):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ux = (np.asarray(u(x + h, y)) - np.asarray(u(x - h, y))) / (2 * h)
    uy = (np.asarray(u(x, y + h)) - np.asarray(u(x, y - h))) / (2 * h)
    if not (np.all(np.isfinite(ux)) and np.all(np.isfinite(uy))):
        raise FieldError("non-finite partial derivatives")
    return ux, uy


def theta(vf: VectorField, x, y):
    """Im(A conj(B)); L is elliptic exactly where this is nonzero."""
    a, b = vf.coefficients(x, y)
    return np.imag(a * np.conj(b))


def first_integral_residual(vf: VectorField, Z: Callable, x, y, h: float = FD_STEP):
    """A Z_x + B Z_y; vanishes where Z is a first integral."""
    vf.check_nonsingular(x, y)
    return vf.apply(Z, x, y, h)


# --------------------------------------------------------------------------
# condition (P)


@dataclass
class ConditionPReport:
    components: list  # dicts: id, min, max, n_samples, pass
    tol: float
    verdict: bool

    def to_dict(self):
        return {"tol": self.tol, "pass": self.verdict, "components": self.components}


def check_condition_P(vf: VectorField, samples: dict, tol: float = THETA_TOL) -> ConditionPReport:
    """Sign constancy of theta over sampled points of each component.

    ``samples`` maps a component id to an (n, 2) array of interior points,
    usually from ``Decomposition.sample_interior``.
    """
    comps = []
    ok = True
    for cid, pts in samples.items():
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        if len(pts) == 0:
            raise FieldError(f"component {cid} has no sample points")
        th = theta(vf, pts[:, 0], pts[:, 1])
        lo, hi = float(th.min()), float(th.max())
        good = (lo >= -tol) or (hi <= tol)
        ok = ok and good
        comps.append({"id": cid, "min": lo, "max": hi, "n_samples": int(len(pts)), "pass": bool(good)})
    return ConditionPReport(comps, tol, ok)


# --------------------------------------------------------------------------
# declared orbits


@dataclass
class OrbitReport:
    max_theta: float
    max_tangency_defect: float
    min_transversal_derivative: float
    theta_ok: bool
    tangent_ok: bool
    minimal_ok: bool
    samples: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def verdict(self) -> bool:
        return self.theta_ok and self.tangent_ok and self.minimal_ok

    def to_dict(self):
        return {
            "max_theta": self.max_theta,
            "max_tangency_defect": self.max_tangency_defect,
            "min_transversal_derivative": self.min_transversal_derivative,
            "theta_ok": self.theta_ok,
            "tangent_ok": self.tangent_ok,
            "minimal_ok": self.minimal_ok,
            "pass": self.verdict,
        }


def check_orbit(
    vf: VectorField,
    curve: Callable,
    s_range: Sequence[float] = (0.0, 1.0),
    n: int = 257,
    theta_tol: float = THETA_TOL,
    tangency_tol: float = TANGENCY_TOL,
    minimality_tol: float = MINIMALITY_TOL,
    h: float = FD_STEP,
) -> OrbitReport:
    """Verify that a parametric curve ``s -> (x, y)`` is a minimal orbit of ``vf``.

    Tangency is measured as |Re V x T| and |Im V x T| for the unit tangent T
    and the unit-normalised coefficient vector V = (A, B).  Minimality is the
    first-order vanishing of theta: |d theta / dn| bounded below.
    """
    s0, s1 = s_range
    # stay off the end points, where the curve meets the boundary
    s = np.linspace(s0, s1, n)[1:-1]
    ds = 1e-6 * (s1 - s0)
    p = np.asarray(curve(s), dtype=float)
    pp = np.asarray(curve(s + ds), dtype=float)
    pm = np.asarray(curve(s - ds), dtype=float)
    t = (pp - pm) / (2 * ds)
    tn = np.hypot(t[0], t[1])
    if np.any(tn < 1e-12):
        raise FieldError("degenerate curve: zero-length tangent")
    t = t / tn
    x, y = p[0], p[1]
    a, b = vf.coefficients(x, y)
    scale = np.sqrt(np.abs(a) ** 2 + np.abs(b) ** 2)
    th = theta(vf, x, y)
    re_cross = np.abs(np.real(a) * t[1] - np.real(b) * t[0]) / scale
    im_cross = np.abs(np.imag(a) * t[1] - np.imag(b) * t[0]) / scale
    defect = np.maximum(re_cross, im_cross)
    nx, ny = -t[1], t[0]
    dth = (theta(vf, x + h * nx, y + h * ny) - theta(vf, x - h * nx, y - h * ny)) / (2 * h)
    rep = OrbitReport(
        max_theta=float(np.max(np.abs(th))),
        max_tangency_defect=float(np.max(defect)),
        min_transversal_derivative=float(np.min(np.abs(dth))),
        theta_ok=bool(np.max(np.abs(th)) < theta_tol),
        tangent_ok=bool(np.max(defect) < tangency_tol),
        minimal_ok=bool(np.min(np.abs(dth)) > minimality_tol),
        samples=len(s),
    )
    return rep


# --------------------------------------------------------------------------
# dual form and closed-orbit periods


def dual_form_eta(vf: VectorField, f: Callable, x, y):
    """Coefficients (p, q) of eta = p dx + q dy with f dx^dy = omega ^ eta.

    omega = B dx - A dy is the dual form; the representative used is
    eta = f (conj(A) dx + conj(B) dy) / (|A|^2 + |B|^2), so A p + B q = f.
    """
    a, b = vf.coefficients(x, y)
    nrm = np.abs(a) ** 2 + np.abs(b) ** 2
    if np.any(nrm <= NONSINGULAR_TOL**2):
        raise FieldError("dual form undefined where the field vanishes")
    fv = np.asarray(f(np.asarray(x, float), np.asarray(y, float)), dtype=complex)
    return fv * np.conj(a) / nrm, fv * np.conj(b) / nrm


def closed_orbit_period(
    vf: VectorField,
    f: Callable,
    curve: Callable,
    n_quad: int = 256,
    s_range: Sequence[float] = (0.0, 2 * np.pi),
    closed_tol: float = 1e-8,
) -> complex:
    """Trapezoidal line integral of eta over the closed curve ``s -> (x, y)``."""
    s0, s1 = s_range
    a = np.asarray(curve(np.array([s0, s1])), dtype=float)
    if np.hypot(a[0, 0] - a[0, 1], a[1, 0] - a[1, 1]) > closed_tol:
        raise FieldError("curve is not closed")
    s = s0 + (s1 - s0) * np.arange(n_quad) / n_quad
    ds = 1e-6 * (s1 - s0)
    p = np.asarray(curve(s), dtype=float)
    d = (np.asarray(curve(s + ds), dtype=float) - np.asarray(curve(s - ds), dtype=float)) / (2 * ds)
    pc, qc = dual_form_eta(vf, f, p[0], p[1])
    integrand = pc * d[0] + qc * d[1]
    return complex(np.sum(integrand) * (s1 - s0) / n_quad)
