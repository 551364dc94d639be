"""Argument bookkeeping for the boundary symbol and the per-component indices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import TWO_PI, Decomposition

UNIMODULAR_TOL = 1e-10
SNAP_TOL = 1e-9
MAX_INCREMENT = np.pi / 2
REFINE_CAP = 2**22


class IndexError_(ValueError):
    """Inconsistent boundary data or index arithmetic."""


@dataclass
class BoundaryData:
    """Lambda and phi as functions of the boundary parameter t."""

    Lambda: Callable
    phi: Callable = None
    holder_exponent: float = 0.5

    def lam(self, t):
        return np.asarray(self.Lambda(np.asarray(t, dtype=float)), dtype=complex)

    def ph(self, t):
        if self.phi is None:
            return np.zeros(np.shape(t))
        v = np.asarray(self.phi(np.asarray(t, dtype=float)), dtype=complex)
        if np.max(np.abs(v.imag), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(v), initial=0.0)):
            raise IndexError_("phi must be real valued")
        return v.real


@dataclass
class UnwrappedArg:
    t0: float
    u: np.ndarray  # relative parameters in [0, 2 pi]
    arg: np.ndarray
    q0: int
    data: BoundaryData

    def at(self, t) -> float:
        """Continuous branch at boundary parameter t, exact relative to the nearest node."""
        u = (float(t) - self.t0) % TWO_PI
        k = int(np.clip(np.searchsorted(self.u, u), 1, len(self.u) - 1))
        if u - self.u[k - 1] < self.u[k] - u:
            k -= 1
        ratio = self.data.lam(float(t)) / self.data.lam(self.t0 + self.u[k])
        return float(self.arg[k] + np.angle(ratio))


def unwrap_arg(data: BoundaryData, t0: float = 0.0, n: int = 4096) -> UnwrappedArg:
    """Continuous argument of Lambda from s0+ around to s0-, and q0 = (arg(s0-) - arg(s0+))/pi."""
    while True:
        u = np.linspace(0.0, TWO_PI, n + 1)
        lam = data.lam(t0 + u)
        if np.max(np.abs(np.abs(lam) - 1.0)) > UNIMODULAR_TOL:
            raise IndexError_("Lambda is not unimodular on the boundary")
        inc = np.angle(lam[1:] / lam[:-1])
        if np.max(np.abs(inc)) < MAX_INCREMENT:
            break
        n *= 2
        if n > REFINE_CAP:
            raise IndexError_("argument of Lambda varies too fast to unwrap")
    arg = np.angle(lam[0]) + np.concatenate([[0.0], np.cumsum(inc)])
    r = (arg[-1] - arg[0]) / np.pi
    q0 = int(round(r))
    if abs(r - q0) > 1e-6:
        raise IndexError_(f"Lambda is not continuous at s0 (q0 residual {abs(r - q0):.3g})")
    if q0 % 2:
        raise IndexError_("q0 is odd; Lambda must be continuous at the base point")
    return UnwrappedArg(t0, u, arg, q0, data)


def winding_count(data: BoundaryData, n: int = 4096) -> int:
    """Independent argument-principle count of the winding of Lambda."""
    t = np.linspace(0.0, TWO_PI, n, endpoint=False)
    z = data.lam(t)
    return int(round(np.sum(np.angle(np.roll(z, -1) / z)) / TWO_PI))


def jump(ua: UnwrappedArg, t_minus: float, t_plus: float) -> float:
    return ua.at(t_minus) - ua.at(t_plus)


def split_jump(theta: float, snap: float = SNAP_TOL):
    """theta = pi*(q + alpha) with q integer and alpha in [0, 1)."""
    r = theta / math.pi
    k = round(r)
    if abs(r - k) < snap:
        return int(k), 0.0
    q = math.floor(r)
    return int(q), float(r - q)


@dataclass
class OrbitJump:
    orbit: int
    orbit_id: object
    t_minus: float
    t_plus: float
    theta: float
    q: int
    alpha: float

    def to_dict(self):
        return {
            "orbit": self.orbit_id,
            "t_minus": self.t_minus,
            "t_plus": self.t_plus,
            "theta": self.theta,
            "q": self.q,
            "alpha": self.alpha,
        }


@dataclass
class ComponentIndex:
    id: int
    orbits: list
    n: int
    delta: int
    kappa: int
    odd: list = field(default_factory=list)
    even: list = field(default_factory=list)

    def to_dict(self):
        return {"id": self.id, "orbits": self.orbits, "n": self.n, "delta": self.delta, "kappa": self.kappa}


@dataclass
class IndexReport:
    q0: int
    jumps: list  # OrbitJump by orbit index
    components: list  # ComponentIndex in component order
    generic: bool
    unwrapped: UnwrappedArg = None

    def component(self, cid):
        for c in self.components:
            if c.id == cid:
                return c
        raise KeyError(cid)

    @property
    def kappa(self):
        return tuple(c.kappa for c in self.components)

    @property
    def r_homogeneous(self):
        return sum(2 * c.kappa - c.delta + 1 for c in self.components if 2 * c.kappa >= c.delta)

    def to_dict(self):
        return {
            "q0": self.q0,
            "generic": self.generic,
            "orbits": [j.to_dict() for j in self.jumps],
            "components": [c.to_dict() for c in self.components],
            "solution_count_homogeneous": self.r_homogeneous,
        }


def component_index(qs, q0=None) -> int:
    n = sum(1 for q in qs if q % 2)
    total = sum(qs) - n + (q0 if q0 is not None else 0)
    if total % 2:
        raise IndexError_("component index is not an integer")
    return total // 2


def delta(alphas) -> int:
    return sum(1 for a in alphas if a == 0.0)


def is_generic(jumps) -> bool:
    return all(j.alpha > 0.0 for j in jumps)


def compute_indices(dec: Decomposition, data: BoundaryData, n: int = 4096) -> IndexReport:
    ua = unwrap_arg(data, dec.domain.t0, n)
    jumps = []
    for o in dec.orbits:
        th = jump(ua, o.t_minus, o.t_plus)
        q, a = split_jump(th)
        jumps.append(OrbitJump(o.index, o.arc.id, o.t_minus, o.t_plus, th, q, a))
    comps = []
    for c in dec.components:
        idx = [w.orbit for w in c.orbit_refs]
        qs = [jumps[k].q for k in idx]
        kap = component_index(qs, ua.q0 if c is dec.components[0] else None)
        comps.append(
            ComponentIndex(
                c.id,
                [dec.orbits[k].arc.id for k in idx],
                n=sum(1 for q in qs if q % 2),
                delta=delta([jumps[k].alpha for k in idx]),
                kappa=kap,
                odd=[k for k in idx if jumps[k].q % 2],
                even=[k for k in idx if not jumps[k].q % 2],
            )
        )
    return IndexReport(ua.q0, jumps, comps, is_generic(jumps), ua)
