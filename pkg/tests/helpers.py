import time

import numpy as np

from degrh.assemble import Problem
from degrh.builtins import example31

SQRT3 = np.sqrt(3.0)


def lam_case1(t):
    return np.exp(1j * np.asarray(t, dtype=float))


def lam_case2(t):
    return np.exp(1j * np.pi * np.sin(np.asarray(t, dtype=float)))


def lam_one(t):
    return np.ones(np.shape(t), dtype=complex)


def const(c):
    return lambda t: np.full(np.shape(t), float(c))


def ex31_problem(lam, phi=None, f=None, **kw):
    e = example31()
    return Problem(e["field"], e["F"], e["domain"], e["orbits"], lam, phi, f, **kw)


def timed(fn, *args, **kw):
    t = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t


def random_noncrossing_chords(rng, n_orbits):
    """Boundary angles of n non-crossing chords of the unit circle, paired like balanced brackets."""
    # jittered bins keep end points apart and away from the base point at angle 0
    m = 2 * n_orbits
    width = (2 * np.pi - 0.4) / m
    ang = 0.2 + width * (np.arange(m) + rng.uniform(0.25, 0.75, m))
    # random Dyck word: open/close sequence
    seq = [1] * n_orbits + [-1] * n_orbits
    while True:
        rng.shuffle(seq)
        if np.all(np.cumsum(seq) >= 0):
            break
    stack, pairs = [], []
    for k, s in enumerate(seq):
        if s == 1:
            stack.append(k)
        else:
            pairs.append((ang[stack.pop()], ang[k]))
    return pairs


def _graded(depth=280, n=24):
    from numpy.polynomial.legendre import leggauss

    x, w = leggauss(n)
    edges = np.concatenate([[0.0], np.pi * 2.0 ** -np.arange(depth, 0, -1), [np.pi]])
    lo, hi = edges[:-1], edges[1:]
    return (0.5 * (hi - lo)[:, None] * (x + 1) + lo[:, None]).ravel(), (0.5 * (hi - lo)[:, None] * w).ravel()


def cauchy_near_one(g_plus, g_minus, alpha, omega):
    """(1/2 pi i) int g (zeta - 1)^-alpha / (zeta - 1 - omega) dzeta, each side parametrized from 1.

    g_plus(s) is g at e^{is}, g_minus(s) is g at e^{-is}; both for s in (0, pi).
    """
    s, ws = _graded()
    dp = 2j * np.sin(s / 2) * np.exp(0.5j * s)
    dm = -2j * np.sin(s / 2) * np.exp(-0.5j * s)
    pp = (2 * np.sin(s / 2)) ** -alpha * np.exp(-0.5j * alpha * s)
    pm = (2 * np.sin(s / 2)) ** -alpha * np.exp(-1j * alpha * (np.pi - 0.5 * s))
    out = [np.sum(ws * (g_plus(s) * pp * 1j * (1 + dp) / (dp - om) + g_minus(s) * pm * 1j * (1 + dm) / (dm - om)))
           for om in omega]
    return np.array(out) / (2j * np.pi)


def singular_fit(alpha, seed):
    """Measured coefficient of (z - 1)^-alpha, the predicted one and the remainder slopes, for random g."""
    from degrh.diskrh import rel_power, singular_coefficient

    rng = np.random.default_rng(seed)
    a = rng.normal(size=4) + 1j * rng.normal(size=4)
    g = lambda s: a[0] + a[1] * s + a[2] * s**2 / 4 + a[3] * np.cos(s)
    B = singular_coefficient(g(0.0), g(2 * np.pi), alpha)
    fits = []
    for d in (-np.exp(0.3j), -1 + 0j):
        r = np.geomspace(1e-6, 1e-2, 15)
        om = r * d
        phi = cauchy_near_one(g, lambda s: g(2 * np.pi - s), alpha, om)
        P = rel_power(1 + om, 0.0, alpha)
        M = np.stack([np.ones_like(r), r**alpha, r, r ** (1 + alpha)], 1).astype(complex)
        coef, *_ = np.linalg.lstsq(M, phi * P, rcond=None)
        rem = np.abs(phi - B / P)
        fits.append((complex(coef[0]), -np.polyfit(np.log(r), np.log(rem), 1)[0]))
    return B, fits


def moment_free_phi(ctx, cid):
    """phi = 1 + b cos 2t + c sin 2t with (b, c) chosen so the moments of component cid vanish."""
    from degrh.assemble import component_moments

    m0 = component_moments(ctx, cid, const(1.0))[0]
    mc = component_moments(ctx, cid, lambda t: np.cos(2 * t))[0]
    ms = component_moments(ctx, cid, lambda t: np.sin(2 * t))[0]
    A = np.array([[mc.real, ms.real], [mc.imag, ms.imag]])
    (b, c), *_ = np.linalg.lstsq(A, -np.array([m0.real, m0.imag]), rcond=None)
    return lambda t: 1 + b * np.cos(2 * np.asarray(t)) + c * np.sin(2 * np.asarray(t)), abs(m0)


def check_random_orbit_set(seed, n_points=200):
    """Structural invariants of a random chord arrangement in the unit disk."""
    from degrh.geometry import DomainSpec, GeometryError, OrbitArc, component_of, decompose, winding_numbers

    rng = np.random.default_rng(seed)
    N = int(rng.integers(1, 5))
    pairs = random_noncrossing_chords(rng, N)
    dom = DomainSpec.circle((0, 0), 1.0)
    orbits = [OrbitArc.segment(k + 1, (np.cos(a), np.sin(a)), (np.cos(b), np.sin(b))) for k, (a, b) in enumerate(pairs)]
    dec = decompose(dom, orbits)
    # N + 1 faces, tree adjacency, proper 2-colouring, Euler count
    assert len(dec.components) == N + 1
    adj = dec.adjacency()
    assert sum(len(v) for v in adj.values()) == 2 * N
    for o in dec.orbits:
        a, b = o.components
        assert dec.orientation(a) != dec.orientation(b)
        assert sum(any(r.orbit == o.index for r in c.orbit_refs) for c in dec.components) == 2
    assert dec.orientation(1) == "preserved"
    assert dec.euler_characteristic() == 2
    # boundary arcs partition the circle
    total = sum(a.u1 - a.u0 for c in dec.components for a in c.arcs)
    assert abs(total - 2 * np.pi) < 1e-12
    # point location against winding numbers of the face polygons
    r = np.sqrt(rng.uniform(0, 0.98, n_points))
    th = rng.uniform(0, 2 * np.pi, n_points)
    pts = np.stack([r * np.cos(th), r * np.sin(th)], -1)
    hits = 0
    for p in pts:
        try:
            cid = component_of(dec, p)
        except GeometryError:
            continue
        wn = {c.id: winding_numbers(p[None], c.polygon)[0] for c in dec.components}
        assert wn[cid] == 1 and sum(abs(v) for v in wn.values()) == 1
        hits += 1
    assert hits > 0.95 * n_points
