import numpy as np
import pytest

from degrh.builtins import example31, example31_field
from degrh.conformal import ConformalError, Segment, align, build_atlas, riemann_map, rotation_factor
from degrh.field import first_integral_residual
from degrh.geometry import DomainSpec, decompose


@pytest.fixture(scope="module")
def atlas31():
    e = example31()
    dec = decompose(e["domain"], e["orbits"])
    return build_atlas(dec, e["F"])


def probes(atlas, cid, n, margin):
    pts = atlas.dec.sample_interior(cid, n=24, margin=margin)
    rng = np.random.default_rng(cid)
    return pts[rng.choice(len(pts), size=min(n, len(pts)), replace=False)]


def test_disk_is_a_rotation():
    m = riemann_map(lambda t: np.exp(1j * t), 0.0)
    z = np.array([0.5, 0.3j, -0.2 + 0.4j])
    assert np.max(np.abs(np.abs(m.forward(z)) - np.abs(z))) < 1e-6
    assert abs(m.forward(0.0)) < 1e-12


def half_disk_closed_form(z, p):
    s = ((1 + z) / (1 - z)) ** 2
    sp = ((1 + p) / (1 - p)) ** 2
    w = (s - sp) / (s - np.conj(sp))
    h = 1e-7
    d = ((((1 + p + h) / (1 - p - h)) ** 2 - sp) / (((1 + p + h) / (1 - p - h)) ** 2 - np.conj(sp))) / h
    return w * np.exp(-1j * np.angle(d))


def test_half_disk_against_closed_form():
    segs = [Segment(lambda t: np.exp(1j * t), 0.0, np.pi), Segment(lambda t: t + 0j, -1.0, 1.0)]
    m = riemann_map(segs, 0.5j)
    rng = np.random.default_rng(0)
    r = rng.uniform(0.1, 0.9, 16)
    th = rng.uniform(0.1, np.pi - 0.1, 16)
    z = r * np.exp(1j * th)
    assert np.max(np.abs(m.forward(z) - half_disk_closed_form(z, 0.5j))) < 1e-5


def test_ellipse_round_trip_and_boundary():
    m = riemann_map(lambda t: np.cos(t) + 0.6j * np.sin(t), 0.0)
    assert np.max(np.abs(np.abs(m.boundary_value(0, np.linspace(0, 2 * np.pi, 50))) - 1)) < 1e-6
    rng = np.random.default_rng(1)
    r = np.sqrt(rng.uniform(0, 0.8, 30))
    th = rng.uniform(0, 2 * np.pi, 30)
    z = r * (np.cos(th) + 0.6j * np.sin(th)) * 0.9
    assert np.max(np.abs(m.inverse(m.forward(z)) - z)) < 1e-6


def test_reversed_orientation_conjugates():
    # a clockwise walk, as an orientation-reversing first integral produces
    m = riemann_map(lambda t: np.cos(t) - 0.6j * np.sin(t), 0.0, orientation="reversed")
    t = np.linspace(0.1, 6.0, 40)
    ang = np.unwrap(m.boundary_angle(0, t))
    assert np.all(np.diff(ang) < 0)


def test_atlas_boundary_modulus(atlas31):
    for cid, ch in atlas31.charts.items():
        for arc in ch.arcs:
            t = np.linspace(arc.t_start, arc.t_end, 60)[1:-1]
            assert np.max(np.abs(np.abs(atlas31.Z_boundary(cid, t)) - 1)) < 1e-6


def test_atlas_correspondence_monotone(atlas31):
    for cid, ch in atlas31.charts.items():
        arc = max(ch.arcs, key=lambda a: abs(a.t_end - a.t_start))
        t = np.linspace(min(arc.t_start, arc.t_end), max(arc.t_start, arc.t_end), 80)[1:-1]
        ang = np.unwrap(ch.cmap.boundary_angle(arc.seg, t))
        if ch.orientation == "preserved":
            assert np.all(np.diff(ang) > 0)
        else:
            assert np.all(np.diff(ang) < 0)


def test_atlas_round_trip(atlas31):
    for cid in atlas31.charts:
        p = probes(atlas31, cid, 30, 0.05)
        z = atlas31.Z(cid, p[:, 0], p[:, 1])
        back = atlas31.inverse(cid, z)
        assert np.max(np.hypot(*(back - p).T)) < 1e-6


def test_orbit_images(atlas31):
    F = atlas31.F
    for o in atlas31.dec.orbits:
        vals = F(o.arc.polyline[:, 0], o.arc.polyline[:, 1])
        assert np.std(vals) < 1e-6
        a, b = o.components
        ca, cb = atlas31.orbit_image(a, o.index), atlas31.orbit_image(b, o.index)
        assert abs(abs(ca) - 1) < 1e-6
        assert abs(ca - cb) < 1e-6
    assert abs(F(1.0, 0.3) - 1) < 1e-15 and abs(F(-1.0, -0.4) + 1) < 1e-15


def test_first_integral_residual_of_charts(atlas31):
    L = example31_field()
    for cid in atlas31.charts:
        p = probes(atlas31, cid, 100, 0.05)
        Z = lambda x, y, c=cid: atlas31.Z(c, x, y)
        r = first_integral_residual(L, Z, p[:, 0], p[:, 1])
        assert np.max(np.abs(r)) < 1e-6


def test_pushforward(atlas31):
    psi = np.linspace(0, 2 * np.pi, 200, endpoint=False) + 1e-3
    vals, arc, t = atlas31.boundary_pushforward(1, lambda t: np.ones_like(t), psi)
    ok = arc >= 0
    assert np.all(vals[ok] == 1)
    with pytest.raises(ConformalError):
        atlas31.boundary_pushforward(1, lambda t: t, [atlas31.corner_angle(1, 0)])


def test_alignment():
    assert rotation_factor(1, 1j) == -1j
    assert rotation_factor(1j, 1j) == 1
    with pytest.raises(ConformalError):
        rotation_factor(1, 0.5)
    e = example31()
    dec = decompose(e["domain"], e["orbits"])
    raw = build_atlas(dec, e["F"], align_tree=False)
    align(raw)
    for o in dec.orbits:
        a, b = o.components
        assert abs(raw.orbit_image(a, o.index) - raw.orbit_image(b, o.index)) < 1e-6
    assert raw.charts[1].rotation == 1


def test_single_component_is_rotation():
    dec = decompose(DomainSpec.circle((0, 0), 1.0), [])
    at = build_atlas(dec, lambda x, y: x + 1j * y, normalization={1: (0.0, 0.0)})
    z = np.array([0.3 + 0.1j, -0.5j])
    assert np.max(np.abs(np.abs(at.Z(1, z.real, z.imag)) - np.abs(z))) < 1e-6
