import numpy as np
import pytest

from degrh.builtins import example31_domain, example31_orbits
from degrh.geometry import (
    DomainSpec,
    GeometryError,
    OrbitArc,
    OrbitRef,
    assign_orientations,
    component_of,
    decompose,
    relabel_base,
)

from helpers import SQRT3, check_random_orbit_set


@pytest.fixture(scope="module")
def dec31():
    return decompose(example31_domain(), example31_orbits())


def test_example_components(dec31):
    assert len(dec31.components) == 3
    assert component_of(dec31, (1.5, 0.0)) == 1
    assert component_of(dec31, (0.0, 0.0)) == 2
    assert component_of(dec31, (-1.5, 0.0)) == 3
    flags = [dec31.orientation(c) for c in (1, 2, 3)]
    assert flags == ["preserved", "reversed", "preserved"]
    with pytest.raises(GeometryError):
        component_of(dec31, (1.0, 0.0))
    with pytest.raises(GeometryError):
        component_of(dec31, (3.0, 0.0))


def test_boundary_words_alternate(dec31):
    for c in dec31.components:
        kinds = [isinstance(w, OrbitRef) for w in c.word]
        assert kinds == [False, True] * (len(kinds) // 2)
    assert [c.m for c in dec31.components] == [1, 2, 1]


def test_orbit_end_order(dec31):
    # p^- and p^+ seen from the preserved side, as boundary parameters
    o1, o2 = dec31.orbits
    assert abs(o1.t_minus - np.pi / 3) < 1e-9 and abs(o1.t_plus - 5 * np.pi / 3) < 1e-9
    assert abs(o2.t_minus - 4 * np.pi / 3) < 1e-9 and abs(o2.t_plus - 2 * np.pi / 3) < 1e-9


def test_no_orbits_and_one_orbit():
    dom = DomainSpec.circle((0, 0), 2.0)
    d0 = decompose(dom, [])
    assert len(d0.components) == 1 and d0.components[0].m == 0
    d1 = decompose(dom, example31_orbits()[:1])
    assert len(d1.components) == 2
    assert all(c.m == 1 for c in d1.components)


def test_decompose_errors():
    dom = DomainSpec.circle((0, 0), 2.0)
    crossing = [
        OrbitArc.segment(1, (2 * np.cos(0.5), 2 * np.sin(0.5)), (2 * np.cos(3.5), 2 * np.sin(3.5))),
        OrbitArc.segment(2, (2 * np.cos(2.0), 2 * np.sin(2.0)), (2 * np.cos(5.0), 2 * np.sin(5.0))),
    ]
    with pytest.raises(GeometryError):
        decompose(dom, crossing)
    with pytest.raises(GeometryError):
        decompose(dom, [OrbitArc.segment(1, (1.0, -1.0), (1.0, 1.0))])  # ends inside
    with pytest.raises(GeometryError):
        decompose(dom, [OrbitArc.segment(1, (2.0, 0.0), (-2.0, 0.0))])  # starts at s0


def test_assign_orientations_path():
    # four components along vertical chords
    dom = DomainSpec.circle((0, 0), 2.0)
    xs = (-1.0, 0.0, 1.0)
    orbits = [OrbitArc.segment(k + 1, (x, -np.sqrt(4 - x * x)), (x, np.sqrt(4 - x * x))) for k, x in enumerate(xs)]
    dec = decompose(dom, orbits)
    flags = {c.id: c.orientation for c in dec.components}
    order = [component_of(dec, (x, 0.1)) for x in (1.5, 0.5, -0.5, -1.5)]
    assert [flags[c] for c in order] == ["preserved", "reversed", "preserved", "reversed"]
    assign_orientations(dec, (order[1], "preserved"))
    assert dec.orientation(order[1]) == "preserved" and dec.orientation(order[0]) == "reversed"


def test_relabel_base(dec31):
    d = relabel_base(dec31, np.pi)
    assert component_of(d, (-1.5, 0.0)) == 1
    assert d.orientation(1) == "preserved"
    with pytest.raises(GeometryError):
        relabel_base(dec31, np.pi / 2)


def test_parametric_domain_and_samples():
    ell = DomainSpec.parametric(lambda t: 1.5 * np.cos(t), lambda t: np.sin(t))
    assert abs(ell.signed_area() - 1.5 * np.pi) < 1e-3
    t = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    spl = DomainSpec.from_samples(np.stack([np.cos(t), np.sin(t)], -1))
    assert abs(spl.distance_to_boundary((0.0, 0.0)) - 1.0) < 1e-4
    with pytest.raises(GeometryError):
        DomainSpec.parametric(lambda t: np.cos(t), lambda t: -np.sin(t))  # clockwise


@pytest.mark.parametrize("seed", range(10))
def test_random_orbit_sets(seed):
    check_random_orbit_set(seed)
