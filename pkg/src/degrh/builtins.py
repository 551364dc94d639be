"""Pinned test problems that do not go through the expression parser."""

from __future__ import annotations

import numpy as np

from .field import VectorField
from .geometry import DomainSpec, OrbitArc

SQRT3 = np.sqrt(3.0)


def example31_field():
    """L = -i(x^2-1) d/dx + (1+2ixy) d/dy; theta = 1 - x^2."""
    return VectorField(
        lambda x, y: -1j * (x**2 - 1.0),
        lambda x, y: 1.0 + 2j * x * y,
        name="example31",
    )


def example31_first_integral(x, y):
    return x + 1j * y * (x**2 - 1.0)


def example31_domain(t0=0.0):
    return DomainSpec.circle((0.0, 0.0), 2.0, t0=t0)


def example31_orbits():
    """The lines x = 1 and x = -1 inside D(0,2), each run from bottom to top."""
    return [
        OrbitArc.segment(1, (1.0, -SQRT3), (1.0, SQRT3)),
        OrbitArc.segment(2, (-1.0, -SQRT3), (-1.0, SQRT3)),
    ]


def example31():
    return {
        "field": example31_field(),
        "F": example31_first_integral,
        "domain": example31_domain(),
        "orbits": example31_orbits(),
    }


def mizohata_field():
    """A = 1, B = ix; theta = -x changes sign across x = 0."""
    return VectorField(lambda x, y: np.ones_like(x), lambda x, y: 1j * x, name="mizohata")


BUILTIN_FIELDS = {"example31": example31_field, "mizohata": mizohata_field}
