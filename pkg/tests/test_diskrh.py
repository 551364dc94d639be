import numpy as np
import pytest

from degrh.diskrh import (
    DiskError,
    DiskPoint,
    DiskProblem,
    DiskSolver,
    build_beta,
    build_lambda_tilde,
    continuity_conditions,
    gamma_boundary,
    homogeneous_family,
    laurent_coefficients,
    orbit_value_closed_form,
    pole_order_from_laurent,
    rho,
    rho_hat,
    schwarz,
    singular_coefficient,
    vanish_constraints,
    winding_number,
)
from degrh.quad import CirclePanels, schwarz_direct

from helpers import singular_fit

TWO_PI = 2 * np.pi


def grid(M):
    return TWO_PI * np.arange(M) / M


# -- Schwarz operator ---------------------------------------------------------


def test_schwarz_examples():
    t = grid(256)
    assert abs(schwarz(np.ones(256))(0.3 + 0.2j) - 1) < 1e-14
    z = 0.3 + 0.4j
    assert abs(schwarz(np.cos(t))(z) - z) < 1e-14
    f = np.cos(3 * t) - 2 * np.sin(t)
    zs = 0.7 * np.exp(1j * np.linspace(0, 6, 10))
    assert np.max(np.abs(schwarz(f)(zs) - schwarz_direct(f, zs))) < 1e-8


def test_schwarz_properties():
    rng = np.random.default_rng(11)
    M = 256
    t = grid(M)
    zeta = np.exp(1j * t)
    for _ in range(20):
        a, b = rng.normal(size=(2, 40))
        n = np.arange(1, 41)
        f = rng.normal() + (a[None] * np.cos(n[None] * t[:, None]) + b[None] * np.sin(n[None] * t[:, None])).sum(1)
        S = schwarz(f)
        assert np.max(np.abs(S(zeta).real - f)) < 1e-10
        assert abs(S(0.0).imag) < 1e-12


def test_schwarz_requires_real_data():
    with pytest.raises(ValueError):
        schwarz(np.exp(1j * grid(16)))


def test_panel_schwarz_and_hilbert():
    pn = CirclePanels([0.5, 2.0], n_nodes=1024)
    psi = pn.nodes()
    f = np.cos(3 * psi)
    assert np.max(np.abs(pn.hilbert(f) - np.sin(3 * psi))) < 1e-9
    z = np.array([0.2, 0.5j, -0.6 + 0.3j])
    assert np.max(np.abs(pn.schwarz(f, z) - z**3)) < 1e-9


# -- symbols ------------------------------------------------------------------


def test_winding_number():
    t = grid(512)
    for k in (-3, 0, 2):
        assert winding_number(np.exp(1j * (k * t + 0.4 * np.sin(t)))) == k
    with pytest.raises(DiskError):
        winding_number(np.exp(1j * 20 * grid(64)))


def test_build_beta():
    a = build_beta([1.0, 3.0])
    assert a.c0 is None
    assert a.beta(np.array([0.5, 2.0, 4.0])).tolist() == [-1.0, 1.0, -1.0]
    b = build_beta([1.0], all_points=[1.0, 2.0])
    assert b.c0 is not None and len(b.points) == 2
    # beta flips sign across each point of the augmented set
    for c in b.points:
        lo, hi = b.beta_sides(c)
        assert lo == -hi
    assert np.all(build_beta([]).beta(grid(8)) == 1)
    with pytest.raises(DiskError):
        build_beta([1.0, 1.0])


def jump_symbol(c, alpha, q, extra=lambda t: 0 * t):
    """Unimodular symbol with lam(c-) = e^{i pi (alpha + q)} lam(c+)."""
    th = np.pi * (alpha + q)
    return lambda t: np.exp(1j * (th * np.mod(np.asarray(t, dtype=float) - c, TWO_PI) / TWO_PI + extra(t)))


def point(c, alpha, q, lam, psi=None):
    e = 1e-13
    lm, lp = complex(lam(np.array([c - e]))[0]), complex(lam(np.array([c + e]))[0])
    pm = pp = 0.0
    if psi is not None:
        pm, pp = float(psi(np.array([c - e]))[0]), float(psi(np.array([c + e]))[0])
    return DiskPoint(c, alpha, q, lm, lp, pm, pp)


@pytest.mark.parametrize("q", [0, 1, -1, 2])
def test_lambda_tilde_parity(q):
    c, alpha = np.pi, 0.3
    lam = jump_symbol(c, alpha, q)
    prob = DiskProblem([point(c, alpha, q, lam)], lam)
    e = 1e-9
    lt = build_lambda_tilde(prob, np.array([c - e, c + e]))
    assert abs(lt[0] / lt[1] - (-1) ** q) < 1e-8


def test_gamma_boundary():
    M = 512
    t = grid(M)
    g, G = gamma_boundary(np.exp(2j * t), 2)
    assert np.max(np.abs(g)) < 1e-12
    g, G = gamma_boundary(np.exp(1j * (np.cos(t) + t)), 1)
    assert abs(G(0.3 + 0.1j) - (0.3 + 0.1j)) < 1e-12
    with pytest.raises(DiskError):
        gamma_boundary(np.exp(1j * t), 0)


def test_homogeneous_counts():
    assert [homogeneous_family(k) for k in (-2, -1, 0, 3)] == [0, 0, 1, 7]
    assert vanish_constraints(0, [1.0])[1].shape[1] == 0
    assert vanish_constraints(1, [1.0])[1].shape[1] == 2
    for k in range(4):
        assert vanish_constraints(k, [])[1].shape[1] == 2 * k + 1
    rng = np.random.default_rng(2)
    for _ in range(50):
        k = int(rng.integers(0, 4))
        d = int(rng.integers(0, 6))
        A, ker = vanish_constraints(k, np.sort(rng.uniform(0, TWO_PI, d)))
        assert ker.shape[1] == max(2 * k + 1 - d, 0)
        if A.size and ker.size:
            assert np.max(np.abs(A @ ker)) < 1e-10


def test_rho_pieces():
    assert np.allclose(rho([2.0, -1.0], [1.0, -1.0], [4.0, 0.5]), [0.5, 2.0])
    assert np.allclose(rho_hat([1.0, 2.0], [0.0, np.log(3)]), [1.0, 6.0])


# -- singular behaviour near a jump ------------------------------------------


def test_singular_coefficient_examples():
    assert abs(singular_coefficient(1.0, 1.0, 0.5) - 1) < 1e-15
    # equal one-sided data: the coefficient is 1 for every alpha
    assert abs(singular_coefficient(2.0, 2.0, 0.3) - 2) < 1e-14
    with pytest.raises(DiskError):
        singular_coefficient(1.0, 1.0, 0.0)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_cauchy_integral_singular_part(alpha):
    B, fits = singular_fit(alpha, int(alpha * 100))
    for coef, slope in fits:
        assert abs(coef - B) < 1e-5 * max(1, abs(B))
        # what is left behaves like O(1), so its log-log slope is near 0
        assert abs(slope) < 0.05


# -- continuity conditions and poles -------------------------------------------


def test_continuity_conditions():
    t = grid(256)
    assert np.max(np.abs(continuity_conditions(np.cos(2 * t), -1))) < 1e-12
    assert np.max(np.abs(continuity_conditions(np.cos(t), -1))) < 1e-12
    assert abs(abs(continuity_conditions(np.ones(256), -1)[0]) - TWO_PI) < 1e-12
    c = continuity_conditions(np.cos(t), -2)
    assert abs(c[0]) < 1e-12 and abs(abs(c[1]) - np.pi) < 1e-12
    assert continuity_conditions(np.ones(8), 0).size == 0


def test_pole_order_from_laurent():
    m, a = laurent_coefficients(lambda z: 1 / z**2 + 3 + z, 0.1)
    assert pole_order_from_laurent(m, a, 0.1, 3) == 2
    m, a = laurent_coefficients(lambda z: np.exp(z), 0.1)
    assert pole_order_from_laurent(m, a, 0.1, 3) == 0


def test_orbit_value_closed_form_example():
    v = orbit_value_closed_form(1.0, 1j, 1.0, 1.0, 0.5)
    assert abs(v - (-1 - 1j)) < 1e-15
    with pytest.raises(DiskError):
        orbit_value_closed_form(1.0, 1.0, 1.0, 1.0, 1.0)


# -- the solver ---------------------------------------------------------------


def test_solver_classical_cases():
    s = DiskSolver(DiskProblem([], lambda t: np.ones_like(t), lambda t: np.cos(2 * t)), n_nodes=512)
    z = np.array([0.3 + 0.2j, -0.5j])
    assert s.kappa == 0 and np.max(np.abs(s.w(z) - z**2)) < 1e-10
    s = DiskSolver(DiskProblem([], lambda t: np.exp(1j * t), lambda t: 1 + np.sin(t)), n_nodes=512)
    assert s.kappa == 1 and s.n_free == 3
    for d in (None, [0.3, -1.0, 2.0]):
        assert np.max(np.abs(s.boundary_residual(d))) < 1e-10
    # zero data and no free part give the zero solution
    s = DiskSolver(DiskProblem([], lambda t: np.exp(1j * t), lambda t: 0 * t), n_nodes=512)
    assert np.max(np.abs(s.w(z))) == 0


def test_solver_negative_index():
    lam = lambda t: np.exp(-1j * t)
    s = DiskSolver(DiskProblem([], lam, lambda t: np.cos(2 * t)), n_nodes=512)
    assert s.kappa == -1
    assert np.max(np.abs(s.moments())) < 1e-10
    assert s.pole_order() == 0
    z = np.array([0.3 + 0.2j, -0.5j])
    assert np.max(np.abs(s.w(z) - z)) < 1e-10
    s = DiskSolver(DiskProblem([], lam, lambda t: np.ones_like(t)), n_nodes=512)
    assert abs(s.moments()[0] - TWO_PI * 1j) < 1e-10
    assert s.pole_order() == 1


@pytest.mark.parametrize("alpha,q", [(0.5, 0), (0.3, 1), (0.7, -1)])
def test_solver_with_jump(alpha, q):
    c = 2.0
    lam = jump_symbol(c, alpha, q, extra=lambda t: 0.2 * np.sin(t))
    psi = lambda t: 1 + 0.3 * np.cos(t)
    prob = DiskProblem([point(c, alpha, q, lam, psi)], lam, psi)
    s = DiskSolver(prob, n_nodes=2048)
    away = np.abs(np.angle(np.exp(1j * (s.psi - c)))) > 1e-3
    assert np.max(np.abs(s.boundary_residual()[away])) < 1e-7
    # the value at the jump satisfies both one-sided boundary conditions
    v = s.orbit_limit(0)
    p = s.points[0]
    assert abs((np.conj(p.lam_minus) * v).real - p.psi_minus) < 1e-6
    assert abs((np.conj(p.lam_plus) * v).real - p.psi_plus) < 1e-6
    assert abs(s.radial_limit(0) - v) < 1e-4
    cf, sign = s.closed_form(0)
    assert sign == (-1) ** (q % 2)


def test_solver_rejects_bad_jump():
    lam = jump_symbol(1.0, 0.5, 0)
    bad = DiskPoint(1.0, 0.25, 0, 1.0, 1.0)
    with pytest.raises(DiskError):
        DiskSolver(DiskProblem([bad], lam, lambda t: 0 * t), n_nodes=256)
    with pytest.raises(DiskError):
        DiskSolver(DiskProblem([], lambda t: np.exp(1j * t), lambda t: 0 * t, kappa=0), n_nodes=256)
