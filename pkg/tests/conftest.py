"""Expensive example solves shared across test modules (built once per session, timed)."""

import numpy as np
import pytest

from degrh.assemble import prepare, solve_full, solve_homogeneous, solve_rh
from degrh.builtins import example31_field, example31_first_integral

from helpers import const, ex31_problem, lam_case1, lam_case2, lam_one, timed


class Run:
    def __init__(self, ctx, result, seconds):
        self.ctx = ctx
        self.result = result
        self.seconds = seconds


def _run(problem, solve):
    def go():
        ctx = prepare(problem)
        return ctx, solve(ctx)

    (ctx, res), sec = timed(go)
    return Run(ctx, res, sec)


@pytest.fixture(scope="session")
def homogeneous_case1():
    return _run(ex31_problem(lam_case1), solve_homogeneous)


@pytest.fixture(scope="session")
def homogeneous_case2():
    return _run(ex31_problem(lam_case2), solve_homogeneous)


@pytest.fixture(scope="session")
def rh_case1():
    return _run(ex31_problem(lam_case1, const(1.0)), solve_rh)


@pytest.fixture(scope="session")
def rh_case1_fine():
    return _run(ex31_problem(lam_case1, const(1.0), n_nodes=8192), solve_rh)


# configured pole location for the middle component
P_STAR_2 = (0.1, 0.4)


@pytest.fixture(scope="session")
def rh_case1_configured():
    return _run(ex31_problem(lam_case1, const(1.0), normalization={2: P_STAR_2}), solve_rh)


def _w0(x, y):
    return np.exp(example31_first_integral(x, y)) / 3 + np.sin(x) + 1j * x**2


def manufactured_f(x, y, h=1e-5):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    ux = (_w0(x + h, y) - _w0(x - h, y)) / (2 * h)
    uy = (_w0(x, y + h) - _w0(x, y - h)) / (2 * h)
    a, b = example31_field().coefficients(x, y)
    return a * ux + b * uy


def manufactured_phi(t):
    t = np.asarray(t, float)
    return np.real(_w0(2 * np.cos(t), 2 * np.sin(t)))


@pytest.fixture(scope="session")
def manufactured():
    run = _run(ex31_problem(lam_one, manufactured_phi, manufactured_f), solve_full)
    run.w0 = _w0
    return run


def hand_f(x, y):
    return -1j * (np.asarray(x, float) ** 2 - 1.0)


@pytest.fixture(scope="session")
def full_hand():
    return _run(ex31_problem(lam_case1, const(1.0), hand_f), solve_full)
