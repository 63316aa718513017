"""Lattice constants and the equilibrium distribution."""

from fractions import Fraction

import numpy as np
import pytest

from lbsteer.lattice import CS2, D2Q9, D3Q19, equilibrium, equilibrium_cell, viscosity

MODELS = [D2Q9, D3Q19]


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_moment_conditions(model):
    w = model.weights
    c = model.velocities
    assert abs(w.sum() - 1.0) < 1e-12
    first = c.T @ w
    assert np.all(np.abs(first) < 1e-12)
    second = np.einsum("i,ia,ib->ab", w, c, c)
    expected = CS2 * np.eye(3)
    expected[model.dim:, model.dim:] = 0.0  # padded z column carries no weight
    assert np.all(np.abs(second - expected) < 1e-12)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_opposite_directions(model):
    for i in range(model.q):
        assert np.array_equal(model.velocities_int[model.opposite[i]],
                              -model.velocities_int[i])
    assert sorted(model.opposite) == list(range(model.q))


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_rest_equilibrium_is_weights(model):
    feq = equilibrium_cell(1.0, (0.0,) * model.dim, model)
    assert np.allclose(feq, model.weights, rtol=0, atol=1e-15)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_equilibrium_linear_in_rho(model):
    feq = equilibrium_cell(2.0, (0.0,) * model.dim, model)
    assert np.allclose(feq, 2.0 * model.weights, rtol=0, atol=1e-15)


def test_equilibrium_d2q9_values_exact_rationals():
    # independent oracle: the closed form evaluated with exact Fractions
    rho = Fraction(1)
    ux, uy = Fraction(1, 20), Fraction(0)  # u = (0.05, 0)
    w = [Fraction(4, 9)] + [Fraction(1, 9)] * 4 + [Fraction(1, 36)] * 4
    usq = ux * ux + uy * uy
    expected = []
    for i in range(9):
        cx = Fraction(int(D2Q9.velocities_int[i, 0]))
        cy = Fraction(int(D2Q9.velocities_int[i, 1]))
        cu = cx * ux + cy * uy
        expected.append(w[i] * rho * (1 + 3 * cu + Fraction(9, 2) * cu * cu
                                      - Fraction(3, 2) * usq))
    feq = equilibrium_cell(1.0, (0.05, 0.0), D2Q9)
    for i in range(9):
        assert abs(feq[i] - float(expected[i])) < 1e-15


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
@pytest.mark.parametrize("rho,u", [(1.0, (0.05, 0.0, 0.0)), (1.3, (0.02, -0.08, 0.01)),
                                   (0.7, (0.0, 0.0, 0.0))])
def test_equilibrium_moment_postconditions(model, rho, u):
    u = np.asarray(u[: 3]).copy()
    u[model.dim:] = 0.0  # out-of-plane velocity is identically zero in 2D
    feq = equilibrium(np.array([rho]), u[:, None], model)[:, 0]
    assert abs(feq.sum() - rho) < 1e-12
    mom = model.velocities.T @ feq
    assert np.all(np.abs(mom - rho * u) < 1e-12)


def test_viscosity_relation():
    assert viscosity(0.5) == 0.0
    assert abs(viscosity(0.8) - 0.1) < 1e-15
    assert abs(viscosity(1.0) - 1.0 / 6.0) < 1e-15
