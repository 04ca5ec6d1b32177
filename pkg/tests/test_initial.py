import warnings

import numpy as np
import pytest

from qmcf import initial, qtensor
from qmcf.interface import ShrinkingSphere
from qmcf.potential import uniaxial_f
from qmcf.solver import UniformGrid


def quiet_params(eps, delta0=0.2):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return initial.ProfileParams(eps=eps, delta0=delta0)


def test_profile_values():
    assert abs(initial.optimal_profile(0.0) - 1.5) < 1e-15
    assert abs(initial.optimal_profile(50.0) - 3.0) < 1e-12
    assert abs(initial.optimal_profile(-50.0)) < 1e-12


def test_profile_satisfies_front_identity():
    # closed-form derivative of the profile against sqrt(3 f(S))
    sp, a = 3.0, 3.0
    for z in (-2.0, -1.0, 0.0, 1.0, 2.0):
        s_val = initial.optimal_profile(z)
        deriv = sp * np.sqrt(a) / 4 / np.cosh(np.sqrt(a) / 2 * z) ** 2
        target = np.sqrt(3 * uniaxial_f(s_val))
        assert abs(deriv - target) <= 1e-10 * target


def test_plateau_cutoff_zeta():
    assert initial.zeta(0.3) == 1.0
    assert initial.zeta(1.2) == 0.0
    assert abs(initial.zeta(0.75) - 0.5) < 1e-14
    assert initial.zeta(-0.75) == initial.zeta(0.75)
    z = np.linspace(0, 2, 201)
    assert np.all(np.diff(initial.zeta(z)) <= 1e-15)


def test_blended_orientation_cases():
    sphere = ShrinkingSphere(np.zeros(2), 0.4, 2, 0.2)
    params = quiet_params(0.01)
    deep = np.array([0.05, 0.05])  # d ~ 0.33 >= delta0
    assert initial.s_tilde(deep, sphere, params) == 3.0
    outside = np.array([0.9, 0.0])  # d <= -delta0
    assert initial.s_tilde(outside, sphere, params) == 0.0
    near = np.array([0.35, 0.0])  # |d| = 0.05 <= delta0/2
    expected = initial.optimal_profile(0.05 / 0.01)
    assert abs(initial.s_tilde(near, sphere, params) - expected) < 1e-14


def test_exponential_saturation():
    sphere = ShrinkingSphere(np.zeros(2), 0.4, 2, 0.2)
    params = quiet_params(0.02)
    for d in np.linspace(0.02, 0.3, 20):
        x = np.array([0.4 - d, 0.0])
        val = initial.s_tilde(x, sphere, params)
        assert abs(val - 3.0) <= 3.0 * 3 * np.exp(-np.sqrt(3) * d / 0.02) + 1e-12


def test_director_presets():
    const = initial.director_preset("constant")
    x = np.zeros((4, 2))
    u = const(x)
    assert np.allclose(np.linalg.norm(u, axis=-1), 1.0, atol=1e-12)
    plane = initial.director_preset("in-plane-angle", kappa=0.5)
    x = np.array([[0.2, 0.0], [-0.4, 0.3]])
    u = plane(x)
    assert np.allclose(np.linalg.norm(u, axis=-1), 1.0, atol=1e-12)
    assert np.allclose(u[0], [np.cos(0.1), np.sin(0.1), 0.0])
    with pytest.raises(ValueError):
        initial.director_preset("random")


def test_build_field_values(table):
    sphere = ShrinkingSphere(np.zeros(2), 0.4, 2, 0.2)
    grid = UniformGrid(2, 1.0, 100)
    params = quiet_params(0.02)
    q = initial.build(sphere, initial.ConstantDirector(), params, grid)
    x = grid.cell_centers()
    d = sphere.signed_distance(x, 0.0)
    deep = d >= 0.25
    expected = qtensor.project(qtensor.uniaxial(3.0, np.array([0.0, 0.0, 1.0])))
    assert np.max(np.abs(q[deep] - expected)) < 1e-12
    boundary = np.zeros(grid.shape, dtype=bool)
    boundary[0] = boundary[-1] = True
    boundary[:, 0] = boundary[:, -1] = True
    assert np.max(np.abs(q[boundary])) == 0.0
    norms = np.sqrt(np.einsum("...c,...c->...", q, q))
    assert np.max(norms) <= 3.0 * np.sqrt(2.0 / 3.0) + 1e-12
    # a cell close to the interface carries roughly the mid-profile norm
    i, j = np.unravel_index(np.argmin(np.abs(d)), d.shape)
    mid_norm = norms[i, j]
    slope = 3 * np.sqrt(3) / 4 * np.sqrt(2 / 3) / params.eps
    assert abs(mid_norm - 1.5 * np.sqrt(2 / 3)) <= slope * grid.h / 2 + 1e-9


def test_tube_must_clear_boundary():
    sphere = ShrinkingSphere(np.zeros(2), 0.9, 2, 0.2)
    grid = UniformGrid(2, 1.0, 64)
    with pytest.raises(ValueError):
        initial.build(sphere, initial.ConstantDirector(), quiet_params(0.05), grid)


def test_saturation_warning():
    with pytest.warns(UserWarning):
        initial.ProfileParams(eps=0.03, delta0=0.2)


def test_well_preparedness_report(table):
    sphere = ShrinkingSphere(np.zeros(2), 0.4, 2, 0.2)
    grid = UniformGrid(2, 1.0, 200)
    eps = 0.04
    q = initial.build(sphere, initial.InPlaneAngleDirector(0.5), quiet_params(eps), grid)
    report = initial.well_preparedness_report(q, sphere, eps, table, grid)
    assert report["E_mod0"] >= -1e-8
    assert report["ratio"] == report["E_mod0"] / eps
    assert 0.0 < report["ratio"] < 10.0


def test_modulated_energy_halves_with_eps(table):
    # fixed grid-to-eps ratio; directors with nonzero Dirichlet energy give
    # the linear-in-eps scaling the halving window presumes
    sphere = ShrinkingSphere(np.zeros(2), 0.4, 2, 0.2)
    director = initial.InPlaneAngleDirector(0.5)
    vals = {}
    for eps, n in ((0.06, 134), (0.03, 268)):
        grid = UniformGrid(2, 1.0, n)
        q = initial.build(sphere, director, quiet_params(eps), grid)
        rep = initial.well_preparedness_report(q, sphere, eps, table, grid)
        vals[eps] = rep["E_mod0"]
    ratio = vals[0.03] / vals[0.06]
    assert 0.3 <= ratio <= 0.9
