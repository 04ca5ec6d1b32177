import numpy as np
import pytest

from qmcf import qtensor as qt
from qmcf.potential import (DEFAULT_COEFFS, PotentialCoefficients, bulk_energy,
                            bulk_gradient, hessian_bound, regularized_energy,
                            sqrt_f, uniaxial_f)

from conftest import random_rotation, random_traceless

E3 = np.array([0.0, 0.0, 1.0])


def test_default_coefficients_and_roots():
    pot = DEFAULT_COEFFS
    assert (pot.a, pot.b, pot.c) == (3.0, 9.0, 1.0)
    assert pot.s_plus == 3.0
    assert pot.s_minus == 0.0


def test_critical_root_identity(rng):
    for _ in range(10):
        a = float(rng.uniform(0.5, 5.0))
        c = float(rng.uniform(0.2, 3.0))
        b = float(np.sqrt(27 * a * c))
        pot = PotentialCoefficients(a, b, c, critical=True)
        assert abs(pot.s_plus - np.sqrt(3 * a / c)) < 1e-12 * pot.s_plus


def test_critical_flag_rejects_mismatch():
    with pytest.raises(ValueError):
        PotentialCoefficients(3.0, 10.0, 1.0, critical=True)
    # the same constants are fine when not declared critical
    PotentialCoefficients(3.0, 10.0, 1.0, critical=False)


def test_bulk_energy_examples():
    assert bulk_energy(np.zeros(5)) == 0.0
    q_n = qt.project(qt.uniaxial(3.0, E3))
    assert abs(bulk_energy(q_n)) < 1e-12
    q_half = qt.project(qt.uniaxial(1.5, E3))
    assert abs(bulk_energy(q_half) - 0.5625) < 1e-12


def test_bulk_gradient_examples(rng):
    assert np.max(np.abs(bulk_gradient(np.zeros(5)))) == 0.0
    for _ in range(20):
        u = rng.standard_normal(3)
        u /= np.linalg.norm(u)
        g = bulk_gradient(qt.project(qt.uniaxial(3.0, u)))
        assert np.max(np.abs(g)) < 1e-12


def test_bulk_gradient_finite_difference_oracle(rng):
    step = 1e-6
    eye = np.eye(5)
    for v in random_traceless(rng, 100, 2.5):
        g = bulk_gradient(v)
        fd = np.array([
            (bulk_energy(v + step * eye[j]) - bulk_energy(v - step * eye[j])) / (2 * step)
            for j in range(5)
        ])
        denom = max(np.linalg.norm(fd), 1e-10)
        assert np.linalg.norm(g - fd) / denom < 1e-6


def test_bulk_gradient_traceless_symmetric(rng):
    for v in random_traceless(rng, 50, 3.0):
        m = qt.embed(bulk_gradient(v))
        assert abs(np.trace(m)) < 1e-12
        assert np.max(np.abs(m - m.T)) < 1e-12


def test_regularized_energy():
    q_n = qt.project(qt.uniaxial(3.0, E3))
    assert abs(regularized_energy(q_n, 0.1) - 1e-3) < 1e-13
    assert abs(regularized_energy(np.zeros(5), 0.2) - 8e-3) < 1e-16
    with pytest.raises(ValueError):
        regularized_energy(np.zeros(5), 0.0)


def test_regularized_energy_lower_bound(rng):
    v = random_traceless(rng, 200, 3.0)
    assert np.min(regularized_energy(v, 0.05)) >= 0.05**3 - 1e-15


def test_uniaxial_f_values():
    assert uniaxial_f(0.0) == 0.0
    assert abs(uniaxial_f(3.0)) < 1e-13
    assert abs(uniaxial_f(1.5) - 0.5625) < 1e-14
    assert abs(sqrt_f(1.5) - 0.75) < 1e-14
    with pytest.raises(ValueError):
        sqrt_f(3.5)
    with pytest.raises(ValueError):
        sqrt_f(-0.1)


def test_uniaxial_f_matches_bulk_energy(rng):
    u = rng.standard_normal(3)
    u /= np.linalg.norm(u)
    for s in np.linspace(0.0, 3.0, 50):
        q = qt.project(qt.uniaxial(s, u))
        assert abs(uniaxial_f(s) - bulk_energy(q)) < 1e-12


def test_sqrt_f_squares_to_f():
    s = np.linspace(0.0, 3.0, 101)
    assert np.max(np.abs(sqrt_f(s) ** 2 - uniaxial_f(s))) < 1e-13
    assert np.min(sqrt_f(s)) >= 0.0


def test_frame_equivariance(rng):
    for _ in range(20):
        v = random_traceless(rng, 1, 3.0)[0]
        m = qt.embed(v)
        rot = random_rotation(rng)
        rotated = rot @ m @ rot.T
        assert abs(bulk_energy(qt.project(rotated)) - bulk_energy(v)) < 1e-11


def test_nonnegativity_and_zero_set(rng):
    v = random_traceless(rng, 100000, 3.0)
    vals = bulk_energy(v)
    assert np.min(vals) >= 0.0
    near = v[vals <= 1e-8]
    for q in near:
        m = qt.embed(q)
        es = qt.eigensystem(m)
        dist_iso = np.linalg.norm(q)
        dist_nem = qt.frob_norm(m - qt.uniaxial(3.0, es.frame[:, 2]))
        assert min(dist_iso, dist_nem) <= 1e-3


def test_hessian_bound_finite_and_deterministic():
    lam1 = hessian_bound(c0=2.6, n_samples=400, seed=7)
    lam2 = hessian_bound(c0=2.6, n_samples=400, seed=7)
    assert lam1 == lam2
    assert 5.0 < lam1 < 1000.0
