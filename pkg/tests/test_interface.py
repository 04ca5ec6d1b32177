import numpy as np
import pytest

from qmcf.interface import (ShrinkingSphere, cutoff_profile, cutoff_profile_deriv,
                            plateau_cutoff)


@pytest.fixture
def circle():
    return ShrinkingSphere(np.zeros(2), 0.4, 2, 0.2)


def test_radius_law(circle):
    assert circle.radius(0.0) == 0.4
    assert abs(circle.radius(0.05) - np.sqrt(0.06)) < 1e-15
    assert abs(circle.extinction_time - 0.08) < 1e-15
    assert abs(circle.t_valid - 0.06) < 1e-15
    with pytest.raises(ValueError):
        circle.radius(0.07)


def test_flat_pair_is_static():
    pair = ShrinkingSphere(np.zeros(1), 0.5, 1, 0.2)
    assert pair.extinction_time == np.inf
    assert pair.radius(123.0) == 0.5
    x = np.array([[0.1], [0.9], [-0.7]])
    assert np.allclose(pair.signed_distance(x, 1.0), [0.4, -0.4, -0.2])
    assert np.allclose(pair.div_xi(x, 0.0), cutoff_profile_deriv(
        pair.signed_distance(x, 0.0), 0.2))
    assert np.allclose(pair.mean_curvature(x, 0.0), 0.0)


def test_signed_distance_and_normal(circle):
    assert abs(circle.signed_distance(np.zeros(2), 0.0) - 0.4) < 1e-15
    on_interface = np.array([0.4, 0.0])
    assert abs(circle.signed_distance(on_interface, 0.0)) < 1e-15
    assert np.allclose(circle.project(on_interface, 0.0), on_interface)
    x = np.array([0.3, 0.0])
    assert abs(circle.signed_distance(x, 0.0) - 0.1) < 1e-15
    assert np.allclose(circle.inner_normal(x, 0.0), [-1.0, 0.0])
    with pytest.raises(ValueError):
        circle.inner_normal(np.zeros(2), 0.0)


def test_cutoff_profile_values():
    assert abs(cutoff_profile(0.1, 0.4) - 0.99) < 1e-15
    assert cutoff_profile(0.4, 0.4) == 0.0
    assert cutoff_profile(0.5, 0.4) == 0.0
    assert abs(cutoff_profile(0.35, 0.4) - 0.137109375) < 1e-12
    z = np.linspace(-1, 1, 401)
    vals = cutoff_profile(z, 0.4)
    assert np.array_equal(vals, cutoff_profile(-z, 0.4))
    pos = vals[z >= 0]
    assert np.all(np.diff(pos) <= 1e-15)


def test_cutoff_cap():
    z = np.linspace(-1.5, 1.5, 601)
    assert np.all(1 - cutoff_profile(z, 0.2) >= np.minimum(z**2, 1.0) - 1e-14)


def test_cutoff_derivative_matches_fd():
    z = np.linspace(-0.45, 0.45, 101)
    h = 1e-7
    fd = (cutoff_profile(z + h, 0.4) - cutoff_profile(z - h, 0.4)) / (2 * h)
    assert np.max(np.abs(fd - cutoff_profile_deriv(z, 0.4))) < 1e-6


def test_xi_properties(circle, rng):
    t = 0.02
    rad = circle.radius(t)
    theta = rng.uniform(0, 2 * np.pi, 50)
    on_i = rad * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    xi = circle.xi(on_i, t)
    n = circle.inner_normal(on_i, t)
    assert np.max(np.abs(xi - n)) < 1e-12
    far = np.array([[0.9, 0.9], [-0.95, 0.1], [0.0, -0.85]])
    assert np.max(np.abs(circle.xi(far, t))) == 0.0
    assert np.max(np.abs(circle.div_xi(far, t))) == 0.0
    pts = rng.uniform(-0.7, 0.7, (200, 2))
    pts = pts[np.linalg.norm(pts, axis=1) > 1e-3]
    assert np.max(np.linalg.norm(circle.xi(pts, t), axis=1)) <= 1.0 + 1e-12


def test_div_xi_finite_difference_oracle(circle, rng):
    t = 0.02

    def fd_divergence(pts, h=1e-3):
        out = np.zeros(len(pts))
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            out += (circle.xi(pts + e, t)[:, k] - circle.xi(pts - e, t)[:, k]) / (2 * h)
        return out

    def sample(lo, hi, count):
        pts = []
        while len(pts) < count:
            p = rng.uniform(-0.65, 0.65, 2)
            d = abs(circle.signed_distance(p, t))
            if lo < d < hi and np.linalg.norm(p) > 0.05:
                pts.append(p)
        return np.array(pts)

    # quadratic zone of the cutoff: the finite-difference stencil is fully
    # second-order accurate and must match the analytic divergence tightly
    pts = sample(0.0, 0.095, 100)
    rel = np.abs(fd_divergence(pts) - circle.div_xi(pts, t)) / np.maximum(
        np.abs(circle.div_xi(pts, t)), 1.0)
    assert np.max(rel) <= 1e-4
    # blend zone: the cubic ramp has a third derivative of order (2/delta)^3,
    # which caps what the same stencil can resolve
    pts = sample(0.105, 0.195, 100)
    rel = np.abs(fd_divergence(pts) - circle.div_xi(pts, t)) / np.maximum(
        np.abs(circle.div_xi(pts, t)), 1.0)
    assert np.max(rel) <= 3e-3


def test_mean_curvature_magnitude_and_support(circle):
    t = 0.0
    on_i = np.array([0.4, 0.0])
    h_vec = circle.mean_curvature(on_i, t)
    assert abs(np.linalg.norm(h_vec) - 2.5) < 1e-12
    # kinematic orientation: n . H > 0 for a shrinking enclosed region
    assert np.dot(circle.inner_normal(on_i, t), h_vec) > 0
    far = np.array([0.9, 0.4])
    assert np.max(np.abs(circle.mean_curvature(far, t))) == 0.0


def test_curvature_constant_along_normals(circle):
    t = 0.01
    p = np.array([0.28, 0.12])
    assert abs(circle.signed_distance(p, t)) < circle.delta_i / 2
    n = circle.inner_normal(p, t)
    h = 1e-4
    dh = (circle.mean_curvature(p + h * n, t) - circle.mean_curvature(p - h * n, t)) / (2 * h)
    assert np.linalg.norm(dh) < 1e-8


def test_kinematic_identity(circle, rng):
    t = 0.02
    step = 1e-6
    pts = []
    while len(pts) < 50:
        p = rng.uniform(-0.6, 0.6, 2)
        if abs(circle.signed_distance(p, t)) < circle.delta_i / 2 and np.linalg.norm(p) > 0.05:
            pts.append(p)
    pts = np.array(pts)
    ddt = (circle.signed_distance(pts, t + step) - circle.signed_distance(pts, t - step)) / (2 * step)
    h_vec = circle.mean_curvature(pts, t)
    n = circle.inner_normal(pts, t)
    resid = ddt + np.einsum("ij,ij->i", n, h_vec)
    assert np.max(np.abs(resid)) < 1e-6


def test_divergence_curvature_relation_linear_in_distance(circle):
    t = 0.02
    rad = circle.radius(t)
    ratios = []
    for d in (0.08, 0.04, 0.02, 0.01, 0.005):
        x = np.array([rad - d, 0.0])
        res = -circle.div_xi(x, t) - np.dot(circle.mean_curvature(x, t), circle.xi(x, t))
        ratios.append(abs(res) / d)
    fitted = ratios[-1]
    assert all(r <= 1.5 * fitted + 1e-9 for r in ratios)


def test_plateau_cutoff_support():
    assert plateau_cutoff(0.05, 0.2) == 1.0
    assert plateau_cutoff(0.2, 0.2) == 0.0
    assert 0 < plateau_cutoff(0.15, 0.2) < 1


def test_tube_boundary_validation():
    sphere = ShrinkingSphere(np.zeros(2), 0.9, 2, 0.2)
    with pytest.raises(ValueError):
        sphere.validate_inside(1.0)
    ShrinkingSphere(np.zeros(2), 0.4, 2, 0.2).validate_inside(1.0)


def test_constructor_validation():
    with pytest.raises(ValueError):
        ShrinkingSphere(np.zeros(2), -0.1, 2, 0.2)
    with pytest.raises(ValueError):
        ShrinkingSphere(np.zeros(2), 0.4, 2, 1.5)
    with pytest.raises(ValueError):
        ShrinkingSphere(np.zeros(4), 0.4, 4, 0.2)
