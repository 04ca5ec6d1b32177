"""Analytically evolving spherical interface and its calibration fields.

A sphere (circle in 2-D, point pair in 1-D) shrinking by mean curvature has
the exact radius law R(t) = sqrt(R0^2 - 2 (d-1) t).  Around it we build the
signed distance, the nearest-point projection, a compactly supported
extension xi of the inner unit normal, and a constant-in-normal-direction
extension of the mean curvature vector.  The sign of the curvature vector
is fixed by the kinematic identity  d/dt dist = -n . H  on the interface,
which for a shrinking enclosed region means n . H = (d-1)/R > 0.
"""

from dataclasses import dataclass

import numpy as np


def smoothstep_down(t):
    """C^1 ramp from 1 at t<=0 to 0 at t>=1 (cubic)."""
    t = np.clip(t, 0.0, 1.0)
    return 1.0 - t * t * (3.0 - 2.0 * t)


def cutoff_profile(z, delta):
    """Even cutoff: 1 - z^2 up to delta/2, blended to 0 at delta.

    The blend multiplies 1 - z^2 by a cubic ramp, which preserves the cap
    eta <= 1 - min(z^2, 1) needed by the localisation estimates, and keeps
    the profile C^1.
    """
    z = np.abs(np.asarray(z, dtype=float))
    quad = 1.0 - z**2
    ramp = smoothstep_down((z - delta / 2) / (delta / 2))
    return np.where(z >= delta, 0.0, quad * ramp)


def cutoff_profile_deriv(z, delta):
    """Derivative of `cutoff_profile` (odd function)."""
    z = np.asarray(z, dtype=float)
    az = np.abs(z)
    t = (az - delta / 2) / (delta / 2)
    tc = np.clip(t, 0.0, 1.0)
    ramp = 1.0 - tc * tc * (3.0 - 2.0 * tc)
    dramp = np.where((t > 0.0) & (t < 1.0), -6.0 * tc * (1.0 - tc) * (2.0 / delta), 0.0)
    dd = -2.0 * az * ramp + (1.0 - az**2) * dramp
    dd = np.where(az >= delta, 0.0, dd)
    return np.sign(z) * dd


def plateau_cutoff(z, delta):
    """Even C^1 cutoff: 1 on [0, delta/2], 0 beyond delta (plain smoothstep)."""
    z = np.abs(np.asarray(z, dtype=float))
    return smoothstep_down((z - delta / 2) / (delta / 2))


@dataclass
class ShrinkingSphere:
    """Sphere shrinking by mean curvature, with calibration extensions.

    d_a = 1 degenerates to a static symmetric point pair (flat fronts carry
    no curvature), which serves the one-dimensional standing-wave runs.
    """

    center: np.ndarray
    r0: float
    d_a: int
    delta_i: float = 0.2

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).reshape(self.d_a)
        if self.d_a not in (1, 2, 3):
            raise ValueError("ambient dimension must be 1, 2 or 3")
        if not (0 < self.delta_i < 1):
            raise ValueError("tube half-width must lie in (0, 1)")
        if self.r0 <= 0:
            raise ValueError("initial radius must be positive")

    @property
    def extinction_time(self):
        if self.d_a == 1:
            return np.inf
        return self.r0**2 / (2 * (self.d_a - 1))

    @property
    def t_valid(self):
        """Time until the radius reaches the tube half-width.

        Beyond it the tube wraps around the centre and the nearest-point
        projection stops being well behaved there.
        """
        if self.d_a == 1:
            return np.inf
        return (self.r0**2 - self.delta_i**2) / (2 * (self.d_a - 1))

    def validate_inside(self, half_width: float):
        """Check the tube keeps its distance from the boundary of [-L, L]^d."""
        margin = half_width - np.max(np.abs(self.center)) - self.r0 - self.delta_i
        if margin <= 0:
            raise ValueError(
                "interface tube touches the domain boundary "
                f"(needs R0 + delta_i < L - |center|, margin {margin:.3g})"
            )

    def _check_time(self, t):
        if t < 0 or t > self.t_valid + 1e-12:
            raise ValueError(f"time {t} outside the validity window [0, {self.t_valid}]")

    def radius(self, t: float) -> float:
        self._check_time(t)
        return float(np.sqrt(self.r0**2 - 2 * (self.d_a - 1) * t))

    def signed_distance(self, x, t: float):
        """R(t) - |x - center|; positive inside the enclosed region."""
        x = np.asarray(x, dtype=float)
        return self.radius(t) - np.linalg.norm(x - self.center, axis=-1)

    def _radial(self, x):
        x = np.asarray(x, dtype=float)
        rel = x - self.center
        dist = np.linalg.norm(rel, axis=-1)
        if np.any(dist < 1e-14):
            raise ValueError("normal and projection are undefined at the centre")
        return rel, dist

    def inner_normal(self, x, t: float):
        """Unit normal pointing into the enclosed region (gradient of distance)."""
        self._check_time(t)
        rel, dist = self._radial(x)
        return -rel / dist[..., None]

    def project(self, x, t: float):
        """Nearest point on the interface."""
        rad = self.radius(t)
        rel, dist = self._radial(x)
        return self.center + rad * rel / dist[..., None]

    def xi(self, x, t: float):
        """Cutoff extension of the inner normal; |xi| <= 1, zero off the tube."""
        d = self.signed_distance(x, t)
        eta = cutoff_profile(d, self.delta_i)
        rel, dist = self._radial(x)
        return -eta[..., None] * rel / dist[..., None]

    def div_xi(self, x, t: float):
        """Analytic divergence of xi.

        eta'(d) plus eta(d) times the divergence of the radial unit normal,
        which is -(d_a - 1)/|x - center|.
        """
        d = self.signed_distance(x, t)
        _, dist = self._radial(x)
        return (cutoff_profile_deriv(d, self.delta_i)
                - cutoff_profile(d, self.delta_i) * (self.d_a - 1) / dist)

    def mean_curvature(self, x, t: float):
        """Extended curvature vector, constant along normal lines in the half tube.

        Magnitude (d_a - 1)/R(t) on the interface, directed along the inner
        normal so that the kinematic identity holds; cut off outside the tube.
        """
        d = self.signed_distance(x, t)
        kappa = (self.d_a - 1) / self.radius(t)
        rel, dist = self._radial(x)
        amp = plateau_cutoff(d, self.delta_i) * kappa
        return -amp[..., None] * rel / dist[..., None]
