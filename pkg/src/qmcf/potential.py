"""Bulk potential of the order-parameter field and its derived quantities.

The quartic potential, its state-space gradient, the restriction to uniaxial
tensors, the epsilon-regularised variant used by the energy functionals, and
a sampled bound on the potential Hessian that feeds the time-step policy.
"""

from dataclasses import dataclass, field

import numpy as np

from . import qtensor


@dataclass(frozen=True)
class PotentialCoefficients:
    """Material constants (a, b, c) of the quartic bulk potential.

    With ``critical=True`` the constants must satisfy b^2 = 27 a c, the
    balance at which the isotropic state and the ordered manifold have equal
    (zero) energy.  The regularisation adds eps^(K-1) with K = 4.
    """

    a: float = 3.0
    b: float = 9.0
    c: float = 1.0
    critical: bool = True
    eps_power: int = field(default=4)

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0 or self.c <= 0:
            raise ValueError("coefficients a, b, c must be positive")
        if self.critical and abs(self.b**2 - 27 * self.a * self.c) > 1e-10 * self.b**2:
            raise ValueError(
                f"critical coefficients require b^2 = 27ac, got b^2={self.b**2}, "
                f"27ac={27 * self.a * self.c}"
            )
        if self.eps_power != 4:
            raise ValueError("the regularisation exponent is fixed at K = 4")

    @property
    def s_plus(self) -> float:
        """Ordered-phase degree of orientation, the larger stable root."""
        disc = self.b**2 - 24 * self.a * self.c
        if disc < 0:
            raise ValueError("b^2 - 24ac < 0: no ordered minimiser exists")
        return float((self.b + np.sqrt(disc)) / (4 * self.c))

    @property
    def s_minus(self) -> float:
        """Degree of orientation of the disordered minimiser (always 0)."""
        return 0.0


DEFAULT_COEFFS = PotentialCoefficients()


def bulk_energy(coeffs_q, pot: PotentialCoefficients = DEFAULT_COEFFS):
    """Potential density (a/2) tr Q^2 - (b/3) tr Q^3 + (c/4) (tr Q^2)^2.

    Accepts coefficient vectors (..., 5); nonnegative for critical constants.
    """
    q = np.asarray(coeffs_q, dtype=float)
    tr2 = np.einsum("...c,...c->...", q, q)
    tr3 = qtensor.cubic_invariant(q)
    return pot.a / 2 * tr2 - pot.b / 3 * tr3 + pot.c / 4 * tr2**2


def bulk_gradient(coeffs_q, pot: PotentialCoefficients = DEFAULT_COEFFS):
    """State-space gradient of the potential, as coefficient vectors.

    In matrix form aQ - bQ^2 + c|Q|^2 Q + (b/3)|Q|^2 I; the isotropic term
    only removes the trace, so on the basis it reduces to a projection and
    the result is traceless by construction.
    """
    q = np.asarray(coeffs_q, dtype=float)
    tr2 = np.einsum("...c,...c->...", q, q)
    out = qtensor.square_coeffs(q)
    out *= -pot.b
    out += (pot.a + pot.c * tr2)[..., None] * q
    return out


def regularized_energy(coeffs_q, eps, pot: PotentialCoefficients = DEFAULT_COEFFS):
    """Potential shifted by eps^3, keeping it strictly positive."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return bulk_energy(coeffs_q, pot) + eps**3


def uniaxial_f(s, pot: PotentialCoefficients = DEFAULT_COEFFS):
    """Potential restricted to uniaxial tensors: f(s) = s^2 (9a - 2bs + 3cs^2)/27."""
    s = np.asarray(s, dtype=float)
    return s**2 / 27 * (9 * pot.a - 2 * pot.b * s + 3 * pot.c * s**2)


def sqrt_f(s, pot: PotentialCoefficients = DEFAULT_COEFFS):
    """Nonnegative square root of f on [0, s_plus]: (sqrt(c)/3) s (s_plus - s).

    Only valid for critical coefficients, where f is a perfect square.
    """
    s = np.asarray(s, dtype=float)
    sp = pot.s_plus
    if np.any(s < -1e-12) or np.any(s > sp + 1e-12):
        raise ValueError(f"sqrt_f requires s in [0, {sp}]")
    s = np.clip(s, 0.0, sp)
    return np.sqrt(pot.c) / 3 * s * (sp - s)


def hessian_bound(pot: PotentialCoefficients = DEFAULT_COEFFS, c0: float = 2.6,
                  n_samples: int = 2000, seed: int = 12345) -> float:
    """Sampled spectral bound of the potential Hessian over |Q| <= c0.

    Central differences of the analytic gradient on random states; used as a
    safe stiffness scale for the explicit time-step policy.  Deterministic
    for fixed seed.
    """
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((n_samples, 5))
    radii = c0 * rng.random(n_samples) ** 0.2
    pts *= (radii / np.linalg.norm(pts, axis=1))[:, None]
    step = 1e-5
    lam_max = 0.0
    eye = np.eye(5)
    for q in pts:
        cols = [
            (bulk_gradient(q + step * eye[j], pot) - bulk_gradient(q - step * eye[j], pot))
            / (2 * step)
            for j in range(5)
        ]
        hess = 0.5 * (np.stack(cols, axis=1) + np.stack(cols, axis=0))
        lam = np.max(np.abs(np.linalg.eigvalsh(hess)))
        lam_max = max(lam_max, float(lam))
    return lam_max
