"""Algebra of traceless symmetric 3x3 tensors.

The five-dimensional state space is represented by coefficient vectors on a
fixed orthonormal basis; matrices are materialised on demand.  All functions
broadcast over leading axes, so a field of tensors is just an array whose
last axis (length 5) or last two axes (3x3) carry the tensor.
"""

from dataclasses import dataclass

import numpy as np

# Orthonormal basis of the traceless symmetric 3x3 matrices: two diagonal
# directions and the three off-diagonal ones, normalised in Frobenius norm.
_S3 = np.sqrt(3.0)
_S2 = np.sqrt(2.0)
BASIS = np.array([
    [[(_S3 - 3) / 6, 0, 0], [0, (_S3 + 3) / 6, 0], [0, 0, -_S3 / 3]],
    [[(_S3 + 3) / 6, 0, 0], [0, (_S3 - 3) / 6, 0], [0, 0, -_S3 / 3]],
    [[0, _S2 / 2, 0], [_S2 / 2, 0, 0], [0, 0, 0]],
    [[0, 0, _S2 / 2], [0, 0, 0], [_S2 / 2, 0, 0]],
    [[0, 0, 0], [0, 0, _S2 / 2], [0, _S2 / 2, 0]],
])

# Symmetric cubic structure constants tr(E_i E_j E_k); they give the
# basis coefficients of the traceless part of a squared tensor.
_CUBIC = np.einsum("iab,jbc,kca->ijk", BASIS, BASIS, BASIS)

_ID3 = np.eye(3)


def embed(coeffs):
    """Matrix view of coefficient vectors, shape (..., 5) -> (..., 3, 3)."""
    coeffs = np.asarray(coeffs, dtype=float)
    return np.einsum("...c,cij->...ij", coeffs, BASIS)


def project(mat):
    """Coefficient vector of the traceless symmetric part, (..., 3, 3) -> (..., 5)."""
    mat = np.asarray(mat, dtype=float)
    return np.einsum("...ij,cij->...c", mat, BASIS)


_CUBIC_FLAT = _CUBIC.reshape(5, 25)


def square_coeffs(coeffs):
    """Coefficients of the traceless part of Q^2 for Q given by `coeffs`.

    Contracts the cubic structure constants; routed through a matrix product
    because this sits on the hot path of the time stepper.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    lead = coeffs.shape[:-1]
    flat = coeffs.reshape(-1, 5)
    partial = (flat @ _CUBIC_FLAT).reshape(-1, 5, 5)
    return np.einsum("nij,ni->nj", partial, flat).reshape(*lead, 5)


def cubic_invariant(coeffs):
    """tr(Q^3) from coefficient vectors."""
    coeffs = np.asarray(coeffs, dtype=float)
    return np.einsum("...k,...k->...", square_coeffs(coeffs), coeffs)


def uniaxial(s, u):
    """Tensor s (u x u - I/3) for a unit axis u; broadcasts over s and u."""
    u = np.asarray(u, dtype=float)
    nrm = np.linalg.norm(u, axis=-1)
    if np.any(np.abs(nrm - 1.0) > 1e-10):
        raise ValueError("axis must be a unit vector (|u| = 1 within 1e-10)")
    s = np.asarray(s, dtype=float)
    outer = u[..., :, None] * u[..., None, :]
    return s[..., None, None] * (outer - _ID3 / 3.0)


def contract(a, b):
    """Frobenius scalar product A:B = sum_ij A_ij B_ij."""
    return np.einsum("...ij,...ij->...", np.asarray(a, float), np.asarray(b, float))


def frob_norm(a):
    """Frobenius norm sqrt(A:A)."""
    return np.sqrt(contract(a, a))


def commutator(a, b):
    """Matrix commutator AB - BA (antisymmetric for symmetric inputs)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a @ b - b @ a


def eigvals_sym(mat):
    """Closed-form ascending eigenvalues of symmetric 3x3 matrices.

    Trigonometric form of the characteristic cubic; broadcasts over leading
    axes and is accurate to ~1e-7 |A| near degenerate spectra, which is the
    regime where only eigenvalue (not frame) information is used downstream.
    """
    a = np.asarray(mat, dtype=float)
    q = np.trace(a, axis1=-2, axis2=-1) / 3.0
    d = a - q[..., None, None] * _ID3
    p2 = np.einsum("...ij,...ij->...", d, d)
    p = np.sqrt(np.maximum(p2, 0.0) / 6.0)
    safe = p > 0
    pinv = np.where(safe, p, 1.0)
    b = d / pinv[..., None, None]
    detb = np.linalg.det(b)
    r = np.clip(detb / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    lam3 = q + 2.0 * p * np.cos(phi)
    lam1 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    lam2 = 3.0 * q - lam1 - lam3
    out = np.stack([lam1, lam2, lam3], axis=-1)
    return np.where(safe[..., None], out, np.broadcast_to(q[..., None], out.shape))


@dataclass
class Eigensystem:
    """Ascending eigenvalues and an orthonormal eigenframe.

    lam[0] <= lam[1] <= lam[2]; frame[:, i] is the unit eigenvector of
    lam[i].  For traceless input the eigenvalues sum to zero.
    """

    lam: np.ndarray
    frame: np.ndarray

    def reconstruct(self):
        return (self.frame * self.lam) @ self.frame.T


def _eigvec_cross(mat, lam):
    """Eigenvector of an isolated eigenvalue via the largest column cross product."""
    m = mat - lam * _ID3
    cands = [np.cross(m[:, i], m[:, j]) for i, j in ((0, 1), (0, 2), (1, 2))]
    norms = [np.linalg.norm(c) for c in cands]
    k = int(np.argmax(norms))
    if norms[k] == 0.0:
        return None
    return cands[k] / norms[k]


def eigensystem(mat):
    """Eigendecomposition of a symmetric 3x3 matrix.

    Uses the closed-form solver with cross-product eigenvectors; falls back
    to the iterative LAPACK routine for near-degenerate spectra, where any
    orthonormal frame spanning the eigenspaces is acceptable.
    """
    mat = np.asarray(mat, dtype=float)
    lam = eigvals_sym(mat)
    scale = np.linalg.norm(mat) + 1.0
    gap = min(lam[1] - lam[0], lam[2] - lam[1])
    if gap >= 1e-8 * scale:
        n1 = _eigvec_cross(mat, lam[0])
        n3 = _eigvec_cross(mat, lam[2])
        if n1 is not None and n3 is not None:
            n3 = n3 - np.dot(n3, n1) * n1
            nn = np.linalg.norm(n3)
            if nn > 0.5:
                n3 = n3 / nn
                n2 = np.cross(n3, n1)
                frame = np.stack([n1, n2, n3], axis=1)
                recon = (frame * lam) @ frame.T
                if np.linalg.norm(recon - mat) <= 1e-10 * scale:
                    return Eigensystem(lam, frame)
    lam_h, frame_h = np.linalg.eigh(mat)
    return Eigensystem(lam_h, frame_h)


def eigensystem_field(coeffs):
    """Batched eigendecomposition of a coefficient field.

    Returns (lam, frames) with lam[..., k] ascending and frames[..., :, k]
    the matching unit eigenvectors.  Backed by the batched LAPACK solver,
    which returns a valid orthonormal frame also at degenerate spectra.
    """
    return np.linalg.eigh(embed(coeffs))


def biaxiality(mat):
    """Degree of orientation s and biaxiality r of a tensor.

    s = 3/2 of the top eigenvalue, r = 3/2 of the gap between the two lower
    ones; (s, r) = (0, 0) exactly at the isotropic state.  Uses the LAPACK
    eigenvalues: near a degenerate spectrum the closed form only resolves
    the gap to the square root of machine precision.
    """
    lam = np.linalg.eigvalsh(np.asarray(mat, dtype=float))
    s = 1.5 * lam[..., 2]
    r = np.maximum(1.5 * (lam[..., 1] - lam[..., 0]), 0.0)
    return s, r


def biaxiality_field(coeffs):
    """(s, r) arrays for a coefficient field, via closed-form eigenvalues.

    Cheaper than the LAPACK route on large fields; the gap coordinate is
    accurate to ~1e-8 |Q| near degeneracy, far below the resolution of any
    table interpolation consuming it.
    """
    lam = eigvals_sym(embed(coeffs))
    s = 1.5 * lam[..., 2]
    r = np.maximum(1.5 * (lam[..., 1] - lam[..., 0]), 0.0)
    return s, r
