"""Monitored functionals of the relaxation flow.

Energies, the modulated (interface-calibrated) energy in both its
divergence and direct forms, phase-field normal and curvature proxies, the
lower-bound suite controlled by the modulated energy, the stress-divergence
consistency monitor, commutator norms, contour extraction with a circle
fit, director extraction and comparison against the sphere-valued heat
flow, and growth-rate reporting.

Discretisation conventions, chosen so the exact inequalities survive
discretely: the energy density uses the face-average gradient estimator
(one-sided at Dirichlet boundaries), which is the Lyapunov function of the
5-point scheme; every projection/normal field uses per-cell central
differences; the scalar distance field uses its isotropic-state value in
Dirichlet ghosts.  The stress tensor is assembled from forward differences,
a deliberately first-order choice that makes its divergence defect an O(h)
consistency monitor.
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import qtensor
from .potential import DEFAULT_COEFFS, bulk_gradient, regularized_energy
from .quasidistance import distance_field, gradient_field
from .solver import UniformGrid, _mirrored_neighbors, laplacian


class ExtinctionSignal(RuntimeError):
    """No level-set contour found: the enclosed region is gone."""


class AlignmentError(RuntimeError):
    """Director sign propagation hit an inconsistency (defect)."""


# ---------------------------------------------------------------------------
# Difference operators.


def _pad_scalar(v, d_a, bc, ghost):
    pad = [(1, 1)] * d_a + [(0, 0)] * (v.ndim - d_a)
    if bc == "periodic":
        return np.pad(v, pad, mode="wrap")
    return np.pad(v, pad, mode="constant", constant_values=ghost)


def central_diff(v, grid: UniformGrid, bc="dirichlet", ghost=0.0):
    """Per-cell central differences along each axis; shape (*cells, d_a, ...)."""
    d = grid.d_a
    p = _pad_scalar(np.asarray(v, dtype=float), d, bc, ghost)
    out = []
    for ax in range(d):
        lo = tuple(slice(1, -1) if a != ax else slice(0, -2) for a in range(d))
        hi = tuple(slice(1, -1) if a != ax else slice(2, None) for a in range(d))
        out.append((p[hi] - p[lo]) / (2 * grid.h))
    return np.stack(out, axis=grid.d_a)


def forward_diff(v, grid: UniformGrid, bc="dirichlet", ghost=0.0):
    """Per-cell forward differences along each axis."""
    d = grid.d_a
    p = _pad_scalar(np.asarray(v, dtype=float), d, bc, ghost)
    core = (slice(1, -1),) * d
    out = []
    for ax in range(d):
        hi = tuple(slice(1, -1) if a != ax else slice(2, None) for a in range(d))
        out.append((p[hi] - p[core]) / grid.h)
    return np.stack(out, axis=grid.d_a)


def grad_energy_density(q, grid: UniformGrid, bc="dirichlet"):
    """Per-cell |grad Q|^2 by face averaging: (|D+|^2 + |D-|^2)/2 per axis.

    At a Dirichlet boundary the missing outward face falls back to the
    interior one (one-sided difference); summed over cells this matches the
    face-sum Dirichlet energy up to boundary cells, so the energy identity
    of the explicit scheme holds to rounding in the interior.
    """
    d = grid.d_a
    q = np.asarray(q, dtype=float)
    total = np.zeros(q.shape[:-1])
    for ax in range(d):
        diff = np.diff(q, axis=ax) / grid.h
        sq = np.einsum("...c,...c->...", diff, diff)
        pad_lo = [(0, 0)] * d
        pad_hi = [(0, 0)] * d
        pad_lo[ax] = (1, 0)
        pad_hi[ax] = (0, 1)
        if bc == "periodic":
            wrap = (np.take(q, [0], axis=ax) - np.take(q, [-1], axis=ax)) / grid.h
            wsq = np.einsum("...c,...c->...", wrap, wrap)
            lo = np.concatenate([wsq, sq], axis=ax)
            hi = np.concatenate([sq, wsq], axis=ax)
        else:
            lo = np.pad(sq, pad_lo, mode="edge")
            hi = np.pad(sq, pad_hi, mode="edge")
        total += 0.5 * (lo + hi)
    return total


# ---------------------------------------------------------------------------
# Energies.


def gl_energy(q, grid: UniformGrid, eps, pot=DEFAULT_COEFFS, bc="dirichlet"):
    """Midpoint-rule energy: eps/2 |grad Q|^2 + F_eps(Q)/eps per cell."""
    dens = 0.5 * eps * grad_energy_density(q, grid, bc)
    dens = dens + regularized_energy(q, eps, pot) / eps
    return float(np.sum(dens) * grid.cell_volume)


def psi_field(q, table):
    """Distance-to-ordered-manifold composed with the state, per cell."""
    return distance_field(q, table)


def _psi_ghost(table):
    return float(table.value(np.zeros(1), np.zeros(1))[0])


def calibration_fields(interface, grid: UniformGrid, t):
    """xi and its analytic divergence on the cell centres."""
    x = grid.cell_centers()
    return interface.xi(x, t), interface.div_xi(x, t)


def modulated_energy_parts(q, interface, t, eps, table, grid: UniformGrid,
                           pot=DEFAULT_COEFFS, bc="dirichlet"):
    """Both discrete forms of the interface-calibrated energy.

    With the nonnegative distance convention (psi = 0 on the ordered
    manifold, psi = c_F at the isotropic state) the calibration term that
    cancels the transition-layer energy is +integral(xi . grad psi): the
    distance grows towards the isotropic side, against the inner normal.
    The primary form integrates -div(xi) psi (summation by parts, no
    boundary term since xi vanishes there); the direct form is the one
    entering the exact pointwise chain of lower bounds.  Their agreement is
    a quadrature-consistency check.
    """
    e_gl = gl_energy(q, grid, eps, pot, bc)
    psi = psi_field(q, table)
    xi, div_xi = calibration_fields(interface, grid, t)
    gpsi = central_diff(psi, grid, bc, ghost=_psi_ghost(table))
    div_form = e_gl - float(np.sum(div_xi * psi)) * grid.cell_volume
    direct_form = e_gl + float(np.sum(np.einsum("...k,...k->...", xi, gpsi))) * grid.cell_volume
    return {"E_gl": e_gl, "E_mod": div_form, "E_mod_direct": direct_form}


def modulated_energy(q, interface, t, eps, table, grid: UniformGrid,
                     pot=DEFAULT_COEFFS, bc="dirichlet"):
    return modulated_energy_parts(q, interface, t, eps, table, grid, pot, bc)["E_mod"]


# ---------------------------------------------------------------------------
# Projection, normal, curvature proxies.


def projection_fields(q, grid: UniformGrid, table, eps, pot=DEFAULT_COEFFS,
                      bc="dirichlet", xi=None):
    """Per-cell projection data of the state gradient.

    Returns a dict with the central-difference gradient `dq` (*cells, d_a, 5),
    the distance-gradient direction, |Pi grad Q|^2, |grad Q|^2, the unit
    normal proxy n_eps (fallback xi/|xi| where the distance field is flat),
    and the curvature proxy H_eps.
    """
    d = grid.d_a
    dq = central_diff(q, grid, bc)
    g = gradient_field(q, table)
    gnorm = np.linalg.norm(g, axis=-1)
    ghat = np.where(gnorm[..., None] > 1e-12, g / np.maximum(gnorm, 1e-300)[..., None], 0.0)
    proj_coeff = np.einsum("...kc,...c->...k", dq, ghat)
    pi_sq = np.einsum("...k,...k->...", proj_coeff, proj_coeff)
    grad_sq = np.einsum("...kc,...kc->...", dq, dq)

    psi = psi_field(q, table)
    gpsi = central_diff(psi, grid, bc, ghost=_psi_ghost(table))
    gpsi_norm = np.linalg.norm(gpsi, axis=-1)
    # unit normal of the transition layer: the distance grows towards the
    # isotropic side, so the inner-pointing normal is -grad(psi)/|grad(psi)|
    n_eps = np.zeros_like(gpsi)
    good = gpsi_norm > 1e-8
    n_eps[good] = -gpsi[good] / gpsi_norm[good][..., None]
    if xi is not None:
        xin = np.linalg.norm(xi, axis=-1)
        fb = (~good) & (xin > 0)
        n_eps[fb] = xi[fb] / xin[fb][..., None]

    lap = laplacian(q, grid, bc)
    force = eps * lap - bulk_gradient(q, pot) / eps
    gq_norm = np.sqrt(grad_sq)
    h_eps = -np.einsum("...c,...kc->...k", force, dq)
    with np.errstate(invalid="ignore"):
        h_eps = np.where(gq_norm[..., None] > 1e-12,
                         h_eps / np.maximum(gq_norm, 1e-300)[..., None], 0.0)
    return {
        "dq": dq, "ghat": ghat, "gnorm": gnorm, "pi_sq": pi_sq,
        "grad_sq": grad_sq, "psi": psi, "gpsi": gpsi, "gpsi_norm": gpsi_norm,
        "n_eps": n_eps, "h_eps": h_eps,
    }


def bound_suite(q, interface, t, eps, table, grid: UniformGrid,
                pot=DEFAULT_COEFFS, bc="dirichlet", ceiling=50.0):
    """The five quantities controlled by the modulated energy, as ratios.

    Each left-hand side is evaluated with the same cell sums as the energy
    and divided by max(E_mod, eps * 1e-6); ratios above `ceiling` are
    reported under the "flagged" key.  The first one is exact: it uses the
    identical quadrature, so lhs_a <= E_mod_direct holds to rounding.
    """
    parts = modulated_energy_parts(q, interface, t, eps, table, grid, pot, bc)
    xi, _ = calibration_fields(interface, grid, t)
    pf = projection_fields(q, grid, table, eps, pot, bc, xi=xi)
    vol = grid.cell_volume
    f_eps = regularized_energy(q, eps, pot)
    face_sq = grad_energy_density(q, grid, bc)

    lhs_a = float(np.sum(0.5 * eps * face_sq + f_eps / eps - pf["gpsi_norm"])) * vol

    pi_n = np.sqrt(pf["pi_sq"])
    lhs_b = 0.5 * float(np.sum((np.sqrt(eps) * pi_n - np.sqrt(2 * f_eps / eps))**2)) * vol
    lhs_b += 0.5 * eps * float(np.sum(pf["grad_sq"] - pf["pi_sq"])) * vol

    lhs_btilde = 0.5 * float(np.sum((np.sqrt(eps) * pi_n - pf["gnorm"] / np.sqrt(eps))**2)) * vol

    one_minus = 1.0 - np.einsum("...k,...k->...", xi, pf["n_eps"])
    lhs_c = float(np.sum((np.sqrt(eps * pf["grad_sq"]) - pf["gnorm"] / np.sqrt(eps))**2)) * vol
    lhs_c += float(np.sum(one_minus * (0.5 * eps * pf["pi_sq"] + pf["gpsi_norm"]))) * vol

    dist = interface.signed_distance(grid.cell_centers(), t)
    loc = np.minimum(dist**2, 1.0)
    lhs_d = float(np.sum((0.5 * eps * face_sq + f_eps / eps + pf["gpsi_norm"]) * loc)) * vol

    denom = max(parts["E_mod"], eps * 1e-6)
    lhs = {"a": lhs_a, "b": lhs_b, "btilde": lhs_btilde, "c": lhs_c, "d": lhs_d}
    ratios = {k: v / denom for k, v in lhs.items()}
    return {
        "lhs": lhs,
        "ratios": ratios,
        "flagged": sorted(k for k, v in ratios.items() if v > ceiling),
        "parts": parts,
    }


# ---------------------------------------------------------------------------
# Stress tensor.


def stress_tensor(q, grid: UniformGrid, eps, pot=DEFAULT_COEFFS, bc="dirichlet"):
    """Energy stress tensor from forward-difference gradients.

    T_ij = (eps/2 |grad Q|^2 + F_eps/eps) delta_ij - eps dQ_i : dQ_j with
    the gradient sampled on forward faces while the potential sits at cell
    centres; the half-cell mismatch is what makes the divergence defect a
    first-order consistency monitor.
    """
    dq = forward_diff(q, grid, bc)
    grad_sq = np.einsum("...kc,...kc->...", dq, dq)
    iso = 0.5 * eps * grad_sq + regularized_energy(q, eps, pot) / eps
    tens = -eps * np.einsum("...ic,...jc->...ij", dq, dq)
    idx = np.arange(grid.d_a)
    tens[..., idx, idx] += iso[..., None]
    return tens


def stress_divergence_residual(q, grid: UniformGrid, eps, pot=DEFAULT_COEFFS,
                               bc="dirichlet", return_fields=False):
    """Normalised L2 defect of div T = H_eps |grad Q| over the active band.

    Sampled on cells with |grad Q| > 1e-6; normalised by the L2 norm of the
    energy density on the same cells, which is h-independent.  The
    curvature side is assembled from central quantities, so the defect
    tracks the half-cell offset of the tensor and shrinks linearly in h.
    """
    d = grid.d_a
    tens = stress_tensor(q, grid, eps, pot, bc)
    div_t = np.zeros(q.shape[:-1] + (d,))
    for i in range(d):
        gi = central_diff(tens[..., i, :], grid, bc)  # (*cells, deriv axis, j)
        div_t += gi[..., i, :]

    dq = central_diff(q, grid, bc)
    grad_sq = np.einsum("...kc,...kc->...", dq, dq)
    gq_norm = np.sqrt(grad_sq)
    lap = laplacian(q, grid, bc)
    force = eps * lap - bulk_gradient(q, pot) / eps
    rhs_vec = -np.einsum("...c,...kc->...k", force, dq)

    band = gq_norm > 1e-6
    if not np.any(band):
        return (0.0, {}) if return_fields else 0.0
    defect = div_t - rhs_vec
    num = np.sqrt(np.sum(np.einsum("...k,...k->...", defect, defect)[band]) * grid.cell_volume)
    dens = 0.5 * eps * grad_sq + regularized_energy(q, eps, pot) / eps
    den = np.sqrt(np.sum(dens[band] ** 2) * grid.cell_volume)
    res = float(num / den)
    if return_fields:
        return res, {"div_t": div_t, "rhs_vec": rhs_vec, "band": band}
    return res


# ---------------------------------------------------------------------------
# Commutators.


def _commutator_l2(dq_mats, q_mats, vol):
    comm = dq_mats @ q_mats[..., None, :, :] - q_mats[..., None, :, :] @ dq_mats
    sq = np.einsum("...kij,...kij->...", comm, comm)
    return float(np.sqrt(np.sum(sq) * vol))


def commutator_norms(q, rhs, grid: UniformGrid, bc="dirichlet"):
    """Spatial L2 norms of [dQ, Q] summed over directions and of [dQ/dt, Q]."""
    q_mats = qtensor.embed(q)
    dq = central_diff(q, grid, bc)
    dq_mats = qtensor.embed(dq)
    comm_grad = _commutator_l2(dq_mats, q_mats, grid.cell_volume)
    rhs_mats = qtensor.embed(rhs)
    comm_t = rhs_mats @ q_mats - q_mats @ rhs_mats
    sq = np.einsum("...ij,...ij->...", comm_t, comm_t)
    comm_time = float(np.sqrt(np.sum(sq) * grid.cell_volume))
    return comm_grad, comm_time


# ---------------------------------------------------------------------------
# Interface extraction.


@dataclass
class CircleFit:
    radius: float
    center: np.ndarray
    rms: float
    n_points: int


def level_crossings(values, grid: UniformGrid, level):
    """Linear-interpolation crossing points of a 2-D cell field at `level`."""
    if grid.d_a != 2:
        raise ValueError("contour extraction needs a 2-D field")
    v = np.asarray(values, dtype=float) - level
    ax = grid.axis()
    pts = []
    for axis in (0, 1):
        a = v if axis == 0 else v.T
        s1, s2 = a[:-1, :], a[1:, :]
        cross = (s1 * s2) < 0
        ii, jj = np.nonzero(cross)
        frac = s1[ii, jj] / (s1[ii, jj] - s2[ii, jj])
        x_along = ax[ii] + frac * grid.h
        x_perp = ax[jj]
        if axis == 0:
            pts.append(np.stack([x_along, x_perp], axis=1))
        else:
            pts.append(np.stack([x_perp, x_along], axis=1))
    pts = np.concatenate(pts, axis=0)
    if len(pts) == 0:
        raise ExtinctionSignal(f"no contour at level {level}")
    return pts


def fit_circle(points):
    """Algebraic least-squares circle fit (solves the linearised system)."""
    x, y = points[:, 0], points[:, 1]
    a_mat = np.stack([2 * x, 2 * y, np.ones_like(x)], axis=1)
    rhs = x**2 + y**2
    sol, *_ = np.linalg.lstsq(a_mat, rhs, rcond=None)
    cx, cy, c = sol
    radius = np.sqrt(max(c + cx**2 + cy**2, 0.0))
    dist = np.hypot(x - cx, y - cy)
    rms = float(np.sqrt(np.mean((dist - radius) ** 2)))
    return CircleFit(float(radius), np.array([cx, cy]), rms, len(points))


def interface_extract(q, grid: UniformGrid, level):
    """Fitted circle radius of the orientation-degree contour at `level`."""
    s, _ = qtensor.biaxiality_field(q)
    return fit_circle(level_crossings(s, grid, level))


# ---------------------------------------------------------------------------
# Director extraction and comparison.


def extract_director(q, mask):
    """Leading eigenvector per masked cell with sign propagated from a seed.

    Signs are aligned by flood fill (the director is only defined up to
    sign); an adjacent aligned pair pointing more than 60 degrees apart is
    treated as a defect and reported as an alignment failure.
    """
    lam, frames = qtensor.eigensystem_field(q[mask])
    u = np.zeros(q.shape[:-1] + (3,))
    u[mask] = frames[..., :, 2]

    shape = mask.shape
    aligned = np.zeros(shape, dtype=bool)
    seeds = np.argwhere(mask)
    if len(seeds) == 0:
        return u
    from collections import deque

    seed = tuple(seeds[len(seeds) // 2])
    queue = deque([seed])
    aligned[seed] = True
    while queue:
        idx = queue.popleft()
        for ax in range(len(shape)):
            for step in (-1, 1):
                nb = list(idx)
                nb[ax] += step
                if not (0 <= nb[ax] < shape[ax]):
                    continue
                nb = tuple(nb)
                if mask[nb] and not aligned[nb]:
                    dot = float(np.dot(u[nb], u[idx]))
                    if dot < 0:
                        u[nb] = -u[nb]
                        dot = -dot
                    if dot < 0.5:
                        raise AlignmentError(
                            f"director sign propagation failed at {nb} (dot={dot:.3f})"
                        )
                    aligned[nb] = True
                    queue.append(nb)
    # loop consistency: a winding field leaves an anti-aligned seam on some
    # edge the spanning tree never traversed
    for ax in range(len(shape)):
        lo = tuple(slice(None) if a != ax else slice(0, -1) for a in range(len(shape)))
        hi = tuple(slice(None) if a != ax else slice(1, None) for a in range(len(shape)))
        both = aligned[lo] & aligned[hi]
        if np.any(both):
            dots = np.einsum("...c,...c->...", u[lo], u[hi])[both]
            if np.min(dots) < 0.25:
                raise AlignmentError(
                    f"anti-aligned seam after sign propagation (min dot={np.min(dots):.3f})"
                )
    return u


def sign_modded_l2(u, v, mask, grid: UniformGrid):
    """L2 distance min(|u-v|, |u+v|) over masked cells."""
    du = np.linalg.norm(u - v, axis=-1)
    su = np.linalg.norm(u + v, axis=-1)
    d = np.minimum(du, su)
    return float(np.sqrt(np.sum(d[mask] ** 2) * grid.cell_volume))


def director_compare(q, hm_state, interface, t, eps, grid: UniformGrid):
    """Sign-modded L2 distance between the state's director and a reference
    director field, over the enclosed region eroded by 2 eps."""
    d = interface.signed_distance(grid.cell_centers(), t)
    mask = d > 2 * eps
    if not np.any(mask):
        raise ExtinctionSignal("comparison region empty")
    u = extract_director(q, mask)
    return sign_modded_l2(u, hm_state.u, mask, grid)


def default_test_fields(d_a):
    """Deterministic basket of smooth vector test fields phi(x) with their
    spatial gradients, for the weak-form residual of the director flow."""
    e = np.eye(3)
    basket = []

    def poly(coeff_const, coeff_lin, vec):
        def phi(x):
            s = coeff_const + sum(c * x[..., k] for k, c in enumerate(coeff_lin[:d_a]))
            return s[..., None] * vec

        def dphi(x):
            shape = x.shape[:-1]
            g = np.zeros(shape + (d_a, 3))
            for k, c in enumerate(coeff_lin[:d_a]):
                g[..., k, :] = c * vec
            return g

        return phi, dphi

    specs = [
        (1.0, (0.0, 0.0), e[0]), (1.0, (0.0, 0.0), e[1]), (1.0, (0.0, 0.0), e[2]),
        (0.0, (1.0, 0.0), e[0]), (0.0, (0.0, 1.0), e[1]), (0.0, (1.0, 0.0), e[2]),
        (0.0, (0.0, 1.0), e[0]), (0.0, (1.0, 0.0), e[1]),
        (0.5, (1.0, -1.0), e[2]), (0.3, (-1.0, 1.0), e[0]),
    ]
    for c0, lin, vec in specs:
        basket.append(poly(c0, lin, vec))
    return basket


def weak_flow_residual(snapshots, grid: UniformGrid, test_fields=None):
    """Space-time weak-form residual of the sphere-valued heat flow.

    `snapshots` is a list of (t, u, mask); the time derivative uses central
    differences of sign-aligned consecutive directors, spatial wedge terms
    use mirrored central differences, and the residual of each test field
    is normalised by the product of the wedge-field and test-field norms.
    Returns (max_relative_residual, max_absolute_residual).
    """
    if test_fields is None:
        test_fields = default_test_fields(grid.d_a)
    if len(snapshots) < 3:
        raise ValueError("need at least three snapshots")
    x = grid.cell_centers()
    vol = grid.cell_volume
    n_fields = len(test_fields)
    residuals = np.zeros(n_fields)
    wedge_norm_sq = 0.0
    phi_norm_sq = np.zeros(n_fields)

    for k in range(1, len(snapshots) - 1):
        t_prev, u_prev, _ = snapshots[k - 1]
        t_k, u_k, mask = snapshots[k]
        t_next, u_next, mask_next = snapshots[k + 1]
        mask_k = mask & mask_next & snapshots[k - 1][2]
        if not np.any(mask_k):
            continue
        dt_w = 0.5 * (t_next - t_prev)
        sgn_p = np.where(np.einsum("...c,...c->...", u_prev, u_k) < 0, -1.0, 1.0)
        sgn_n = np.where(np.einsum("...c,...c->...", u_next, u_k) < 0, -1.0, 1.0)
        du_dt = (sgn_n[..., None] * u_next - sgn_p[..., None] * u_prev) / (t_next - t_prev)
        w_t = np.cross(du_dt, u_k)

        w_j = np.zeros(u_k.shape[:-1] + (grid.d_a, 3))
        for ax in range(grid.d_a):
            lo, hi = _mirrored_neighbors(u_k, mask_k, ax)
            dju = (hi - lo) / (2 * grid.h)
            w_j[..., ax, :] = np.cross(dju, u_k)

        m = mask_k
        wedge_norm_sq += dt_w * (np.sum(np.einsum("...c,...c->...", w_t, w_t)[m])
                                 + np.sum(np.einsum("...kc,...kc->...", w_j, w_j)[m])) * vol
        for i, (phi, dphi) in enumerate(test_fields):
            pv = phi(x)
            gv = dphi(x)
            term = np.einsum("...c,...c->...", w_t, pv)
            term = term + np.einsum("...kc,...kc->...", w_j, gv)
            residuals[i] += dt_w * float(np.sum(term[m])) * vol
            phi_norm_sq[i] += dt_w * (np.sum(np.einsum("...c,...c->...", pv, pv)[m])
                                      + np.sum(np.einsum("...kc,...kc->...", gv, gv)[m])) * vol

    wedge_norm = np.sqrt(wedge_norm_sq)
    phi_norm = np.sqrt(phi_norm_sq)
    denom = np.maximum(wedge_norm * phi_norm, 1e-300)
    rel = np.abs(residuals) / denom
    return float(np.max(rel)), float(np.max(np.abs(residuals)))


# ---------------------------------------------------------------------------
# Growth-rate report.


def gronwall_report(records, eps, ceiling=100.0):
    """Exponential-growth fit of the modulated energy over a run.

    Returns the smallest C with E(t) <= E(0) e^(C t) at every sample, and
    flags whether it stays below the ceiling and whether E/eps never
    exceeds five times its initial value (with an eps-level floor for
    exactly calibrated data).
    """
    if len(records) < 10:
        raise ValueError("need at least ten records")
    t = np.array([r.t for r in records])
    e = np.array([r.E_mod for r in records])
    floor = 1e-6 * eps
    e0 = max(e[0], floor)
    with np.errstate(divide="ignore"):
        rates = np.log(np.maximum(e[1:], floor) / e0) / t[1:]
    c_fit = float(max(0.0, np.max(rates)))
    ratio_ok = bool(np.all(np.maximum(e, floor) <= 5 * max(e[0], floor) + 1e-12))
    ok = (c_fit <= ceiling) and ratio_ok
    return {"C_fit": c_fit, "ok": ok, "ratio_ok": ratio_ok}


# ---------------------------------------------------------------------------
# Per-sample record and CSV output.


CSV_COLUMNS = [
    "t", "E_gl", "E_mod", "E_mod_over_eps", "dissipation_cum",
    "dissipation_residual", "R_fit", "R_exact", "max_abs_Q",
    "comm_grad_l2", "comm_time_l2", "bound_a", "bound_b", "bound_btilde",
    "bound_c", "bound_d", "stress_residual",
]


@dataclass
class DiagnosticsRecord:
    t: float
    E_gl: float
    E_mod: float
    E_mod_over_eps: float
    dissipation_cum: float
    dissipation_residual: float
    R_fit: float
    R_exact: float
    max_abs_Q: float
    comm_grad_l2: float
    comm_time_l2: float
    bound_a: float
    bound_b: float
    bound_btilde: float
    bound_c: float
    bound_d: float
    stress_residual: float
    E_mod_direct: float = float("nan")

    def csv_row(self):
        return [getattr(self, c) for c in CSV_COLUMNS]


def collect(field, aux, interface, eps, table, grid: UniformGrid,
            pot=DEFAULT_COEFFS, bc="dirichlet", level=None, e_gl0=None):
    """One full diagnostics sample of a running simulation."""
    t = field.t
    q = field.q
    suite = bound_suite(q, interface, t, eps, table, grid, pot, bc)
    parts = modulated_energy_parts(q, interface, t, eps, table, grid, pot, bc)
    comm_grad, comm_time = commutator_norms(q, aux["rhs"], grid, bc)
    stress = stress_divergence_residual(q, grid, eps, pot, bc)
    r_exact = float("nan")
    if interface is not None and t <= interface.t_valid:
        r_exact = interface.radius(t)
    r_fit = float("nan")
    if grid.d_a == 2 and level is not None:
        try:
            r_fit = interface_extract(q, grid, level).radius
        except ExtinctionSignal:
            r_fit = float("nan")
    diss = aux.get("dissipation_cum", 0.0)
    resid = float("nan")
    if e_gl0 is not None:
        resid = abs(parts["E_gl"] + diss - e_gl0)
    return DiagnosticsRecord(
        t=t, E_gl=parts["E_gl"], E_mod=parts["E_mod"],
        E_mod_over_eps=parts["E_mod"] / eps, dissipation_cum=diss,
        dissipation_residual=resid, R_fit=r_fit, R_exact=r_exact,
        max_abs_Q=aux.get("max_abs", float("nan")),
        comm_grad_l2=comm_grad, comm_time_l2=comm_time,
        bound_a=suite["ratios"]["a"], bound_b=suite["ratios"]["b"],
        bound_btilde=suite["ratios"]["btilde"], bound_c=suite["ratios"]["c"],
        bound_d=suite["ratios"]["d"], stress_residual=stress,
        E_mod_direct=parts["E_mod_direct"],
    )


def write_csv(path, records):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([repr(float(v)) for v in rec.csv_row()])


def read_csv(path):
    out = []
    with open(path) as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            vals = {k: float(row[k]) for k in CSV_COLUMNS}
            out.append(DiagnosticsRecord(**vals))
    return out
