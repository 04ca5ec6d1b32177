"""Explicit time integration of the tensor relaxation flow on a uniform grid.

The flow is dQ/dt = Lap Q - grad F(Q)/eps^2 with homogeneous Dirichlet data
(zero ghost layer); a periodic mode exists for translation-invariant test
problems.  The time step obeys dt = safety * min(h^2/(4 d), eps^2/Lambda)
with Lambda a sampled bound on the potential Hessian, so both the diffusive
and the stiff reaction scales are resolved.

A companion integrator advances a unit director field by the sphere-valued
heat flow on a shrinking masked region, with mirror ghosts across the mask
boundary (discrete zero-flux condition) and per-step renormalisation.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import qtensor
from .potential import DEFAULT_COEFFS, PotentialCoefficients, bulk_gradient, hessian_bound

try:
    import numba
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    _HAVE_NUMBA = False


class StabilityError(RuntimeError):
    """Raised when the state leaves the finite range (blow-up report)."""


class DomainExhausted(RuntimeError):
    """Raised when the shrinking mask of the director flow becomes empty."""


@dataclass(frozen=True)
class UniformGrid:
    """Cell-centred uniform grid on [-L, L]^d with even cell counts.

    Cell centres sit at -L + (i + 1/2) h; an even count keeps the domain
    centre off the cell centres, away from the projection singularity of
    radial interfaces.
    """

    d_a: int
    half_width: float
    n: int

    def __post_init__(self):
        if self.d_a not in (1, 2, 3):
            raise ValueError("grid dimension must be 1, 2 or 3")
        if self.n < 4 or self.n % 2:
            raise ValueError("cells per axis must be even and at least 4")

    @property
    def h(self) -> float:
        return 2 * self.half_width / self.n

    @property
    def shape(self):
        return (self.n,) * self.d_a

    def axis(self):
        return -self.half_width + (np.arange(self.n) + 0.5) * self.h

    def cell_centers(self):
        """Array of cell-centre coordinates, shape (*shape, d_a)."""
        axes = np.meshgrid(*([self.axis()] * self.d_a), indexing="ij")
        return np.stack(axes, axis=-1)

    @property
    def cell_volume(self) -> float:
        return self.h**self.d_a


@dataclass
class TensorField:
    """Coefficient field (one 5-vector per cell) with its time stamp."""

    grid: UniformGrid
    q: np.ndarray
    t: float = 0.0

    def copy(self):
        return TensorField(self.grid, self.q.copy(), self.t)

    def max_abs(self) -> float:
        return float(np.sqrt(np.max(np.einsum("...c,...c->...", self.q, self.q))))


def _pad_state(q, d_a, bc, buf=None):
    """State with a one-cell ghost layer: zeros (Dirichlet) or wrapped.

    A caller-owned buffer avoids reallocating on the hot path; Dirichlet
    ghosts are written once (they stay zero) and only the core is refreshed.
    """
    shape = tuple(n + 2 for n in q.shape[:-1]) + (5,)
    fresh = buf is None or buf.shape != shape
    if fresh:
        buf = np.zeros(shape)
    core = (slice(1, -1),) * d_a
    buf[core] = q
    if bc == "periodic":
        # corners are never read by the 5-point stencil, so wrapping the
        # core-aligned slabs per axis is enough
        for ax in range(d_a):
            def slab(idx):
                return tuple(slice(1, -1) if a != ax else idx for a in range(d_a))
            buf[slab(0)] = buf[slab(-2)]
            buf[slab(-1)] = buf[slab(1)]
    elif bc != "dirichlet":
        raise ValueError(f"unknown boundary condition {bc!r}")
    return buf


def laplacian(q, grid: UniformGrid, bc="dirichlet", workspace=None):
    """Second-order 5-point Laplacian; neighbour pairs are summed first so
    the stencil is exactly equivariant under lattice rotations."""
    buf = None if workspace is None else workspace.get("pad")
    p = _pad_state(q, grid.d_a, bc, buf)
    if workspace is not None:
        workspace["pad"] = p
    d = grid.d_a
    core = (slice(1, -1),) * d
    acc = np.empty_like(q)
    for ax in range(d):
        lo = tuple(slice(1, -1) if a != ax else slice(0, -2) for a in range(d))
        hi = tuple(slice(1, -1) if a != ax else slice(2, None) for a in range(d))
        if ax == 0:
            np.add(p[lo], p[hi], out=acc)
        else:
            acc += p[lo]
            acc += p[hi]
    acc -= (2 * d) * p[core]
    acc /= grid.h**2
    return acc


if _HAVE_NUMBA:

    @numba.njit(inline="always", cache=True)
    def _grad_cell(q, basis, a, b, c, m, g):
        tr2 = 0.0
        for k in range(5):
            tr2 += q[k] * q[k]
        for i in range(3):
            for j in range(3):
                acc = 0.0
                for k in range(5):
                    acc += q[k] * basis[k, i, j]
                m[i, j] = acc
        lin = a + c * tr2
        for k in range(5):
            acc = 0.0
            for i in range(3):
                for j in range(3):
                    m2 = m[i, 0] * m[0, j] + m[i, 1] * m[1, j] + m[i, 2] * m[2, j]
                    acc -= b * m2 * basis[k, i, j]
            g[k] = acc + lin * q[k]

    @numba.njit(cache=True)
    def _rhs_2d(p, basis, h2inv, inv_eps2, a, b, c, out):
        n0 = out.shape[0]
        n1 = out.shape[1]
        for i in range(n0):
            g = np.empty(5)
            m = np.empty((3, 3))
            for j in range(n1):
                cell = p[i + 1, j + 1]
                _grad_cell(cell, basis, a, b, c, m, g)
                for k in range(5):
                    lap = (p[i, j + 1, k] + p[i + 2, j + 1, k] + p[i + 1, j, k]
                           + p[i + 1, j + 2, k] - 4.0 * cell[k]) * h2inv
                    out[i, j, k] = lap - inv_eps2 * g[k]

    @numba.njit(cache=True)
    def _rhs_1d(p, basis, h2inv, inv_eps2, a, b, c, out):
        n0 = out.shape[0]
        for i in range(n0):
            g = np.empty(5)
            m = np.empty((3, 3))
            cell = p[i + 1]
            _grad_cell(cell, basis, a, b, c, m, g)
            for k in range(5):
                lap = (p[i, k] + p[i + 2, k] - 2.0 * cell[k]) * h2inv
                out[i, k] = lap - inv_eps2 * g[k]

    @numba.njit(cache=True)
    def _rhs_3d(p, basis, h2inv, inv_eps2, a, b, c, out):
        n0, n1, n2 = out.shape[0], out.shape[1], out.shape[2]
        for i in range(n0):
            g = np.empty(5)
            m = np.empty((3, 3))
            for j in range(n1):
                for l in range(n2):
                    cell = p[i + 1, j + 1, l + 1]
                    _grad_cell(cell, basis, a, b, c, m, g)
                    for k in range(5):
                        lap = (p[i, j + 1, l + 1, k] + p[i + 2, j + 1, l + 1, k]
                               + p[i + 1, j, l + 1, k] + p[i + 1, j + 2, l + 1, k]
                               + p[i + 1, j + 1, l, k] + p[i + 1, j + 1, l + 2, k]
                               - 6.0 * cell[k]) * h2inv
                        out[i, j, l, k] = lap - inv_eps2 * g[k]

    @numba.njit(cache=True)
    def _axpy_flush_kernel(q, k, coef, floor):
        for i in range(q.shape[0]):
            v = q[i] + coef * k[i]
            if abs(v) < floor:
                v = 0.0
            q[i] = v

    _RHS_KERNELS = {1: _rhs_1d, 2: _rhs_2d, 3: _rhs_3d}


def ld_rhs(q, grid: UniformGrid, eps: float, pot: PotentialCoefficients = DEFAULT_COEFFS,
           bc="dirichlet", workspace=None):
    """Right-hand side Lap Q - grad F(Q)/eps^2.

    Uses a fused compiled kernel when numba is importable (the pure-numpy
    path computes the same stencil and gradient and serves as its oracle in
    the test suite).
    """
    if _HAVE_NUMBA:
        buf = None if workspace is None else workspace.get("pad")
        p = _pad_state(q, grid.d_a, bc, buf)
        if workspace is not None:
            workspace["pad"] = p
        out = np.empty_like(q)
        _RHS_KERNELS[grid.d_a](p, qtensor.BASIS, 1.0 / grid.h**2, 1.0 / eps**2,
                               pot.a, pot.b, pot.c, out)
        return out
    return ld_rhs_reference(q, grid, eps, pot, bc, workspace)


def ld_rhs_reference(q, grid: UniformGrid, eps: float,
                     pot: PotentialCoefficients = DEFAULT_COEFFS,
                     bc="dirichlet", workspace=None):
    """Vectorised numpy evaluation of the same right-hand side."""
    out = laplacian(q, grid, bc, workspace)
    grad = bulk_gradient(q, pot)
    grad /= eps**2
    out -= grad
    return out


def _sq_l2(arr):
    flat = arr.reshape(-1)
    return float(flat @ flat)


# Magnitudes this far below every physical scale are flushed to exact zero
# after each update: the exponentially decaying exterior tail would otherwise
# drift through the denormal range and stall the arithmetic.
STATE_FLOOR = 1e-100


def _flush_tiny(q):
    np.copyto(q, 0.0, where=np.abs(q) < STATE_FLOOR)


def _axpy_flush(q, k, coef):
    """q += coef * k followed by the sub-floor flush, in one pass if compiled."""
    if _HAVE_NUMBA:
        _axpy_flush_kernel(q.reshape(-1), k.reshape(-1), coef, STATE_FLOOR)
    else:
        q += coef * k
        _flush_tiny(q)


@dataclass
class SolverConfig:
    eps: float
    scheme: str = "explicit-euler"
    safety: float = 0.25
    t_end: float = 0.01
    snapshot_every: float = 0.001
    bc: str = "dirichlet"
    pot: PotentialCoefficients = dc_field(default_factory=PotentialCoefficients)
    lambda_bound: float | None = None
    c0: float = 2.6

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if not (0 < self.safety <= 1):
            raise ValueError("safety factor must lie in (0, 1]")
        if self.scheme not in ("explicit-euler", "rk2"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.snapshot_every <= 0 or self.t_end < 0:
            raise ValueError("t_end and snapshot cadence must be positive")

    def stable_dt(self, grid: UniformGrid) -> float:
        if self.lambda_bound is None:
            self.lambda_bound = hessian_bound(self.pot, c0=self.c0)
        return min(grid.h**2 / (4 * grid.d_a), self.eps**2 / self.lambda_bound)

    def dt(self, grid: UniformGrid) -> float:
        return self.safety * self.stable_dt(grid)


def step(field: TensorField, dt: float, config: SolverConfig, workspace=None):
    """One explicit update; returns the dissipation-rate estimate used by
    the cumulative energy identity."""
    grid = field.grid
    k1 = ld_rhs(field.q, grid, config.eps, config.pot, config.bc, workspace)
    rate1 = config.eps * _sq_l2(k1) * grid.cell_volume
    if config.scheme == "explicit-euler":
        _axpy_flush(field.q, k1, dt)
        rate = rate1
    else:
        mid = field.q.copy()
        _axpy_flush(mid, k1, dt)
        k2 = ld_rhs(mid, grid, config.eps, config.pot, config.bc, workspace)
        _axpy_flush(field.q, k1, 0.5 * dt)
        _axpy_flush(field.q, k2, 0.5 * dt)
        rate2 = config.eps * _sq_l2(k2) * grid.cell_volume
        rate = 0.5 * (rate1 + rate2)
    field.t += dt
    return rate


@dataclass
class RunSummary:
    steps: int = 0
    dissipation_cum: float = 0.0
    max_abs_run: float = 0.0
    dt: float = 0.0


def run(field: TensorField, config: SolverConfig, callback=None, warn=None):
    """Advance to t_end, invoking `callback(field, aux)` at every sample time.

    Sample times are the integer multiples of the snapshot cadence from 0 to
    t_end; the step is shrunk to land on them exactly, which keeps reruns
    bit-identical for a given configuration.  The state is checked for
    finiteness and for maximum-modulus growth at each sample.
    """
    grid = field.grid
    cadence = config.snapshot_every
    n_samples = int(np.floor(config.t_end / cadence + 1e-9))
    dt_target = config.dt(grid)
    per_sample = max(1, int(np.ceil(cadence / dt_target - 1e-12)))
    dt = cadence / per_sample

    summary = RunSummary(dt=dt)
    workspace = {}
    initial_sup = field.max_abs()
    summary.max_abs_run = initial_sup

    def sample(k):
        if not np.all(np.isfinite(field.q)):
            raise StabilityError(
                f"non-finite state at t={field.t:.6g} (step {summary.steps}, dt={dt:.3g})"
            )
        sup = field.max_abs()
        summary.max_abs_run = max(summary.max_abs_run, sup)
        if sup > initial_sup + 1e-3 and warn is not None:
            warn(f"maximum modulus grew: {sup:.6f} > initial {initial_sup:.6f}")
        if callback is not None:
            rhs = ld_rhs(field.q, grid, config.eps, config.pot, config.bc)
            callback(field, {
                "rhs": rhs,
                "dissipation_cum": summary.dissipation_cum,
                "max_abs": sup,
                "sample_index": k,
            })

    sample(0)
    for k in range(1, n_samples + 1):
        for _ in range(per_sample):
            summary.dissipation_cum += dt * step(field, dt, config, workspace)
            summary.steps += 1
        field.t = k * cadence
        sample(k)
    return summary


# ----------------------------------------------------------------------------
# Sphere-valued heat flow of the director on a (possibly shrinking) mask.


@dataclass
class DirectorField:
    """Unit vectors on the masked cells of a grid."""

    grid: UniformGrid
    u: np.ndarray
    mask: np.ndarray
    t: float = 0.0

    def copy(self):
        return DirectorField(self.grid, self.u.copy(), self.mask.copy(), self.t)


def hm_mask(grid: UniformGrid, interface, t: float, band: float | None = None):
    """Cells of the enclosed region eroded by one band (default one cell)."""
    if band is None:
        band = grid.h
    d = interface.signed_distance(grid.cell_centers(), t)
    return d >= band


def _mirrored_neighbors(u, mask, axis):
    """Neighbour values along an axis with mirror ghosts where the stencil
    leaves the mask or the domain (zero normal derivative)."""
    lo = np.roll(u, 1, axis=axis)
    hi = np.roll(u, -1, axis=axis)
    mlo = np.roll(mask, 1, axis=axis)
    mhi = np.roll(mask, -1, axis=axis)
    edge_lo = np.zeros_like(mask)
    edge_hi = np.zeros_like(mask)
    sl_first = tuple(slice(None) if a != axis else 0 for a in range(mask.ndim))
    sl_last = tuple(slice(None) if a != axis else -1 for a in range(mask.ndim))
    edge_lo[sl_first] = True
    edge_hi[sl_last] = True
    use_lo = mlo & ~edge_lo
    use_hi = mhi & ~edge_hi
    lo = np.where(use_lo[..., None], lo, u)
    hi = np.where(use_hi[..., None], hi, u)
    return lo, hi


def hm_rhs(state: DirectorField, bc="masked"):
    """Heat-flow right-hand side Lap u + |grad u|^2 u on the masked cells.

    In "periodic" mode the mask is ignored and the stencil wraps, which is
    the configuration used for the exact in-plane heat-kernel test.
    """
    grid = state.grid
    u, mask = state.u, state.mask
    h2 = grid.h**2
    lap = np.zeros_like(u)
    grad2 = np.zeros(u.shape[:-1])
    for ax in range(grid.d_a):
        if bc == "periodic":
            lo = np.roll(u, 1, axis=ax)
            hi = np.roll(u, -1, axis=ax)
        else:
            lo, hi = _mirrored_neighbors(u, mask, ax)
        lap += (lo + hi - 2 * u) / h2
        diff = (hi - lo) / (2 * grid.h)
        grad2 += np.einsum("...c,...c->...", diff, diff)
    return lap + grad2[..., None] * u


def hm_step(state: DirectorField, dt: float, interface=None, t_new: float | None = None,
            bc="masked"):
    """One explicit step followed by renormalisation and mask update."""
    rhs = hm_rhs(state, bc)
    if bc == "periodic":
        state.u = state.u + dt * rhs
    else:
        state.u = np.where(state.mask[..., None], state.u + dt * rhs, state.u)
    nrm = np.linalg.norm(state.u, axis=-1, keepdims=True)
    state.u = state.u / np.maximum(nrm, 1e-300)
    state.t = state.t + dt if t_new is None else t_new
    if interface is not None and bc != "periodic":
        state.mask = hm_mask(state.grid, interface, state.t)
        if not np.any(state.mask):
            raise DomainExhausted("director-flow mask is empty")
    return state


# ----------------------------------------------------------------------------
# Snapshot and visualisation output.


def save_snapshot(path, field: TensorField, eps: float):
    """Versioned text snapshot: header then one line of 5 coefficients per cell."""
    grid = field.grid
    dims = " ".join(str(n) for n in grid.shape)
    with open(path, "w") as fh:
        fh.write(f"QMCF1 {grid.d_a} {dims} {grid.h!r} {field.t!r} {eps!r}\n")
        flat = field.q.reshape(-1, 5)
        for row in flat:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def load_snapshot(path):
    """Read a snapshot; returns (TensorField, eps)."""
    with open(path) as fh:
        head = fh.readline().split()
        if head[0] != "QMCF1":
            raise ValueError(f"{path}: not a version-1 snapshot")
        d_a = int(head[1])
        dims = tuple(int(x) for x in head[2:2 + d_a])
        h, t, eps = (float(x) for x in head[2 + d_a:5 + d_a])
        q = np.loadtxt(fh, dtype=float).reshape(dims + (5,))
    grid = UniformGrid(d_a, h * dims[0] / 2, dims[0])
    return TensorField(grid, q, t), eps


def save_vtk_scalar(path, grid: UniformGrid, values, name="s"):
    """Legacy-VTK structured-points export of a scalar cell field."""
    dims = list(grid.shape) + [1] * (3 - grid.d_a)
    origin = [-grid.half_width + grid.h / 2] * grid.d_a + [0.0] * (3 - grid.d_a)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("qmcf scalar field\nASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {dims[0]} {dims[1]} {dims[2]}\n")
        fh.write(f"ORIGIN {origin[0]} {origin[1]} {origin[2]}\n")
        fh.write(f"SPACING {grid.h} {grid.h} {grid.h}\n")
        fh.write(f"POINT_DATA {int(np.prod(dims))}\n")
        fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
        flat = np.asarray(values).reshape(grid.shape).T.reshape(-1)
        for v in flat:
            fh.write(f"{float(v)!r}\n")
