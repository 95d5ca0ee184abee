"""Discrete energy minimizing maps into S^(p-1) by projected gradient descent.

The objective is the forward-difference Dirichlet energy

    E(u) = h^(n-2) * sum over axis-neighbor pairs |u_b - u_a|^2,

whose exact algebraic gradient is the lattice graph Laplacian, so plain
descent decreases it monotonically.  Interior nodes take a Jacobi sweep
u <- u + s * (discrete Laplacian of u), are re-projected to the sphere,
and the step is halved whenever a sweep fails to decrease the energy.
Boundary nodes are pinned bit-identically to the supplied data for the
whole run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadShape, ConfigError, NearZeroVector, StepCollapse
from .fields import (
    Ball,
    GridDomain,
    GridField,
    UNIT_SPHERE,
    field_integral,
    squared_gradient_norm,
)

#: backtracking gives up when the step drops below this times its start value
STEP_FLOOR = 1e-12


def project_to_sphere(v) -> np.ndarray:
    """v / |v|; raises ``NearZeroVector`` when |v| <= 1e-14.  Idempotent."""
    v = np.asarray(v, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm <= 1e-14:
        raise NearZeroVector("cannot project a near-zero vector to the sphere")
    return v / norm


def dirichlet_energy(u: GridField, region: Ball | None = None) -> float:
    """int |Du|^2 over a ball or the whole box, via the field-core calculus."""
    return field_integral(u, squared_gradient_norm(u), region)


@dataclass(frozen=True)
class BoundaryCondition:
    """Unit-vector data on every boundary node of a grid."""

    domain: GridDomain
    dim_p: int
    values: np.ndarray  # (*shape, p); only boundary entries are meaningful

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        expected = self.domain.shape + (self.dim_p,)
        if vals.shape != expected:
            raise BadShape(f"boundary values have shape {vals.shape}, expected {expected}")
        bmask = self.domain.boundary_mask
        bvals = vals[bmask]
        if not np.all(np.isfinite(bvals)):
            raise BadShape("non-finite boundary values")
        worst = float(np.max(np.abs(np.linalg.norm(bvals, axis=-1) - 1.0)))
        if worst > 1e-12:
            raise BadShape(f"boundary values off the unit sphere by {worst:.3e}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_map(cls, domain: GridDomain, f) -> "BoundaryCondition":
        """Sample a pointwise unit-vector map on the boundary nodes."""
        pts = domain.flat_nodes()
        out = np.asarray(f(pts), dtype=float)
        vals = np.zeros_like(out)
        bmask = domain.boundary_mask.reshape(-1)
        vals[bmask] = out[bmask]
        p = out.shape[1]
        return cls(domain=domain, dim_p=p, values=vals.reshape(domain.shape + (p,)))

    @classmethod
    def constant(cls, domain: GridDomain, direction) -> "BoundaryCondition":
        d = project_to_sphere(direction)
        vals = np.zeros(domain.shape + (len(d),))
        vals[domain.boundary_mask] = d
        return cls(domain=domain, dim_p=len(d), values=vals)


@dataclass(frozen=True)
class MinimizeParams:
    """Descent controls.

    ``step_size`` is in heat-flow units (update u + step * Laplacian(u));
    stability requires step * 4n/h^2 < 2, checked against the grid when the
    solve starts.  ``step_size=None`` picks h^2/(4n).  ``grad_tol`` bounds
    the max-norm of the tangential Jacobi displacement per unit step;
    ``energy_tol`` (if positive) stops on small relative energy decrease.
    """

    step_size: float | None = None
    max_iters: int = 20000
    energy_tol: float = 0.0
    grad_tol: float = 1e-7
    seed: int = 0
    random_init: bool = False

    def resolved_step(self, domain: GridDomain) -> float:
        h, n = domain.spacing, domain.dim_n
        s = self.step_size if self.step_size is not None else h * h / (4.0 * n)
        if s <= 0.0:
            raise ConfigError("step_size must be positive")
        if s * 4.0 * n / (h * h) >= 2.0:
            raise ConfigError(
                f"step_size {s} violates step * 4n/h^2 < 2 on this grid (h={h}, n={n})"
            )
        return s


@dataclass(frozen=True)
class MinimizeReport:
    final_energy: float
    energy_trace: tuple[float, ...]
    iterations: int
    converged: bool
    residual: float


def _fd_energy(vals: np.ndarray, h: float, n: int) -> float:
    total = 0.0
    for a in range(n):
        sl_lo = [slice(None)] * (n + 1)
        sl_hi = [slice(None)] * (n + 1)
        sl_lo[a] = slice(0, -1)
        sl_hi[a] = slice(1, None)
        d = vals[tuple(sl_hi)] - vals[tuple(sl_lo)]
        total += float(np.sum(d * d))
    return h ** (n - 2) * total


def _neighbor_sum(vals: np.ndarray, n: int) -> np.ndarray:
    """sum of the 2n axis neighbors; garbage on the outermost layer."""
    out = np.zeros_like(vals)
    for a in range(n):
        sl_in = [slice(None)] * (n + 1)
        sl_lo = [slice(None)] * (n + 1)
        sl_hi = [slice(None)] * (n + 1)
        sl_in[a] = slice(1, -1)
        sl_lo[a] = slice(0, -2)
        sl_hi[a] = slice(2, None)
        out[tuple(sl_in)] += vals[tuple(sl_lo)] + vals[tuple(sl_hi)]
    return out


def _core(n: int):
    return (slice(1, -1),) * n


def _normalize_rows(block: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(block, axis=-1, keepdims=True)
    tiny = norms[..., 0] <= 1e-14
    out = block / np.where(norms > 1e-14, norms, 1.0)
    if tiny.any():
        out[tiny] = fallback[tiny]
    return out


def _ray_boundary_init(domain: GridDomain, bc: BoundaryCondition) -> np.ndarray:
    """Pull boundary data radially toward the box center (nearest-node lookup)."""
    lo, hi = domain.box_low, domain.box_high
    c = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    pts = domain.flat_nodes()
    d = pts - c
    # center node (zero direction): send the ray along +x1
    degenerate = np.all(np.abs(d) < 1e-15, axis=1)
    d[degenerate, 0] = 1.0
    with np.errstate(divide="ignore"):
        t = np.min(np.where(np.abs(d) > 1e-300, half / np.abs(d), np.inf), axis=1)
    b = c + t[:, None] * d
    idx = np.clip(
        np.round((b - domain.origin) / domain.spacing).astype(int),
        0,
        np.asarray(domain.shape) - 1,
    )
    strides = np.ones(domain.dim_n, dtype=int)
    for a in range(domain.dim_n - 2, -1, -1):
        strides[a] = strides[a + 1] * domain.shape[a + 1]
    flat_bc = bc.values.reshape(-1, bc.dim_p)
    vals = flat_bc[idx @ strides]
    return vals.reshape(domain.shape + (bc.dim_p,))


def tangential_el_residual(u: GridField) -> float:
    """Max-norm over interior nodes of (Lap u + |Du|^2 u) projected tangentially.

    This is the Euler-Lagrange system of the energy under the sphere
    constraint; since |Du|^2 u is parallel to u, the tangential projection
    reduces to the tangential part of the stencil Laplacian.
    """
    dom = u.domain
    n, h = dom.dim_n, dom.spacing
    vals = u.values
    core = _core(n)
    nb = _neighbor_sum(vals, n)
    lap = (nb - 2.0 * n * vals) / (h * h)
    e2 = squared_gradient_norm(u)
    r = lap + e2[..., None] * vals
    radial = np.sum(r * vals, axis=-1, keepdims=True) * vals
    t = (r - radial)[core]
    return float(np.max(np.linalg.norm(t, axis=-1)))


def minimize_energy(
    domain: GridDomain,
    p: int,
    bc: BoundaryCondition,
    params: MinimizeParams | None = None,
    init: GridField | None = None,
) -> tuple[GridField, MinimizeReport]:
    """Minimize the discrete Dirichlet energy over sphere-valued fields.

    Boundary nodes never move; each sweep updates all interior nodes
    simultaneously from the previous iterate and re-projects to the sphere.
    Returns the final field and a report whose energy trace is
    non-increasing by construction.
    """
    params = params or MinimizeParams()
    if bc.domain is not domain and not bc.domain.same_lattice(domain):
        raise BadShape("boundary condition grid does not match the solve grid")
    if bc.dim_p != p:
        raise BadShape(f"boundary condition has p={bc.dim_p}, expected {p}")
    n, h = domain.dim_n, domain.spacing
    step0 = params.resolved_step(domain)
    bmask = domain.boundary_mask

    if init is not None:
        if not init.domain.same_lattice(domain) or init.dim_p != p:
            raise BadShape("init field does not match the solve grid")
        if init.mask is not None and init.mask.count:
            raise BadShape("init field must be unmasked")
        dev = np.max(np.linalg.norm(init.values[bmask] - bc.values[bmask], axis=-1))
        if dev > 1e-12:
            raise BadShape(f"init disagrees with the boundary data by {dev:.3e}")
        vals = init.values.copy()
    elif params.random_init:
        rng = np.random.default_rng(params.seed)
        vals = rng.standard_normal(domain.shape + (p,))
        vals = _normalize_rows(vals, np.zeros_like(vals))
    else:
        vals = _ray_boundary_init(domain, bc)
    vals[bmask] = bc.values[bmask]

    core = _core(n)
    step = step0
    energy = _fd_energy(vals, h, n)
    trace = [energy]
    converged = False
    iterations = 0

    for it in range(params.max_iters):
        nb = _neighbor_sum(vals, n)
        lap_core = nb[core] - 2.0 * n * vals[core]

        # projected-gradient stop criterion: tangential Jacobi displacement
        radial = np.sum(lap_core * vals[core], axis=-1, keepdims=True) * vals[core]
        gmax = float(np.max(np.linalg.norm(lap_core - radial, axis=-1))) / (2.0 * n)
        if gmax <= params.grad_tol:
            converged = True
            break

        accepted = False
        while True:
            cand = vals.copy()
            cand[core] = _normalize_rows(
                vals[core] + (step / (h * h)) * lap_core, vals[core]
            )
            e_new = _fd_energy(cand, h, n)
            if e_new <= energy:
                accepted = True
                break
            step *= 0.5
            if step < STEP_FLOOR * step0:
                raise StepCollapse(
                    f"backtracking collapsed the step below {STEP_FLOOR} of its start"
                )
        if accepted:
            decrease = energy - e_new
            vals = cand
            energy = e_new
            trace.append(energy)
            iterations = it + 1
            if params.energy_tol > 0.0 and decrease <= params.energy_tol * max(
                abs(energy), 1e-300
            ):
                converged = True
                break

    out = GridField(domain=domain, dim_p=p, values=vals, constraint=UNIT_SPHERE)
    report = MinimizeReport(
        final_energy=energy,
        energy_trace=tuple(trace),
        iterations=iterations,
        converged=converged,
        residual=tangential_el_residual(out),
    )
    return out, report
