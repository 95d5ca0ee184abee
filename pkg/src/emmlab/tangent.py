"""Blow-up rescaling, tangent-map extraction, homogeneity, and symmetry.

Rescaling u around y by rho produces u_{y,rho}(x) = u(y + rho x) on a unit
box grid.  A tangent candidate is the last member of a decreasing rho
ladder whose successive rescalings become Sobolev-Cauchy; homogeneity of
degree zero is scored by the weighted radial-derivative integral, and the
symmetry subspace is recovered from translation-invariance scores over a
refined direction design.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import MIN_RADIUS_CELLS, density_estimate, scaled_energy
from .errors import BadShape, RescaleOutOfDomain
from .fields import (
    Annulus,
    ExclusionMask,
    GridDomain,
    GridField,
    UNIT_SPHERE,
    integrate,
    interpolate,
    make_grid,
    radial_derivative_sq,
    squared_gradient_norm,
)
from .analysis import sobolev_norm

#: rescaling ladders may not go below this many source cells
MIN_RHO_CELLS = 8.0


@dataclass(frozen=True)
class TangentCandidate:
    """A rescaled-limit field on the unit box plus its convergence evidence."""

    phi: GridField
    base_point: np.ndarray
    rho_sequence: tuple[float, ...]
    cauchy_gaps: tuple[float, ...]
    homogeneity_defect: float
    theta_at_origin: float
    converged: bool


@dataclass(frozen=True)
class SymmetrySubspace:
    """Estimated S(phi): directions along which phi is translation invariant."""

    basis: np.ndarray  # (dim, n), orthonormal rows; empty (0, n) when dim = 0
    dim: int
    membership_scores: tuple[float, ...]  # per design direction, pre-refinement


def unit_box_grid(dim_n: int, nodes_per_axis: int = 40) -> GridDomain:
    """The standard output grid on [-1, 1]^n (even counts keep 0 off-node)."""
    return make_grid([-1.0] * dim_n, [1.0] * dim_n, [nodes_per_axis] * dim_n)


def rescale(u: GridField, y, rho: float, out_grid: GridDomain) -> GridField:
    """u_{y,rho}(x) = u(y + rho x) sampled on ``out_grid``.

    Values come from multilinear interpolation and are re-projected to the
    sphere for constrained fields; output nodes whose interpolation stencil
    touches masked source nodes are masked in turn.
    """
    if out_grid.dim_n != u.domain.dim_n:
        raise BadShape("output grid dimension must match the source field")
    y = np.asarray(y, dtype=float).reshape(-1)
    if rho <= 0.0:
        raise BadShape("rho must be positive")
    lo = y + rho * out_grid.box_low
    hi = y + rho * out_grid.box_high
    if np.any(lo < u.domain.box_low - 1e-12) or np.any(hi > u.domain.box_high + 1e-12):
        raise RescaleOutOfDomain(
            f"window y + {rho} * out_box = [{lo.tolist()}, {hi.tolist()}] leaves the grid"
        )
    queries = y + rho * out_grid.flat_nodes()
    vals, valid = interpolate(u, queries)
    vals = vals.copy()
    vals[~valid] = 0.0
    mask = None
    if not valid.all():
        mask = ExclusionMask(~valid.reshape(out_grid.shape))
    return GridField(
        domain=out_grid,
        dim_p=u.dim_p,
        values=vals.reshape(out_grid.shape + (u.dim_p,)),
        constraint=u.constraint,
        mask=mask,
    )


def _difference_field(a: GridField, b: GridField, extra_excluded: np.ndarray) -> GridField:
    excl = a.excluded | b.excluded | extra_excluded
    vals = np.where(excl[..., None], 0.0, a.values - b.values)
    mask = ExclusionMask(excl) if excl.any() else None
    return GridField(
        domain=a.domain, dim_p=a.dim_p, values=vals, constraint="unconstrained", mask=mask
    )


def extract_tangent(
    u: GridField,
    y,
    rho_sequence,
    out_grid: GridDomain | None = None,
    gap_tol: float = 0.1,
    min_rho_cells: float = MIN_RHO_CELLS,
) -> TangentCandidate:
    """Drive the rescaling ladder and package the last rung as a candidate.

    Cauchy gaps are Sobolev distances between consecutive rescalings,
    measured away from the blow-up core |x| < 4 h_src / min(rho): below
    that radius the source lattice cannot resolve the rescaled field, and
    including it would swamp the gaps with core noise.  Extraction is
    marked converged iff the gaps are nonincreasing and the last one is
    below ``gap_tol``; a failed criterion is reported, not raised.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    rhos = [float(r) for r in rho_sequence]
    if len(rhos) < 2 or any(b >= a for a, b in zip(rhos, rhos[1:])):
        raise BadShape("rho_sequence must be strictly decreasing with >= 2 entries")
    h_src = u.domain.spacing
    if rhos[-1] < min_rho_cells * h_src * (1.0 - 1e-12):
        raise BadShape(
            f"smallest rho {rhos[-1]} is below the floor {min_rho_cells} * h = "
            f"{min_rho_cells * h_src}"
        )
    if out_grid is None:
        out_grid = unit_box_grid(u.domain.dim_n)

    rescalings = [rescale(u, y, r, out_grid) for r in rhos]

    core_radius = 4.0 * h_src / rhos[-1]
    core = out_grid.distance_sq(np.zeros(out_grid.dim_n)) < core_radius**2
    gaps = []
    for a, b in zip(rescalings, rescalings[1:]):
        gaps.append(sobolev_norm(_difference_field(b, a, core)))

    decreasing = all(
        g2 <= g1 * (1.0 + 1e-9) + 1e-12 for g1, g2 in zip(gaps, gaps[1:])
    )
    converged = decreasing and gaps[-1] < gap_tol

    phi = rescalings[-1]
    theta = scaled_energy(phi, np.zeros(out_grid.dim_n), 0.5)
    return TangentCandidate(
        phi=phi,
        base_point=y,
        rho_sequence=tuple(rhos),
        cauchy_gaps=tuple(gaps),
        homogeneity_defect=homogeneity_defect(phi),
        theta_at_origin=theta,
        converged=converged,
    )


def homogeneity_defect(phi: GridField) -> float:
    """2 * int_{B_1 \\ B_tau} R^(2-n) |dphi/dR|^2 with tau = 4h.

    Zero (to quadrature tolerance) exactly when phi is degree-zero
    homogeneous on the sampled rays; always nonnegative.
    """
    dom = phi.domain
    n = dom.dim_n
    tau = 4.0 * dom.spacing
    if tau >= 1.0:
        raise BadShape("grid too coarse: 4h >= 1 leaves no annulus in the unit ball")
    origin = np.zeros(n)
    rad_sq = radial_derivative_sq(phi, origin)
    r2 = dom.distance_sq(origin)
    with np.errstate(divide="ignore"):
        weight = np.where(r2 > 0.0, r2 ** (0.5 * (2 - n)), 0.0)
    return 2.0 * integrate(dom, weight * rad_sq, Annulus(origin, tau, 1.0), phi.mask)


# -- symmetry subspace -------------------------------------------------------


def _direction_design(n: int, count: int) -> np.ndarray:
    """Deterministic antipodally symmetrized direction set on S^(n-1)."""
    m = max(1, count // 2)
    if n == 1:
        half = np.array([[1.0]])
    elif n == 2:
        ang = np.pi * np.arange(m) / m
        half = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    elif n == 3:
        k = np.arange(m)
        z = (k + 0.5) / m  # upper hemisphere
        r = np.sqrt(np.clip(1.0 - z * z, 0.0, 1.0))
        golden = np.pi * (3.0 - np.sqrt(5.0))
        ang = golden * k
        half = np.stack([r * np.cos(ang), r * np.sin(ang), z], axis=1)
    else:
        raise BadShape("direction designs implemented for n <= 3")
    return np.concatenate([half, -half], axis=0)


def _probe_lattice(phi: GridField, limit: int = 400) -> np.ndarray:
    """Unmasked nodes inside B_(1/2), deterministically subsampled."""
    dom = phi.domain
    inside = (dom.distance_sq(np.zeros(dom.dim_n)) < 0.25) & ~phi.excluded
    pts = dom.flat_nodes()[inside.reshape(-1)]
    if len(pts) > limit:
        stride = int(np.ceil(len(pts) / limit))
        pts = pts[::stride]
    return pts


def _translation_score(phi: GridField, probes: np.ndarray, v: np.ndarray, t_ladder) -> float:
    """sup over probes and shifts of |phi(x + t v) - phi(x)|."""
    base_vals, base_ok = interpolate(phi, probes)
    worst = 0.0
    any_valid = False
    for t in t_ladder:
        vals, ok = interpolate(phi, probes + t * v)
        good = ok & base_ok
        if good.any():
            any_valid = True
            diff = np.linalg.norm(vals[good] - base_vals[good], axis=1)
            worst = max(worst, float(diff.max()))
    return worst if any_valid else np.inf


def _complement_basis(v: np.ndarray) -> np.ndarray:
    n = len(v)
    mat = np.concatenate([v[:, None], np.eye(n)], axis=1)
    q, _ = np.linalg.qr(mat)
    return q[:, 1:n].T  # (n-1, n) rows orthonormal to v


def _refine_direction(phi, probes, v, t_ladder, steps=(0.3, 0.15, 0.08, 0.04, 0.02, 0.01)):
    """Greedy local minimization of the translation score over the sphere."""
    best_v = v / np.linalg.norm(v)
    best = _translation_score(phi, probes, best_v, t_ladder)
    for delta in steps:
        improved = True
        while improved:
            improved = False
            for w in _complement_basis(best_v):
                for s in (+1.0, -1.0):
                    cand = best_v + s * delta * w
                    cand = cand / np.linalg.norm(cand)
                    sc = _translation_score(phi, probes, cand, t_ladder)
                    if sc < best - 1e-15:
                        best, best_v, improved = sc, cand, True
    return best_v, best


def estimate_symmetry_subspace(
    phi: GridField,
    theta_tol: float = 0.05,
    probe_count: int = 64,
) -> SymmetrySubspace:
    """Estimate the translation-invariance subspace of a homogeneous field.

    Directions from an antipodally symmetrized design are scored by
    sup_x |phi(x + t v) - phi(x)| over a probe lattice in B_(1/2); the most
    promising ones are refined by local search so invariant axes that fall
    between design points are still found.  Refined directions scoring
    below ``theta_tol`` span the estimate; their orthonormal basis and rank
    come from an SVD with a relative singular-value cutoff.
    """
    dom = phi.domain
    n = dom.dim_n
    design = _direction_design(n, probe_count)
    probes = _probe_lattice(phi)
    if len(probes) == 0:
        raise BadShape("no unmasked probe points inside B_(1/2)")
    t_ladder = (-0.25, -0.125, 0.125, 0.25)

    scores = np.array(
        [_translation_score(phi, probes, v, t_ladder) for v in design]
    )

    finite = np.isfinite(scores)
    if not finite.any():
        raise BadShape("no direction produced valid translation probes")
    cut = max(10.0 * theta_tol, 1.5 * float(scores[finite].min()))
    candidates = [i for i in np.argsort(scores) if scores[i] <= cut][: max(8, 2 * n + 2)]

    accepted = []
    for i in candidates:
        v, sc = _refine_direction(phi, probes, design[i], t_ladder)
        if sc < theta_tol:
            accepted.append(v)
    # every direction passing without refinement is kept too (constant maps)
    for i in np.nonzero(scores < theta_tol)[0]:
        accepted.append(design[i])

    if not accepted:
        basis = np.zeros((0, n))
        dim = 0
    else:
        mat = np.stack(accepted, axis=0)
        _, svals, vt = np.linalg.svd(mat, full_matrices=False)
        dim = int(np.sum(svals > 0.25 * svals[0]))
        basis = vt[:dim]
    return SymmetrySubspace(
        basis=basis, dim=dim, membership_scores=tuple(float(s) for s in scores)
    )


def density_max_check(
    phi: GridField,
    probe_points,
    ladder=None,
    min_radius_cells: float = MIN_RADIUS_CELLS,
) -> float:
    """max over probes of theta(y) - theta(0) for a homogeneous field.

    The density of a degree-zero homogeneous map attains its maximum at the
    origin, so the return value should not exceed the discretization
    tolerance.  All thetas use one common ladder (default: geometric from
    0.4 down to the 4h floor).
    """
    dom = phi.domain
    h = dom.spacing
    if ladder is None:
        ladder = []
        r = 0.4
        while r >= min_radius_cells * h * (1.0 - 1e-12) and len(ladder) < 4:
            ladder.append(r)
            r *= 0.5
        if not ladder:
            raise BadShape("grid too coarse for the default density ladder")
    theta0 = density_estimate(
        phi, np.zeros(dom.dim_n), ladder, min_radius_cells=min_radius_cells
    ).theta_estimate
    worst = -np.inf
    for y in probe_points:
        t = density_estimate(phi, y, ladder, min_radius_cells=min_radius_cells).theta_estimate
        worst = max(worst, t - theta0)
    return float(worst)
