"""Uniform grids, lattice fields, balls, and midpoint-rule calculus.

The carrier type of every computation in the laboratory is a map sampled on
a uniform node-centered lattice over an axis-aligned box.  This module owns

  * ``GridDomain``   -- the lattice: node(i) = origin + h * i,
  * ``GridField``    -- values in R^p at every node, optionally constrained
                        to the unit sphere S^(p-1) and optionally masked,
  * ``Ball`` / ``Annulus`` -- integration regions,
  * finite differences (``gradient``), region integration (``integrate``),
    and multilinear interpolation (``interpolate``).

Conventions fixed here and relied on everywhere else:

  * integration is the midpoint rule: h^n per unmasked node whose
    coordinates lie strictly inside the region, summed in row-major order;
  * differences are central at interior nodes and one-sided (second order
    where two clean neighbors exist, first order otherwise) at boundary or
    mask-adjacent nodes, so affine fields differentiate exactly;
  * masked nodes contribute nothing to integrals and are never
    differentiated through.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    AllNeighborsMasked,
    BadShape,
    BallOutsideDomain,
    DegenerateAnnulus,
    EmptyRegion,
    NonUniformSpacing,
)

UNCONSTRAINED = "unconstrained"
UNIT_SPHERE = "unit_sphere"

#: tolerance for the |v| = 1 sphere constraint at nodes
SPHERE_TOL = 1e-12
#: tolerance for geometric containment checks (ball inside box, etc.)
GEOM_TOL = 1e-12


@dataclass(frozen=True)
class GridDomain:
    """A uniform node-centered lattice over an axis-aligned box in R^n.

    node(i) = origin + spacing * i for every multi-index i, bijectively.
    """

    dim_n: int
    origin: np.ndarray
    spacing: float
    shape: tuple[int, ...]

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=float).reshape(-1)
        shape = tuple(int(s) for s in self.shape)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "dim_n", int(self.dim_n))
        if self.dim_n < 1:
            raise BadShape(f"domain dimension must be >= 1, got {self.dim_n}")
        if origin.shape != (self.dim_n,):
            raise BadShape(
                f"origin has length {origin.shape[0]}, expected {self.dim_n}"
            )
        if len(shape) != self.dim_n:
            raise BadShape(f"shape has length {len(shape)}, expected {self.dim_n}")
        if any(s < 2 for s in shape):
            raise BadShape(f"every axis needs >= 2 nodes, got {shape}")
        if not np.isfinite(self.spacing) or self.spacing <= 0.0:
            raise BadShape(f"spacing must be positive, got {self.spacing}")
        origin.setflags(write=False)

    # -- geometry ---------------------------------------------------------

    @property
    def box_low(self) -> np.ndarray:
        return self.origin

    @property
    def box_high(self) -> np.ndarray:
        return self.origin + self.spacing * (np.asarray(self.shape) - 1)

    @property
    def node_count(self) -> int:
        return int(np.prod(self.shape))

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing * np.arange(self.shape[axis])

    @cached_property
    def nodes(self) -> np.ndarray:
        """Node coordinates, shape (*shape, n)."""
        axes = [self.axis_coords(a) for a in range(self.dim_n)]
        grid = np.meshgrid(*axes, indexing="ij")
        out = np.stack(grid, axis=-1)
        out.setflags(write=False)
        return out

    def flat_nodes(self) -> np.ndarray:
        """Node coordinates as an (N, n) array in row-major node order."""
        return self.nodes.reshape(-1, self.dim_n)

    def distance_sq(self, center) -> np.ndarray:
        """|node - center|^2 at every node, computed by broadcasting."""
        center = np.asarray(center, dtype=float).reshape(-1)
        if center.shape != (self.dim_n,):
            raise BadShape(f"center has length {center.shape[0]}, expected {self.dim_n}")
        total = np.zeros(self.shape)
        for a in range(self.dim_n):
            coords = self.axis_coords(a) - center[a]
            bshape = [1] * self.dim_n
            bshape[a] = self.shape[a]
            total = total + (coords.reshape(bshape)) ** 2
        return total

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        """True at nodes lying on the boundary of the box."""
        out = np.zeros(self.shape, dtype=bool)
        for a in range(self.dim_n):
            sl = [slice(None)] * self.dim_n
            sl[a] = 0
            out[tuple(sl)] = True
            sl[a] = self.shape[a] - 1
            out[tuple(sl)] = True
        out.setflags(write=False)
        return out

    @cached_property
    def boundary_distance(self) -> np.ndarray:
        """Distance from each node to the boundary of the box (min over faces)."""
        total = np.full(self.shape, np.inf)
        lo, hi = self.box_low, self.box_high
        for a in range(self.dim_n):
            coords = self.axis_coords(a)
            d = np.minimum(coords - lo[a], hi[a] - coords)
            bshape = [1] * self.dim_n
            bshape[a] = self.shape[a]
            total = np.minimum(total, d.reshape(bshape))
        total.setflags(write=False)
        return total

    def contains_ball(self, ball: "Ball", tol: float = GEOM_TOL) -> bool:
        """Whether the closed ball lies inside the (closed) grid box."""
        c = np.asarray(ball.center, dtype=float)
        return bool(
            np.all(c - ball.radius >= self.box_low - tol)
            and np.all(c + ball.radius <= self.box_high + tol)
        )

    def same_lattice(self, other: "GridDomain") -> bool:
        return (
            self.dim_n == other.dim_n
            and self.shape == other.shape
            and abs(self.spacing - other.spacing) <= GEOM_TOL
            and bool(np.all(np.abs(self.origin - other.origin) <= GEOM_TOL))
        )


def make_grid(box_low, box_high, nodes_per_axis) -> GridDomain:
    """Build the uniform grid with the given box corners and node counts.

    The per-axis spacing (high - low)/(count - 1) must agree across axes to
    1e-12, otherwise ``NonUniformSpacing`` is raised.
    """
    low = np.asarray(box_low, dtype=float).reshape(-1)
    high = np.asarray(box_high, dtype=float).reshape(-1)
    counts = np.asarray(nodes_per_axis, dtype=int).reshape(-1)
    if not (low.shape == high.shape == counts.shape):
        raise BadShape("box corners and node counts must have equal lengths")
    if np.any(counts < 2):
        raise BadShape(f"every axis needs >= 2 nodes, got {counts.tolist()}")
    if np.any(high <= low):
        raise BadShape("box_high must exceed box_low componentwise")
    spacings = (high - low) / (counts - 1)
    h = float(spacings[0])
    if np.any(np.abs(spacings - h) > 1e-12):
        raise NonUniformSpacing(
            f"derived spacings differ across axes: {spacings.tolist()}"
        )
    return GridDomain(dim_n=low.shape[0], origin=low, spacing=h, shape=tuple(counts))


@dataclass(frozen=True)
class ExclusionMask:
    """Boolean node mask; True marks nodes excluded from all calculus."""

    excluded: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.excluded, dtype=bool)
        arr.setflags(write=False)
        object.__setattr__(self, "excluded", arr)

    @classmethod
    def none(cls, shape) -> "ExclusionMask":
        return cls(np.zeros(tuple(shape), dtype=bool))

    @property
    def count(self) -> int:
        return int(self.excluded.sum())

    def union(self, other: "ExclusionMask") -> "ExclusionMask":
        return ExclusionMask(self.excluded | other.excluded)


@dataclass(frozen=True)
class Ball:
    """Open ball B_rho(y) = {x : |x - y| < rho}."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))
        if not np.isfinite(self.radius) or self.radius <= 0.0:
            raise BadShape(f"ball radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class Annulus:
    """Open annulus {x : r_inner < |x - y| < r_outer}."""

    center: np.ndarray
    r_inner: float
    r_outer: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "r_inner", float(self.r_inner))
        object.__setattr__(self, "r_outer", float(self.r_outer))
        if self.r_inner < 0.0 or not np.isfinite(self.r_outer):
            raise BadShape("annulus radii must be finite and nonnegative")
        if self.r_inner >= self.r_outer:
            raise DegenerateAnnulus(
                f"need r_inner < r_outer, got {self.r_inner} >= {self.r_outer}"
            )


@dataclass(frozen=True)
class GridField:
    """A map u from the lattice into R^p, optionally sphere-constrained.

    ``values`` has shape (*domain.shape, dim_p).  When ``constraint`` is
    ``unit_sphere`` every unmasked node value has |v| = 1 within 1e-12.
    Masked node values are meaningless and are stored as 0.
    """

    domain: GridDomain
    dim_p: int
    values: np.ndarray
    constraint: str = UNCONSTRAINED
    mask: ExclusionMask | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "dim_p", int(self.dim_p))
        expected = self.domain.shape + (self.dim_p,)
        if vals.shape != expected:
            raise BadShape(f"values have shape {vals.shape}, expected {expected}")
        if self.constraint not in (UNCONSTRAINED, UNIT_SPHERE):
            raise BadShape(f"unknown constraint {self.constraint!r}")
        if self.mask is not None and self.mask.excluded.shape != self.domain.shape:
            raise BadShape("mask shape does not match the grid")
        ok = ~self.excluded
        if not np.all(np.isfinite(vals[ok])):
            raise BadShape("non-finite values at unmasked nodes")
        if self.constraint == UNIT_SPHERE:
            norms = np.linalg.norm(vals[ok], axis=-1)
            worst = float(np.max(np.abs(norms - 1.0))) if norms.size else 0.0
            if worst > SPHERE_TOL:
                raise BadShape(
                    f"unit-sphere constraint violated by {worst:.3e} at some node"
                )
        vals.setflags(write=False)

    @property
    def excluded(self) -> np.ndarray:
        if self.mask is None:
            return np.zeros(self.domain.shape, dtype=bool)
        return self.mask.excluded

    def with_values(self, values, constraint: str | None = None) -> "GridField":
        return GridField(
            domain=self.domain,
            dim_p=self.dim_p,
            values=values,
            constraint=self.constraint if constraint is None else constraint,
            mask=self.mask,
        )

    def component(self, j: int) -> np.ndarray:
        return self.values[..., j]


def sample_analytic(
    domain: GridDomain,
    f,
    singular_points=(),
    exclusion_radius: float = 0.0,
    constraint: str = UNCONSTRAINED,
    singular_distance=None,
) -> GridField:
    """Sample a pointwise map f: R^n -> R^p on the grid, masking singularities.

    Nodes within ``exclusion_radius`` (inclusive) of any singular point are
    masked and carry the value 0.  ``singular_distance`` may supply a
    vectorized distance-to-singularity function instead of (or on top of) a
    point list, e.g. distance to a line for axis singularities.

    ``f`` is called on an (N, n) array of node coordinates and must return
    an (N, p) array; a plain per-point callable is accepted as a fallback.
    """
    if exclusion_radius < 0.0:
        raise BadShape("exclusion_radius must be >= 0")
    pts = domain.flat_nodes()

    excluded = np.zeros(len(pts), dtype=bool)
    for s in singular_points:
        s = np.asarray(s, dtype=float).reshape(-1)
        d = np.linalg.norm(pts - s, axis=1)
        excluded |= d <= exclusion_radius
    if singular_distance is not None:
        excluded |= np.asarray(singular_distance(pts), dtype=float) <= exclusion_radius

    with np.errstate(all="ignore"):
        try:
            out = np.asarray(f(pts), dtype=float)
            if out.ndim == 1:
                out = out[:, None]
            if out.shape[0] != len(pts) or out.ndim != 2:
                raise ValueError
        except Exception:
            rows = [np.atleast_1d(np.asarray(f(x), dtype=float)) for x in pts]
            out = np.stack(rows, axis=0)
    out = out.copy()
    out[excluded] = 0.0

    dim_p = out.shape[1]
    mask = ExclusionMask(excluded.reshape(domain.shape)) if excluded.any() else None
    return GridField(
        domain=domain,
        dim_p=dim_p,
        values=out.reshape(domain.shape + (dim_p,)),
        constraint=constraint,
        mask=mask,
    )


# -- finite differences ----------------------------------------------------


def axis_derivative(field: GridField, axis: int) -> np.ndarray:
    """D_axis u at every node, shape (*shape, p).

    Central differences at interior nodes, one-sided at boundary or
    mask-adjacent nodes, picked per node from the widest clean stencil:

      fourth-order central  (both +-1 and +-2 neighbors usable)
      second-order central  (both +-1 neighbors usable)
      second-order one-sided (two clean neighbors on one side)
      first-order one-sided  (one clean neighbor)

    All variants are exact for affine fields.  Masked nodes get 0 and are
    never differentiated through.  Raises ``AllNeighborsMasked`` if an
    unmasked node has no usable neighbor along the axis.
    """
    dom = field.domain
    n, shape, h = dom.dim_n, dom.shape, dom.spacing
    excl = field.excluded

    # pad only along the differenced axis; poison masked/ghost values
    pad_v = [(2, 2) if a == axis else (0, 0) for a in range(n)] + [(0, 0)]
    vals = field.values
    if excl.any():
        vals = vals.copy()
        vals[excl] = np.nan
    pv = np.pad(vals, pad_v, constant_values=np.nan)
    pe = np.pad(excl, pad_v[:-1], constant_values=True)

    def shifted(arr, off):
        sl = [slice(None)] * arr.ndim
        sl[axis] = slice(2 + off, 2 + off + shape[axis])
        return arr[tuple(sl)]

    v0 = field.values
    vp1, vm1 = shifted(pv, +1), shifted(pv, -1)
    vp2, vm2 = shifted(pv, +2), shifted(pv, -2)
    okp1, okm1 = ~shifted(pe, +1), ~shifted(pe, -1)
    okp2 = ~shifted(pe, +2) & okp1
    okm2 = ~shifted(pe, -2) & okm1

    alive = ~excl
    dead = alive & ~okp1 & ~okm1
    if dead.any():
        idx = tuple(int(i[0]) for i in np.nonzero(dead))
        raise AllNeighborsMasked(
            f"node {idx} has no usable neighbor along axis {axis}"
        )

    central4 = alive & okp2 & okm2
    central2 = alive & okp1 & okm1 & ~central4
    fwd3 = alive & ~okm1 & okp2
    fwd2 = alive & ~okm1 & okp1 & ~okp2
    bwd3 = alive & ~okp1 & okm2
    bwd2 = alive & ~okp1 & okm1 & ~okm2

    out = np.zeros_like(field.values)
    with np.errstate(invalid="ignore"):
        np.copyto(
            out,
            (-vp2 + 8.0 * vp1 - 8.0 * vm1 + vm2) / (12.0 * h),
            where=central4[..., None],
        )
        np.copyto(out, (vp1 - vm1) / (2.0 * h), where=central2[..., None])
        np.copyto(out, (-3.0 * v0 + 4.0 * vp1 - vp2) / (2.0 * h), where=fwd3[..., None])
        np.copyto(out, (vp1 - v0) / h, where=fwd2[..., None])
        np.copyto(out, (3.0 * v0 - 4.0 * vm1 + vm2) / (2.0 * h), where=bwd3[..., None])
        np.copyto(out, (v0 - vm1) / h, where=bwd2[..., None])
    return out


def gradient(field: GridField) -> np.ndarray:
    """The full difference tensor D_i u^j, shape (*shape, p, n)."""
    parts = [axis_derivative(field, a) for a in range(field.domain.dim_n)]
    return np.stack(parts, axis=-1)


def squared_gradient_norm(field: GridField) -> np.ndarray:
    """|Du|^2 = sum_{i,j} (D_i u^j)^2 at every node, shape (*shape,).

    Accumulated axis by axis so the full (p, n) tensor is never stored;
    used by the energy, density, and scan layers on large grids.
    """
    acc = np.zeros(field.domain.shape)
    for a in range(field.domain.dim_n):
        d = axis_derivative(field, a)
        acc += np.sum(d * d, axis=-1)
    return acc


def radial_derivative_sq(field: GridField, center) -> np.ndarray:
    """|du/dR|^2 with R = |x - y|, i.e. the squared radial directional derivative.

    At the node x the derivative is sum_i (x-y)_i/|x-y| * D_i u, a vector in
    R^p.  The value at x = y (zero direction) is set to 0.
    """
    dom = field.domain
    center = np.asarray(center, dtype=float).reshape(-1)
    r2 = dom.distance_sq(center)
    r = np.sqrt(r2)
    acc = np.zeros(dom.shape + (field.dim_p,))
    for a in range(dom.dim_n):
        coords = dom.axis_coords(a) - center[a]
        bshape = [1] * dom.dim_n
        bshape[a] = dom.shape[a]
        acc += coords.reshape(bshape)[..., None] * axis_derivative(field, a)
    out = np.sum(acc * acc, axis=-1)
    safe = r > 0
    out[safe] = out[safe] / r2[safe]
    out[~safe] = 0.0
    return out


# -- integration -----------------------------------------------------------


def region_selector(domain: GridDomain, region) -> np.ndarray:
    """Boolean node array: True where the node lies strictly inside the region.

    ``region`` is a ``Ball``, an ``Annulus``, or None for the whole box.
    """
    if region is None:
        return np.ones(domain.shape, dtype=bool)
    if isinstance(region, Ball):
        return domain.distance_sq(region.center) < region.radius**2
    if isinstance(region, Annulus):
        d2 = domain.distance_sq(region.center)
        return (d2 > region.r_inner**2) & (d2 < region.r_outer**2)
    raise TypeError(f"unsupported region type {type(region).__name__}")


def integrate(domain: GridDomain, values: np.ndarray, region=None, mask=None) -> float:
    """Midpoint-rule integral of a nodal scalar array over a region.

    Sum of h^n * value over unmasked nodes strictly inside the region, in
    fixed row-major order.  Raises ``EmptyRegion`` when no node qualifies.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != domain.shape:
        raise BadShape(f"values have shape {values.shape}, expected {domain.shape}")
    sel = region_selector(domain, region)
    if mask is not None:
        sel = sel & ~mask.excluded
    if not sel.any():
        raise EmptyRegion("no unmasked node strictly inside the region")
    # boolean indexing walks the array in row-major order
    return float(domain.spacing**domain.dim_n * np.sum(values[sel]))


def field_integral(field: GridField, values: np.ndarray, region=None) -> float:
    """``integrate`` with the field's own mask."""
    return integrate(field.domain, values, region=region, mask=field.mask)


# -- interpolation ---------------------------------------------------------

#: stencil corners with multilinear weight below this never invalidate a query
_WEIGHT_EPS = 1e-12


def interpolate(field: GridField, points) -> tuple[np.ndarray, np.ndarray]:
    """Multilinear interpolation of the field at arbitrary points.

    Returns ``(values, valid)`` where values has shape (N, p) and valid is a
    boolean (N,) array.  A query is invalid when it falls outside the grid
    box or when any stencil corner carrying nonnegligible weight is masked;
    invalid rows hold NaN.  Sphere-constrained fields are re-projected to
    the sphere after interpolation.
    """
    dom = field.domain
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != dom.dim_n:
        raise BadShape(f"points have dimension {pts.shape[1]}, expected {dom.dim_n}")
    h = dom.spacing
    t = (pts - dom.origin) / h
    hi = np.asarray(dom.shape) - 1

    inside = np.all(t >= -1e-9, axis=1) & np.all(t <= hi + 1e-9, axis=1)
    t = np.clip(t, 0.0, hi)
    i0 = np.minimum(np.floor(t).astype(int), hi - 1)
    frac = np.clip(t - i0, 0.0, 1.0)

    flat_vals = field.values.reshape(-1, field.dim_p)
    flat_excl = field.excluded.reshape(-1)
    strides = np.ones(dom.dim_n, dtype=int)
    for a in range(dom.dim_n - 2, -1, -1):
        strides[a] = strides[a + 1] * dom.shape[a + 1]
    base = i0 @ strides

    acc = np.zeros((len(pts), field.dim_p))
    bad = ~inside
    for bits in itertools.product((0, 1), repeat=dom.dim_n):
        offset = int(np.dot(bits, strides))
        w = np.ones(len(pts))
        for a, b in enumerate(bits):
            w = w * (frac[:, a] if b else 1.0 - frac[:, a])
        idx = base + offset
        acc += w[:, None] * flat_vals[idx]
        bad |= flat_excl[idx] & (w > _WEIGHT_EPS)

    if field.constraint == UNIT_SPHERE:
        norms = np.linalg.norm(acc, axis=1)
        tiny = norms <= 1e-14
        bad |= tiny
        norms[tiny] = 1.0
        acc = acc / norms[:, None]
    acc[bad] = np.nan
    return acc, ~bad
