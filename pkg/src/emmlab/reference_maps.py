"""Closed-form reference maps and boundary data used by the test batteries.

These are the analytic workhorses: the radial projection x/|x| (the model
point singularity), the cylinder map (a line singularity that minimizers
cannot produce in dimension 3), smooth sphere-valued maps with no
singularity, and classical harmonic polynomials for the analysis suite.
"""

from __future__ import annotations

import numpy as np

from .fields import GridDomain, GridField, UNIT_SPHERE, sample_analytic


def radial_map(pts: np.ndarray) -> np.ndarray:
    """x / |x| rowwise; rows at the origin produce zeros (callers mask them)."""
    r = np.linalg.norm(pts, axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = pts / r
    out[~np.isfinite(out).all(axis=1)] = 0.0
    return out


def radial_field(domain: GridDomain, exclusion_radius: float | None = None) -> GridField:
    """Sample x/|x| on the grid, masking nodes within exclusion_radius of 0.

    The default radius of half a cell masks exactly the node sitting at the
    origin (when there is one) and nothing else.
    """
    if exclusion_radius is None:
        exclusion_radius = 0.5 * domain.spacing
    return sample_analytic(
        domain,
        radial_map,
        singular_points=[np.zeros(domain.dim_n)],
        exclusion_radius=exclusion_radius,
        constraint=UNIT_SPHERE,
    )


def shifted_radial_map(center) -> callable:
    center = np.asarray(center, dtype=float)

    def f(pts):
        return radial_map(pts - center)

    return f


def cylinder_map(pts: np.ndarray) -> np.ndarray:
    """(x1, x2)/|(x1, x2)| into S^1, constant along the remaining axes."""
    xy = pts[:, :2]
    r = np.linalg.norm(xy, axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = xy / r
    out[~np.isfinite(out).all(axis=1)] = 0.0
    return out


def cylinder_field(domain: GridDomain, exclusion_radius: float | None = None) -> GridField:
    """Sample the cylinder map, masking a tube around the x3-axis."""
    if exclusion_radius is None:
        exclusion_radius = 0.5 * domain.spacing

    def axis_distance(pts):
        return np.linalg.norm(pts[:, :2], axis=1)

    return sample_analytic(
        domain,
        cylinder_map,
        exclusion_radius=exclusion_radius,
        constraint=UNIT_SPHERE,
        singular_distance=axis_distance,
    )


def two_defect_map(center_a, center_b) -> callable:
    """Normalized sum of two shifted radial projections (degree +1 caps)."""
    a = np.asarray(center_a, dtype=float)
    b = np.asarray(center_b, dtype=float)

    def f(pts):
        va = radial_map(pts - a)
        vb = radial_map(pts - b)
        s = va + vb
        norm = np.linalg.norm(s, axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = s / norm
        out[~np.isfinite(out).all(axis=1)] = 0.0
        return out

    return f


def tilted_constant_map(direction) -> callable:
    """The constant unit map in a fixed direction."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)

    def f(pts):
        return np.tile(d, (len(pts), 1))

    return f


def smooth_cap_map(offset) -> callable:
    """normalize(x + offset): smooth and non-surjective when |offset| > box radius."""
    c = np.asarray(offset, dtype=float)

    def f(pts):
        s = pts + c
        return s / np.linalg.norm(s, axis=1, keepdims=True)

    return f


def circle_wrap_map(amplitude: float = 0.8, wavenumber: float = 1.0) -> callable:
    """(cos a, sin a) with a smooth degree-zero angle field; maps into S^1."""

    def f(pts):
        ang = amplitude * np.sin(np.pi * wavenumber * pts[:, 0]) * np.cos(
            np.pi * wavenumber * pts[:, 1] if pts.shape[1] > 1 else 0.0
        )
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)

    return f


def winding_boundary_map() -> callable:
    """x/|x| on the plane: degree-1 data around the square boundary (n = 2)."""

    def f(pts):
        return radial_map(pts)

    return f


# -- scalar fields for the classical analysis suite -------------------------


def scalar(fn) -> callable:
    """Lift a scalar-valued rowwise function to an (N, 1) sampler."""

    def f(pts):
        return np.asarray(fn(pts), dtype=float).reshape(-1, 1)

    return f


def saddle(pts):
    """x1^2 - x2^2, harmonic in the plane and stencil-exact."""
    return pts[:, 0] ** 2 - pts[:, 1] ** 2


def log_norm(pts):
    """log|x|, harmonic away from the origin in R^2."""
    return np.log(np.linalg.norm(pts, axis=1))
