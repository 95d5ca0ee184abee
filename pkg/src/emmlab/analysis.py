"""Classical-analysis verifiers on lattice fields.

Numerical realizations of the textbook machinery: the weak-derivative
pairing against smooth bumps, the Sobolev norm, discrete harmonicity, the
mean value property, and Poincare ratios.  Everything here is a checker:
it quantifies how well a sampled field satisfies a classical identity, and
the test batteries assert the expected decay under grid refinement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadShape, BallOutsideDomain, ConstantField, SupportOutsideDomain
from .fields import (
    Ball,
    GridField,
    axis_derivative,
    field_integral,
    integrate,
    interpolate,
    squared_gradient_norm,
)


@dataclass(frozen=True)
class TestFunction:
    """A smooth bump supported on a ball, modeling a C_c^infinity test function.

    phi(x) = exp(smoothness * (1 - 1/(1 - s)))  with  s = |x - c|^2 / r^2 < 1,
    and 0 outside the support ball; phi(center) = 1.  The gradient is
    analytic, so the weak-derivative pairing carries no differencing error
    on the test-function side.
    """

    support_ball: Ball
    smoothness: float = 1.0

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        z = (pts - self.support_ball.center) / self.support_ball.radius
        s = np.sum(z * z, axis=1)
        out = np.zeros(len(pts))
        inside = s < 1.0
        out[inside] = np.exp(self.smoothness * (1.0 - 1.0 / (1.0 - s[inside])))
        return out

    def gradient(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = self.support_ball.radius
        z = (pts - self.support_ball.center) / r
        s = np.sum(z * z, axis=1)
        out = np.zeros_like(pts)
        inside = s < 1.0
        si = s[inside]
        phi = np.exp(self.smoothness * (1.0 - 1.0 / (1.0 - si)))
        dphi_ds = -self.smoothness * phi / (1.0 - si) ** 2
        out[inside] = dphi_ds[:, None] * (2.0 * z[inside] / r)
        return out


def _require_support_inside(domain, ball: Ball) -> None:
    lo = np.asarray(ball.center) - ball.radius
    hi = np.asarray(ball.center) + ball.radius
    if np.any(lo <= domain.box_low) or np.any(hi >= domain.box_high):
        raise SupportOutsideDomain(
            "test-function support must be strictly inside the grid box"
        )


def weak_derivative_residual(u: GridField, r: GridField, phi: TestFunction) -> np.ndarray:
    """Per-axis residual of the weak-derivative identity.

    residual_i = int(phi * r_i) + int(u * D_i phi); the two terms cancel in
    the continuum when r is the gradient of u, so the residual measures the
    distance of (u, r) from a weak-derivative pair at this resolution.
    """
    dom = u.domain
    if u.dim_p != 1:
        raise BadShape("weak_derivative_residual expects a scalar field u")
    if r.domain is not dom and not r.domain.same_lattice(dom):
        raise BadShape("u and r must share one grid")
    if r.dim_p != dom.dim_n:
        raise BadShape(f"r must have p = n = {dom.dim_n} components")
    _require_support_inside(dom, phi.support_ball)

    pts = dom.flat_nodes()
    phi_vals = phi(pts).reshape(dom.shape)
    dphi = phi.gradient(pts).reshape(dom.shape + (dom.dim_n,))
    mask = u.mask if r.mask is None else (r.mask if u.mask is None else u.mask.union(r.mask))

    out = np.zeros(dom.dim_n)
    for i in range(dom.dim_n):
        a = integrate(dom, phi_vals * r.component(i), mask=mask)
        b = integrate(dom, u.component(0) * dphi[..., i], mask=mask)
        out[i] = a + b
    return out


def sobolev_norm(u: GridField) -> float:
    """||u|| with ||u||^2 = int |u|^2 + sum_j int |D_j u|^2 over the grid box."""
    sq = np.sum(u.values * u.values, axis=-1)
    total = field_integral(u, sq)
    total += field_integral(u, squared_gradient_norm(u))
    return float(np.sqrt(total))


def harmonic_residual(u: GridField) -> float:
    """Max-norm of the (2n+1)-point discrete Laplacian over clean interior nodes.

    A node counts as clean when it and both its neighbors along every axis
    are unmasked; nodes without a full stencil are skipped.
    """
    if u.dim_p != 1:
        raise BadShape("harmonic_residual expects a scalar field")
    dom = u.domain
    n, h = dom.dim_n, dom.spacing
    vals = u.component(0)
    excl = u.excluded

    lap = -2.0 * n * vals.copy()
    clean = ~excl
    for a in range(n):
        sl_lo = [slice(None)] * n
        sl_hi = [slice(None)] * n
        sl_in = [slice(None)] * n
        sl_lo[a] = slice(0, -2)
        sl_hi[a] = slice(2, None)
        sl_in[a] = slice(1, -1)
        pad = np.zeros(dom.shape, dtype=bool)
        pad[tuple(sl_in)] = ~excl[tuple(sl_lo)] & ~excl[tuple(sl_hi)]
        clean = clean & pad
        contrib = np.zeros_like(vals)
        contrib[tuple(sl_in)] = vals[tuple(sl_lo)] + vals[tuple(sl_hi)]
        lap += contrib
    if not clean.any():
        raise BadShape("no interior node has a full unmasked stencil")
    return float(np.max(np.abs(lap[clean])) / h**2)


def mean_value_check(u: GridField, ball: Ball, sphere_nodes_per_h: float = 8.0):
    """Compare u(center) with its ball average and sphere average.

    Returns ``(center_value, ball_mean, sphere_mean)``.  For harmonic u all
    three agree up to O(h).  The sphere average uses uniform angle sampling
    in R^2 and latitude-longitude sampling in R^3, with the angular node
    count tied to ceil(C * R / h).
    """
    dom = u.domain
    if u.dim_p != 1:
        raise BadShape("mean_value_check expects a scalar field")
    if not dom.contains_ball(ball):
        raise BallOutsideDomain("closed ball must lie inside the grid box")
    center = np.asarray(ball.center, dtype=float)

    cv, ok = interpolate(u, center[None, :])
    if not ok[0]:
        raise BallOutsideDomain("ball center falls on masked nodes")
    center_value = float(cv[0, 0])

    vol = field_integral(u, np.ones(dom.shape), ball)
    tot = field_integral(u, u.component(0), ball)
    ball_mean = tot / vol

    R, h = ball.radius, dom.spacing
    m = max(16, int(np.ceil(sphere_nodes_per_h * R / h)))
    if dom.dim_n == 1:
        pts = np.array([center - R, center + R])
        w = np.ones(2)
    elif dom.dim_n == 2:
        ang = 2.0 * np.pi * np.arange(m) / m
        pts = center + R * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        w = np.ones(m)
    elif dom.dim_n == 3:
        theta = np.pi * (np.arange(m) + 0.5) / m
        lam = 2.0 * np.pi * np.arange(2 * m) / (2 * m)
        T, L = np.meshgrid(theta, lam, indexing="ij")
        pts = center + R * np.stack(
            [np.sin(T) * np.cos(L), np.sin(T) * np.sin(L), np.cos(T)], axis=-1
        ).reshape(-1, 3)
        w = np.repeat(np.sin(theta), 2 * m)
    else:
        raise BadShape("sphere sampling implemented for n <= 3")
    vals, valid = interpolate(u, pts)
    if not valid.any():
        raise BallOutsideDomain("entire sampling sphere falls on masked nodes")
    wv = w[valid]
    sphere_mean = float(np.sum(wv * vals[valid, 0]) / np.sum(wv))
    return center_value, ball_mean, sphere_mean


def poincare_ratio(u: GridField) -> float:
    """int |u - mean(u)|^2 / int |Du|^2 over the grid box.

    An empirical lower witness for the domain's Poincare constant; raises
    ``ConstantField`` when the gradient energy is below 1e-14 and the
    inequality is vacuous.
    """
    dom = u.domain
    sq = squared_gradient_norm(u)
    den = field_integral(u, sq)
    if den < 1e-14:
        raise ConstantField("gradient energy below 1e-14: Poincare ratio undefined")
    vol = field_integral(u, np.ones(dom.shape))
    num = 0.0
    for j in range(u.dim_p):
        comp = u.component(j)
        lam = field_integral(u, comp) / vol
        num += field_integral(u, (comp - lam) ** 2)
    return num / den


def poincare_battery(fields) -> float:
    """Running maximum of the Poincare ratio over a battery of fields.

    Reported as an empirical lower estimate of the domain constant, never
    as the true constant.
    """
    best = 0.0
    for f in fields:
        try:
            best = max(best, poincare_ratio(f))
        except ConstantField:
            continue
    return best
