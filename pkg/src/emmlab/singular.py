"""Regular/singular classification, epsilon calibration, and stratification.

A node is regular at threshold epsilon when the scaled energy of the ball
of radius rho_scan around it stays below epsilon; nodes too close to the
boundary for that ball are untested.  Singular candidates are merged into
26-connected clusters (then by centroid distance <= 2h), each cluster is
blown up through the tangent pipeline, and the dimension of its symmetry
subspace assigns the stratum of the flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .density import MIN_RADIUS_CELLS
from .errors import NoSeparation, RadiusBelowResolution
from .fields import GridDomain, GridField, squared_gradient_norm
from .tangent import (
    TangentCandidate,
    estimate_symmetry_subspace,
    extract_tangent,
    unit_box_grid,
    MIN_RHO_CELLS,
)

LABEL_REGULAR = 0
LABEL_SINGULAR = 1
LABEL_UNTESTED = 2

LABEL_NAMES = {LABEL_REGULAR: "regular", LABEL_SINGULAR: "singular_candidate", LABEL_UNTESTED: "untested"}

#: stratum marker for points whose tangent extraction failed
UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class RegularityScan:
    """Per-node regular/singular labels at one (epsilon, rho_scan)."""

    domain: GridDomain
    epsilon: float
    rho_scan: float
    labels: np.ndarray  # int8 array of LABEL_* over the node shape
    scaled_energies: np.ndarray  # scan statistic per node (untested rows kept)
    singular_points: tuple[tuple[float, ...], ...]  # merged cluster centroids


@dataclass(frozen=True)
class StratumEntry:
    point: tuple[float, ...]
    theta: float
    dim_symmetry: int | None
    stratum: int | str  # stratum index, or UNRESOLVED


@dataclass(frozen=True)
class Stratification:
    """Stratum assignments for every singular point plus nesting counts."""

    entries: tuple[StratumEntry, ...]
    flag_summary: dict  # cumulative counts: j -> #points in strata <= j
    bound_violations: tuple[tuple[float, ...], ...]  # points with dim > n-3

    @property
    def assignments(self) -> dict:
        return {e.point: e.stratum for e in self.entries}


def scan_statistic(u: GridField, rho_scan: float) -> np.ndarray:
    """Scaled energy of B_rho_scan around every node, by direct convolution.

    Identical quadrature to ``scaled_energy`` (strict node-in-ball midpoint
    rule); values at nodes whose ball leaves the box are computed with
    zero padding and only meaningful through the untested label.
    """
    dom = u.domain
    h, n = dom.spacing, dom.dim_n
    if rho_scan < MIN_RADIUS_CELLS * h * (1.0 - 1e-12):
        raise RadiusBelowResolution(
            f"rho_scan={rho_scan} below the trusted floor {MIN_RADIUS_CELLS}h"
        )
    dens = squared_gradient_norm(u)
    if u.mask is not None:
        dens = np.where(u.mask.excluded, 0.0, dens)

    reach = int(np.ceil(rho_scan / h))
    axes = [np.arange(-reach, reach + 1) * h for _ in range(n)]
    grids = np.meshgrid(*axes, indexing="ij")
    d2 = sum(g * g for g in grids)
    kernel = (d2 < rho_scan**2).astype(float) * h**n * rho_scan ** (2 - n)
    return ndimage.convolve(dens, kernel, mode="constant", cval=0.0)


def epsilon_scan(u: GridField, epsilon: float, rho_scan: float) -> RegularityScan:
    """Label every node regular / singular_candidate / untested.

    Untested nodes are exactly those within rho_scan of the box boundary.
    Singular candidates are clustered with 26-connectivity, clusters whose
    centroids sit within 2h of each other are merged, and the merged
    centroids are reported in lexicographic order.
    """
    dom = u.domain
    stat = scan_statistic(u, rho_scan)
    untested = dom.boundary_distance <= rho_scan * (1.0 + 1e-12)
    labels = np.where(stat < epsilon, LABEL_REGULAR, LABEL_SINGULAR).astype(np.int8)
    labels[untested] = LABEL_UNTESTED

    candidate = labels == LABEL_SINGULAR
    structure = np.ones((3,) * dom.dim_n, dtype=int)
    comp, ncomp = ndimage.label(candidate, structure=structure)
    centroids = []
    weights = []
    nodes = dom.nodes
    for k in range(1, ncomp + 1):
        sel = comp == k
        centroids.append(nodes[sel].mean(axis=0))
        weights.append(int(sel.sum()))

    merged = _merge_centroids(centroids, weights, 2.0 * dom.spacing)
    merged.sort(key=lambda c: tuple(c))
    return RegularityScan(
        domain=dom,
        epsilon=float(epsilon),
        rho_scan=float(rho_scan),
        labels=labels,
        scaled_energies=stat,
        singular_points=tuple(tuple(float(x) for x in c) for c in merged),
    )


def _merge_centroids(centroids, weights, radius):
    """Union-find merge of centroids closer than ``radius``."""
    m = len(centroids)
    parent = list(range(m))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(m):
        for j in range(i + 1, m):
            if np.linalg.norm(np.asarray(centroids[i]) - centroids[j]) <= radius:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(m):
        groups.setdefault(find(i), []).append(i)
    out = []
    for members in groups.values():
        w = np.array([weights[i] for i in members], dtype=float)
        pts = np.stack([np.asarray(centroids[i]) for i in members])
        out.append(tuple((pts * w[:, None]).sum(axis=0) / w.sum()))
    return out


def calibrate_epsilon(references, rho_scan: float) -> float:
    """Pick the scan threshold from labeled reference points.

    ``references`` is a sequence of (field, point, kind) with kind one of
    "regular" / "singular".  The threshold is half the smallest singular
    value, valid only when that still clears every regular value (margin
    factor 2); otherwise ``NoSeparation``.
    """
    regular_max = None
    singular_min = None
    stats: dict[int, np.ndarray] = {}
    for field, point, kind in references:
        key = id(field)
        if key not in stats:
            stats[key] = scan_statistic(field, rho_scan)
        dom = field.domain
        idx = tuple(
            int(round(c)) for c in (np.asarray(point, dtype=float) - dom.origin) / dom.spacing
        )
        value = float(stats[key][idx])
        if kind == "regular":
            regular_max = value if regular_max is None else max(regular_max, value)
        elif kind == "singular":
            singular_min = value if singular_min is None else min(singular_min, value)
        else:
            raise NoSeparation(f"unknown reference kind {kind!r}")
    if regular_max is None or singular_min is None:
        raise NoSeparation("calibration needs at least one regular and one singular reference")
    eps = 0.5 * singular_min
    if eps <= regular_max:
        raise NoSeparation(
            f"no factor-2 margin: regular max {regular_max} vs singular min {singular_min}"
        )
    return eps


@dataclass(frozen=True)
class TangentSettings:
    """Controls for the per-point tangent extraction inside stratify."""

    out_nodes: int = 40
    gap_tol: float = 0.1
    theta_tol: float = 0.05
    probe_count: int = 64
    rho_start: float | None = None  # default: 0.8 * distance to the boundary


def _auto_ladder(u: GridField, y, settings: TangentSettings):
    dom = u.domain
    y = np.asarray(y, dtype=float)
    margin = float(np.min(np.minimum(y - dom.box_low, dom.box_high - y)))
    rho0 = settings.rho_start if settings.rho_start is not None else 0.8 * margin
    floor = MIN_RHO_CELLS * dom.spacing
    ladder = []
    r = rho0
    while r >= floor * (1.0 - 1e-12) and len(ladder) < 4:
        ladder.append(r)
        r *= 0.5
    return ladder


def stratify(
    u: GridField,
    scan: RegularityScan,
    settings: TangentSettings | None = None,
) -> Stratification:
    """Assign each singular point its stratum j = dim S(phi).

    Points whose ladder is infeasible or whose extraction fails the Cauchy
    criterion are reported as unresolved, never dropped.  Points whose
    symmetry dimension exceeds n - 3 are listed as bound violations: the
    flag of an energy minimizer cannot contain them, so their presence
    marks a field that the minimizing pipeline cannot have produced.
    """
    settings = settings or TangentSettings()
    n = u.domain.dim_n
    out_grid = unit_box_grid(n, settings.out_nodes)
    entries = []
    violations = []
    for point in scan.singular_points:
        ladder = _auto_ladder(u, point, settings)
        if len(ladder) < 2:
            entries.append(
                StratumEntry(point=point, theta=float("nan"), dim_symmetry=None, stratum=UNRESOLVED)
            )
            continue
        cand = extract_tangent(
            u, point, ladder, out_grid=out_grid, gap_tol=settings.gap_tol
        )
        if not cand.converged:
            entries.append(
                StratumEntry(
                    point=point,
                    theta=cand.theta_at_origin,
                    dim_symmetry=None,
                    stratum=UNRESOLVED,
                )
            )
            continue
        sub = estimate_symmetry_subspace(
            cand.phi, theta_tol=settings.theta_tol, probe_count=settings.probe_count
        )
        entries.append(
            StratumEntry(
                point=point,
                theta=cand.theta_at_origin,
                dim_symmetry=sub.dim,
                stratum=sub.dim,
            )
        )
        if sub.dim > max(n - 3, 0):
            violations.append(point)

    resolved = [e.stratum for e in entries if isinstance(e.stratum, int)]
    flag_summary = {
        j: sum(1 for s in resolved if s <= j) for j in range(n)
    }
    return Stratification(
        entries=tuple(entries),
        flag_summary=flag_summary,
        bound_violations=tuple(violations),
    )


def isolation_check(scan: RegularityScan) -> tuple[float, int]:
    """(min pairwise distance between singular clusters, cluster count).

    The distance is +inf when fewer than two clusters exist; for minimizer
    fields in dimension 3 the expectation is a finite count with pairwise
    distances far above the grid spacing.
    """
    pts = [np.asarray(p) for p in scan.singular_points]
    count = len(pts)
    if count < 2:
        return float("inf"), count
    best = min(
        float(np.linalg.norm(a - b)) for i, a in enumerate(pts) for b in pts[i + 1 :]
    )
    return best, count
