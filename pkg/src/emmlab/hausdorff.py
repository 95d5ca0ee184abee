"""Covering sums, box-counting dimension, and reference set generators.

The measure estimator covers a finite point sample with axis-aligned
lattice boxes of diameter below delta and sums the d-th powers of the
tight per-box diameters; this upper-bounds the infimal covering sum at
that delta.  Dimension comes from the least-squares slope of log N(s)
against log(1/s) over a scale ladder, with counts stabilized by taking
the median over random lattice offsets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAnnulus, EmptyCloud, EmptySingularSet
from .errors import BadShape


@dataclass(frozen=True)
class PointCloud:
    """A finite sample of the set under measurement."""

    ambient_dim: int
    points: np.ndarray  # (N, ambient_dim)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            raise EmptyCloud("point cloud is empty")
        if pts.shape[1] != self.ambient_dim:
            raise BadShape(
                f"points have dimension {pts.shape[1]}, expected {self.ambient_dim}"
            )
        if not np.all(np.isfinite(pts)):
            raise BadShape("non-finite points in cloud")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def extent(self) -> float:
        span = self.points.max(axis=0) - self.points.min(axis=0)
        return float(np.max(span))


@dataclass(frozen=True)
class CoverEstimate:
    """One covering sum H^d_delta computed from a lattice cover."""

    d: float
    delta: float
    value: float
    cover_size: int


@dataclass(frozen=True)
class DimensionFit:
    """Box-counting fit: slope of log N against log(1/scale)."""

    scales: tuple[float, ...]
    counts: tuple[int, ...]
    slope: float
    r_squared: float
    degenerate: bool  # True when r_squared < 0.9: fit reported, not trusted


# -- reference sets ----------------------------------------------------------


def cantor_intervals(level: int) -> list[tuple[float, float]]:
    """The 2^level middle-thirds intervals of length 3^(-level) at one level."""
    if level < 0:
        raise BadShape("level must be >= 0")
    intervals = [(0.0, 1.0)]
    for _ in range(level):
        nxt = []
        for lo, hi in intervals:
            w = (hi - lo) / 3.0
            nxt.append((lo, lo + w))
            nxt.append((hi - w, hi))
        intervals = nxt
    return intervals


def cantor_endpoints(level: int) -> PointCloud:
    """All interval endpoints at the given construction level (2^(level+1) points)."""
    pts = np.array(sorted({e for iv in cantor_intervals(level) for e in iv}))
    return PointCloud(ambient_dim=1, points=pts[:, None])


def hollow_square_cloud(spacing: float = 1e-3) -> PointCloud:
    """The perimeter of the unit square, sampled at the given spacing."""
    t = np.arange(0.0, 1.0, spacing)
    zero = np.zeros_like(t)
    one = np.ones_like(t)
    pts = np.concatenate(
        [
            np.stack([t, zero], axis=1),
            np.stack([one, t], axis=1),
            np.stack([1.0 - t, one], axis=1),
            np.stack([zero, 1.0 - t], axis=1),
        ]
    )
    return PointCloud(ambient_dim=2, points=pts)


def segment_cloud(spacing: float = 1e-3) -> PointCloud:
    """The unit segment [0, 1], densely sampled."""
    return PointCloud(ambient_dim=1, points=np.arange(0.0, 1.0 + spacing / 2, spacing)[:, None])


def lattice_square_cloud(count_per_axis: int = 100) -> PointCloud:
    """A count x count lattice filling the unit square."""
    t = np.linspace(0.0, 1.0, count_per_axis)
    X, Y = np.meshgrid(t, t, indexing="ij")
    return PointCloud(ambient_dim=2, points=np.stack([X.reshape(-1), Y.reshape(-1)], axis=1))


# -- estimators ---------------------------------------------------------------


def _box_ids(points: np.ndarray, anchor: np.ndarray, side: float) -> np.ndarray:
    return np.floor((points - anchor) / side).astype(np.int64)


def grid_cover_measure(cloud: PointCloud, d: float, delta: float) -> CoverEstimate:
    """Covering sum at diameter bound delta from an anchored lattice cover.

    Boxes have side delta/sqrt(n) (diameter just under delta); each
    occupied box contributes the d-th power of the diameter of its own
    points (their bounding-box diagonal), so straight pieces are covered
    at their true length and isolated points contribute nothing for d > 0.
    The result upper-bounds the infimal sum and is documented as such.
    """
    if delta <= 0.0:
        raise BadShape("delta must be positive")
    n = cloud.ambient_dim
    side = delta * (1.0 - 1e-9) / np.sqrt(n)
    anchor = cloud.points.min(axis=0)
    ids = _box_ids(cloud.points, anchor, side)
    order = np.lexsort(ids.T[::-1])
    sorted_ids = ids[order]
    sorted_pts = cloud.points[order]
    boundaries = np.nonzero(np.any(np.diff(sorted_ids, axis=0) != 0, axis=1))[0] + 1
    groups = np.split(np.arange(len(sorted_pts)), boundaries)
    value = 0.0
    for g in groups:
        block = sorted_pts[g]
        diag = float(np.linalg.norm(block.max(axis=0) - block.min(axis=0)))
        value += diag**d if (diag > 0.0 or d == 0.0) else 0.0
    return CoverEstimate(d=float(d), delta=float(delta), value=value, cover_size=len(groups))


def _occupied_count(points: np.ndarray, anchor: np.ndarray, side: float) -> int:
    ids = _box_ids(points, anchor, side)
    return len(np.unique(ids, axis=0))


def box_dimension(
    cloud: PointCloud,
    scales,
    offsets: int = 5,
    seed: int = 0,
) -> DimensionFit:
    """Least-squares box-counting slope over a decreasing scale ladder.

    Needs at least 4 scales spanning two decades.  Counts at each scale are
    the median over ``offsets`` random lattice anchors, which removes
    alignment artifacts at dyadic or triadic scales; the sample spacing
    must be well below the smallest scale for the counts to saturate.
    """
    scales = [float(s) for s in scales]
    if len(scales) < 4:
        raise BadShape("need at least 4 scales")
    if any(b >= a for a, b in zip(scales, scales[1:])):
        raise BadShape("scales must be strictly decreasing")
    if scales[0] / scales[-1] < 100.0 * (1.0 - 1e-9):
        raise BadShape("scales must span at least two decades")
    rng = np.random.default_rng(seed)
    base = cloud.points.min(axis=0)
    counts = []
    for s in scales:
        trial = []
        for _ in range(offsets):
            anchor = base - s * rng.random(cloud.ambient_dim)
            trial.append(_occupied_count(cloud.points, anchor, s))
        counts.append(int(np.median(trial)))

    x = np.log(1.0 / np.asarray(scales))
    yv = np.log(np.asarray(counts, dtype=float))
    slope, intercept = np.polyfit(x, yv, 1)
    resid = yv - (slope * x + intercept)
    ss_tot = float(np.sum((yv - yv.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0  # constant counts: the zero-slope fit is exact
        slope = 0.0
    else:
        r2 = 1.0 - float(np.sum(resid**2)) / ss_tot
    return DimensionFit(
        scales=tuple(scales),
        counts=tuple(counts),
        slope=float(slope),
        r_squared=float(r2),
        degenerate=bool(r2 < 0.9),
    )


def dimension_of_singular_set(scan, offsets: int = 5, seed: int = 0) -> DimensionFit:
    """Box-count the singular points of a regularity scan.

    Finitely many isolated points give slope near 0 (dimension zero), the
    expected desk-scale verdict in dimension 3.  Scales start below half
    the minimal pairwise separation so the counts saturate at the point
    count.  Raises ``EmptySingularSet`` for scans without singular points.
    """
    pts = np.asarray(scan.singular_points, dtype=float)
    if pts.size == 0:
        raise EmptySingularSet("scan found no singular points")
    n = pts.shape[1]
    if len(pts) >= 2:
        dists = [
            float(np.linalg.norm(a - b))
            for i, a in enumerate(pts)
            for b in pts[i + 1 :]
        ]
        base = min(dists) / (2.0 * np.sqrt(n))
    else:
        base = float(np.max(scan.domain.box_high - scan.domain.box_low)) / 8.0
    scales = [base / (2.0**k) for k in range(8)]  # spans 2^7 > two decades
    cloud = PointCloud(ambient_dim=n, points=pts)
    return box_dimension(cloud, scales, offsets=offsets, seed=seed)
