"""Grasp selection over segmented cloth regions.

Every outer-edge pixel is a grasp candidate. A candidate's direction points
at its nearest inner-edge pixel, which approximates the local inward normal
of the cloth edge. Around each candidate we look at the directions of its k
nearest fellow candidates; where those directions agree the edge is clean
and a slide along the direction will separate a single layer, where they
disagree the segmentation is unreliable (corners, overlapping edges,
specularity dropouts). The selected grasp is the candidate whose
neighborhood directions have the lowest total variance.

Determinism contract: every argmin and nearest-neighbor tie resolves to the
first point in lexicographic (x, y) order. The variance neighborhood
is the closed ball at the k-th smallest distance, so points tied with the
k-th neighbor are all included; this keeps the statistic invariant under
translations and right-angle rotations of the masks, which an arbitrary
tie cut would break.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    InsufficientPointsError,
    NoCandidatesError,
    NoInnerEdgeError,
    ParameterError,
    ZeroVectorError,
)
from .regions import RegionMask

DEFAULT_NEIGHBORHOOD = 100

# extra neighbors fetched per query so boundary ties rarely force a re-query
_TIE_SLACK = 16


class GraspMode(Enum):
    EDGE = "edge"
    CORNER = "corner"


@dataclass(frozen=True)
class GraspCandidate:
    """One candidate pixel with its correspondence and direction."""

    point: tuple[int, int]
    nearest_inner: tuple[int, int]
    dir_cos: float
    dir_sin: float
    uncertainty: float


@dataclass(frozen=True)
class GraspConfig2D:
    """A selected grasp in image space."""

    point: tuple[int, int]
    angle_rad: float
    uncertainty: float | None
    mode: GraspMode


class NeighborIndex:
    """Exact nearest-neighbor queries over 2-d points.

    Backed by a k-d tree for speed, with an exactness layer on top: query
    results are widened until every point tied with the boundary distance
    is visible, so answers match a brute-force scan, and ties resolve to
    the lowest index in construction order. Callers pass points in
    (x, y)-lexicographic order, making that the canonical tie-break.

    Distances compare exactly for integer pixel coordinates because the
    squared sums are exact in double precision.
    """

    def __init__(self, points: np.ndarray):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
            raise ParameterError("NeighborIndex needs a non-empty (n, 2) point array")
        if not np.all(np.isfinite(pts)):
            raise ParameterError("NeighborIndex points must be finite")
        self.points = pts
        self._tree = cKDTree(pts)

    def __len__(self) -> int:
        return len(self.points)

    def _query(self, queries: np.ndarray, kq: int) -> tuple[np.ndarray, np.ndarray]:
        d, i = self._tree.query(queries, k=kq, workers=-1)
        if kq == 1:
            d = d[:, None]
            i = i[:, None]
        return d, i

    def _complete_query(self, queries: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Distances/indices covering the closed ball at the k-th distance.

        Returns (dist, idx, dk) where every point with distance <= dk
        appears among the returned columns of its row.
        """
        n = len(self.points)
        k = min(k, n)
        kq = min(n, k + _TIE_SLACK)
        while True:
            d, i = self._query(queries, kq)
            dk = d[:, k - 1]
            if kq == n or np.all(d[:, -1] > dk):
                return d, i, dk
            kq = min(n, kq * 2)

    def nearest(self, queries: np.ndarray) -> np.ndarray:
        """Index of the closest point for each query row.

        Ties resolve to the lowest construction-order index.
        """
        q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        d, i, d0 = self._complete_query(q, 1)
        tied = d <= d0[:, None]
        return np.where(tied, i, len(self.points)).min(axis=1)

    def knn(self, queries: np.ndarray, k: int) -> np.ndarray:
        """Indices of the k nearest points per query, (m, k) int.

        Ordered by (distance, construction index), matching a stable
        brute-force sort.
        """
        if k < 1:
            raise ParameterError("k must be at least 1")
        if k > len(self.points):
            raise ParameterError(f"k={k} exceeds the {len(self.points)} indexed points")
        q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        d, i, dk = self._complete_query(q, k)
        out = np.empty((len(q), k), dtype=np.int64)
        for row in range(len(q)):
            keep = d[row] <= dk[row]
            di, ii = d[row][keep], i[row][keep]
            order = np.lexsort((ii, di))
            out[row] = ii[order][:k]
        return out

    def closed_knn(self, queries: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
        """All points within the k-th smallest distance, boundary ties kept.

        Returns (idx, member) matrices of equal shape; member flags the
        valid columns. Row counts are >= min(k, len(self)).
        """
        if k < 1:
            raise ParameterError("k must be at least 1")
        q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        d, i, dk = self._complete_query(q, k)
        member = d <= dk[:, None]
        return i, member


def direction(p, q) -> tuple[float, float]:
    """Unit direction (cos, sin) from pixel p toward pixel q.

    Raises ZeroVectorError when p == q; a pixel labeled both outer and
    inner has no usable correspondence and is skipped upstream.
    """
    dx = float(q[0]) - float(p[0])
    dy = float(q[1]) - float(p[1])
    norm = math.hypot(dx, dy)
    if norm == 0.0:
        raise ZeroVectorError(f"no direction between identical points {tuple(p)}")
    return dx / norm, dy / norm


def nearest_inner(p, inner_points: np.ndarray) -> tuple[int, int]:
    """Closest inner-edge pixel to p, ties to the first in (x, y) order.

    The tie-break is over the point set, not the order the caller happened
    to pass, so the input is canonicalized before querying.
    """
    pts = np.asarray(inner_points)
    if len(pts) == 0:
        raise NoInnerEdgeError("inner-edge point set is empty")
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    idx = NeighborIndex(pts).nearest([p])[0]
    return int(pts[idx, 0]), int(pts[idx, 1])


def _neighborhood_spread(positions: np.ndarray, cos_v: np.ndarray, sin_v: np.ndarray,
                         k: int) -> np.ndarray:
    """Per-candidate sum of sample variances of neighborhood directions.

    The neighborhood of a candidate is the closed ball at its k-th
    smallest distance within `positions` (the candidate itself included at
    distance zero). Variances use the 1/(N-1) normalization.
    """
    index = NeighborIndex(positions)
    idx, member = index.closed_knn(positions, k)
    counts = member.sum(axis=1)

    total = np.zeros(len(positions))
    for values in (cos_v, sin_v):
        v = values[idx]
        vmax = np.where(member, v, -np.inf).max(axis=1)
        vmin = np.where(member, v, np.inf).min(axis=1)
        mean = np.where(member, v, 0.0).sum(axis=1) / counts
        dev = np.where(member, v - mean[:, None], 0.0)
        var = (dev * dev).sum(axis=1) / (counts - 1)
        # identical samples must yield exactly zero, not rounding dust
        total += np.where(vmax == vmin, 0.0, var)
    return total


def directional_uncertainty(p, candidates, k: int = DEFAULT_NEIGHBORHOOD) -> float:
    """Uncertainty of the candidate at pixel p among `candidates`.

    Var(cos) + Var(sin) over the neighborhood directions; lies in [0, 4].
    """
    if k < 2:
        raise ParameterError("neighborhood size k must be at least 2")
    cands = list(candidates)
    if len(cands) < 2:
        raise InsufficientPointsError("need at least 2 candidates for a spread estimate")
    positions = np.array([c.point for c in cands], dtype=np.float64)
    px, py = float(p[0]), float(p[1])
    at_p = np.nonzero((positions[:, 0] == px) & (positions[:, 1] == py))[0]
    if len(at_p) == 0:
        raise ParameterError(f"p={tuple(p)} is not among the candidates")
    cos_v = np.array([c.dir_cos for c in cands])
    sin_v = np.array([c.dir_sin for c in cands])
    return float(_neighborhood_spread(positions, cos_v, sin_v, k)[at_p[0]])


def _candidate_arrays(masks: RegionMask, mode: GraspMode, k: int):
    """Eligible candidate pixels with directions and uncertainties."""
    if k < 2:
        raise ParameterError("neighborhood size k must be at least 2")
    if mode is GraspMode.EDGE:
        pts = masks.outer_points
    elif mode is GraspMode.CORNER:
        pts = masks.corner_points
    else:
        raise ParameterError(f"unknown grasp mode {mode!r}")
    inner = masks.inner_points
    if len(inner) == 0:
        raise NoInnerEdgeError("inner-edge mask is empty")
    if len(pts) == 0:
        raise NoCandidatesError(f"no {mode.value} candidates in the mask")

    qi = NeighborIndex(inner).nearest(pts)
    q = inner[qi]
    delta = (q - pts).astype(np.float64)
    dist = np.hypot(delta[:, 0], delta[:, 1])
    # a pixel carrying both labels is its own correspondence; skip it
    eligible = dist > 0.0
    if int(eligible.sum()) < 2:
        raise InsufficientPointsError(
            f"{int(eligible.sum())} usable candidates; spread needs at least 2")

    pts = pts[eligible]
    q = q[eligible]
    cos_v = delta[eligible, 0] / dist[eligible]
    sin_v = delta[eligible, 1] / dist[eligible]
    unc = _neighborhood_spread(pts.astype(np.float64), cos_v, sin_v, k)
    return pts, q, cos_v, sin_v, unc


def build_candidates(masks: RegionMask, mode: GraspMode = GraspMode.EDGE,
                     k: int = DEFAULT_NEIGHBORHOOD) -> list[GraspCandidate]:
    """All eligible candidates with uncertainties, in (x, y) order."""
    pts, q, cos_v, sin_v, unc = _candidate_arrays(masks, mode, k)
    return [
        GraspCandidate(point=(int(p[0]), int(p[1])),
                       nearest_inner=(int(qq[0]), int(qq[1])),
                       dir_cos=float(c), dir_sin=float(s), uncertainty=float(u))
        for p, qq, c, s, u in zip(pts, q, cos_v, sin_v, unc)
    ]


def select_grasp(masks: RegionMask, mode: GraspMode = GraspMode.EDGE,
                 k: int = DEFAULT_NEIGHBORHOOD) -> GraspConfig2D:
    """Lowest-uncertainty grasp over the mask's candidate pixels.

    Ties on uncertainty resolve to the first candidate in (x, y) order.

    Caveat for noise-free masks: minimizing directional variance favors
    neighborhoods whose pixel-to-pixel directions agree, and on an
    exactly rasterized band the most agreeing neighborhoods sit on
    staircase runs whose shared direction is quantized toward the axis.
    The selected angle can then carry a systematic error up to the
    band's inclination (worst near-axis and near-diagonal), with the
    uncertainty score reading zero. Segmentation noise decoheres those
    runs in practice; see tests/test_acceptance.py for the measured
    failure envelope.
    """
    pts, _, cos_v, sin_v, unc = _candidate_arrays(masks, mode, k)
    best = int(np.lexsort((np.arange(len(unc)), unc))[0])
    angle = math.atan2(sin_v[best], cos_v[best])
    return GraspConfig2D(point=(int(pts[best, 0]), int(pts[best, 1])),
                         angle_rad=angle,
                         uncertainty=float(unc[best]),
                         mode=mode)


def ablation_no_direction_prediction(masks: RegionMask, seed: int) -> GraspConfig2D:
    """Drop the learned directions: aim a random outer pixel at the
    bounding-box center of the outer set."""
    pts = masks.outer_points
    if len(pts) == 0:
        raise NoCandidatesError("no outer candidates in the mask")
    rng = np.random.default_rng(seed)
    p = pts[int(rng.integers(len(pts)))]
    center = ((pts[:, 0].min() + pts[:, 0].max()) / 2.0,
              (pts[:, 1].min() + pts[:, 1].max()) / 2.0)
    dx, dy = center[0] - p[0], center[1] - p[1]
    norm = math.hypot(dx, dy)
    if norm == 0.0:
        cos_v, sin_v = 1.0, 0.0
    else:
        cos_v, sin_v = dx / norm, dy / norm
    return GraspConfig2D(point=(int(p[0]), int(p[1])),
                         angle_rad=math.atan2(sin_v, cos_v),
                         uncertainty=None,
                         mode=GraspMode.EDGE)


def ablation_no_directional_uncertainty(masks: RegionMask, seed: int) -> GraspConfig2D:
    """Keep the directions but drop the spread ranking: uniform random
    eligible outer pixel with its nearest-inner direction."""
    pts = masks.outer_points
    inner = masks.inner_points
    if len(inner) == 0:
        raise NoInnerEdgeError("inner-edge mask is empty")
    if len(pts) == 0:
        raise NoCandidatesError("no outer candidates in the mask")
    qi = NeighborIndex(inner).nearest(pts)
    q = inner[qi]
    delta = (q - pts).astype(np.float64)
    dist = np.hypot(delta[:, 0], delta[:, 1])
    eligible = np.nonzero(dist > 0.0)[0]
    if len(eligible) == 0:
        raise NoCandidatesError("every outer pixel is its own inner correspondence")
    rng = np.random.default_rng(seed)
    i = int(eligible[int(rng.integers(len(eligible)))])
    return GraspConfig2D(point=(int(pts[i, 0]), int(pts[i, 1])),
                         angle_rad=math.atan2(delta[i, 1] / dist[i], delta[i, 0] / dist[i]),
                         uncertainty=None,
                         mode=GraspMode.EDGE)
