"""Classical detectors and the non-learned grasp baselines.

Edge and corner detection run on normalized scalar fields so one set of
threshold defaults serves both depth and luminance inputs. Grasp
directions for every baseline follow one convention: the approach vector
points from the table side onto the cloth, which for depth means against
the depth gradient (cloth is closer to the camera than the table) and for
luminance along the gradient (cloth renders brighter than the table).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateInputError, NoCandidatesError, ParameterError
from .geometry import CameraModel
from .graspsel import GraspConfig2D, GraspMode
from .imaging import (
    DepthImage,
    RgbImage,
    ScalarField,
    depth_to_field,
    gaussian_blur,
    grayscale,
    normalize_field,
    sobel_gradients,
)

BASELINE_METHODS = ("canny-depth", "canny-color", "segment-edge", "harris-depth", "harris-color")


@dataclass(frozen=True)
class DetectorParams:
    """Knobs for the classical stack; defaults tuned for normalized fields."""

    blur_sigma: float = 1.4
    canny_low: float = 0.04
    canny_high: float = 0.10
    intensity_percentile: float = 90.0
    harris_k: float = 0.04
    harris_window_sigma: float = 1.5
    ransac_iters: int = 500
    ransac_inlier_dist: float = 0.005

    def __post_init__(self):
        if not (0.0 <= self.canny_low <= self.canny_high):
            raise ParameterError("need 0 <= canny_low <= canny_high")
        if not (0.0 <= self.intensity_percentile <= 100.0):
            raise ParameterError("intensity_percentile must lie in [0, 100]")
        if self.ransac_iters < 1:
            raise ParameterError("ransac_iters must be positive")
        if self.ransac_inlier_dist <= 0.0:
            raise ParameterError("ransac_inlier_dist must be positive")


@dataclass(frozen=True)
class EdgeMask:
    """Canny output: edge pixels plus the underlying gradient planes."""

    mask: np.ndarray
    angle: np.ndarray
    magnitude: np.ndarray


def _shifted(arr: np.ndarray, dx: int, dy: int) -> np.ndarray:
    # clamp-to-edge shifted view: out[y, x] = arr[y + dy, x + dx]
    h, w = arr.shape
    ys = np.clip(np.arange(h) + dy, 0, h - 1)
    xs = np.clip(np.arange(w) + dx, 0, w - 1)
    return arr[ys][:, xs]


# canonical step per gradient-direction sector; the asymmetric compare
# (> backward, >= forward) keeps plateau edges one pixel wide
_SECTOR_STEPS = ((1, 0), (1, 1), (0, 1), (-1, 1))


def canny(field: ScalarField, sigma: float = 1.4, low: float = 0.04,
          high: float = 0.10) -> EdgeMask:
    """Canny edges: blur, Sobel, 8-direction NMS, hysteresis.

    Thresholds apply to the Sobel magnitude of the blurred field. Weak
    pixels survive only in 8-connected components that touch a strong
    pixel.
    """
    if not (0.0 <= low <= high):
        raise ParameterError("need 0 <= low <= high")
    blurred = gaussian_blur(field, sigma)
    gx, gy = sobel_gradients(blurred)
    mag = np.hypot(gx.data, gy.data)
    angle = np.arctan2(gy.data, gx.data)
    angle = np.where(angle == -np.pi, np.pi, angle)

    sector = np.floor_divide(np.mod(angle, np.pi) + np.pi / 8.0, np.pi / 4.0).astype(int) % 4
    thin = np.zeros(mag.shape, dtype=bool)
    for s, (dx, dy) in enumerate(_SECTOR_STEPS):
        fwd = _shifted(mag, dx, dy)
        bwd = _shifted(mag, -dx, -dy)
        thin |= (sector == s) & (mag > bwd) & (mag >= fwd)

    weak = thin & (mag >= low)
    strong = thin & (mag >= high)
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    if n == 0:
        mask = np.zeros(mag.shape, dtype=bool)
    else:
        strong_labels = np.unique(labels[strong])
        keep = np.zeros(n + 1, dtype=bool)
        keep[strong_labels[strong_labels > 0]] = True
        mask = keep[labels]
    return EdgeMask(mask=mask, angle=angle, magnitude=mag)


def harris(field: ScalarField, k: float = 0.04, window_sigma: float = 1.5) -> ScalarField:
    """Harris corner response R = det(M) - k trace(M)^2.

    M is the Sobel structure tensor smoothed with a Gaussian window.
    """
    gx, gy = sobel_gradients(field)
    xx = gaussian_blur(ScalarField(gx.data * gx.data), window_sigma).data
    yy = gaussian_blur(ScalarField(gy.data * gy.data), window_sigma).data
    xy = gaussian_blur(ScalarField(gx.data * gy.data), window_sigma).data
    det = xx * yy - xy * xy
    trace = xx + yy
    return ScalarField(det - k * trace * trace)


@dataclass(frozen=True)
class PlaneFit:
    """A fitted plane normal . p = offset with its per-pixel inlier mask."""

    normal: np.ndarray
    offset: float
    inliers: np.ndarray

    @property
    def inlier_fraction(self) -> float:
        return float(self.inliers.sum()) / self.inliers.size


def _deproject_grid(depth: DepthImage, cam: CameraModel):
    ys, xs = np.nonzero(depth.valid)
    d = depth.data[ys, xs]
    pc = np.stack([(xs - cam.cx) * d / cam.fx, (ys - cam.cy) * d / cam.fy, d], axis=1)
    return pc @ cam.rotation.T + cam.translation, ys, xs


def _canonical_normal(n: np.ndarray) -> np.ndarray:
    for c in (n[2], n[1], n[0]):
        if c != 0.0:
            return n if c > 0.0 else -n
    raise DegenerateInputError("zero plane normal")


def ransac_plane(depth: DepthImage, cam: CameraModel, iters: int = 500,
                 inlier_dist: float = 0.005, seed: int = 0) -> PlaneFit:
    """Seeded RANSAC plane over the deprojected valid pixels.

    Samples 3-point candidates, keeps the one with the most inliers (first
    best on ties), then refits by least squares over its inliers. The
    returned mask marks pixels within inlier_dist of the refit plane.
    """
    points, ys, xs = _deproject_grid(depth, cam)
    n_pts = len(points)
    if n_pts < 3:
        raise DegenerateInputError(f"plane fit needs 3 valid pixels, got {n_pts}")

    rng = np.random.default_rng(seed)
    normals = np.empty((iters, 3))
    offsets = np.empty(iters)
    for it in range(iters):
        for _ in range(1000):
            idx = rng.integers(0, n_pts, size=3)
            a, b, c = points[idx]
            n = np.cross(b - a, c - a)
            norm = np.linalg.norm(n)
            if norm > 1e-12:
                break
        else:
            raise DegenerateInputError("could not draw a non-collinear 3-point sample")
        normals[it] = n / norm
        offsets[it] = normals[it] @ a

    counts = np.empty(iters, dtype=np.int64)
    chunk = 32
    for start in range(0, iters, chunk):
        sl = slice(start, min(start + chunk, iters))
        dist = np.abs(points @ normals[sl].T - offsets[sl])
        counts[sl] = (dist <= inlier_dist).sum(axis=0)
    best = int(np.argmax(counts))

    support = np.abs(points @ normals[best] - offsets[best]) <= inlier_dist
    centered = points[support] - points[support].mean(axis=0)
    _, _, vh = np.linalg.svd(centered, full_matrices=False)
    normal = _canonical_normal(vh[-1])
    offset = float(normal @ points[support].mean(axis=0))

    mask = np.zeros(depth.data.shape, dtype=bool)
    close = np.abs(points @ normal - offset) <= inlier_dist
    mask[ys[close], xs[close]] = True
    return PlaneFit(normal=normal, offset=offset, inliers=mask)


def _pick(rng: np.random.Generator, candidates: np.ndarray) -> tuple[int, int]:
    # candidates as (n, 2) int (x, y) in (x, y) order
    i = int(rng.integers(len(candidates)))
    return int(candidates[i, 0]), int(candidates[i, 1])


def _gradient_angle(field: ScalarField, pixel, sigma: float, toward_lower: bool) -> float:
    gx, gy = sobel_gradients(gaussian_blur(field, sigma))
    x, y = pixel
    dx, dy = gx.data[y, x], gy.data[y, x]
    if toward_lower:
        dx, dy = -dx, -dy
    if dx == 0.0 and dy == 0.0:
        return 0.0
    angle = float(np.arctan2(dy, dx))
    return np.pi if angle == -np.pi else angle


def _candidates_from_mask(mask: np.ndarray) -> np.ndarray:
    ys, xs = np.nonzero(mask)
    order = np.lexsort((ys, xs))
    return np.column_stack([xs[order], ys[order]])


def baseline_grasp(method: str, depth: DepthImage | None = None,
                   rgb: RgbImage | None = None, cam: CameraModel | None = None,
                   params: DetectorParams = DetectorParams(),
                   seed: int = 0) -> GraspConfig2D:
    """Run one non-learned baseline and return its grasp proposal.

    Candidate pixels come from the method's detector; the pick among them
    is uniform under the seed. No uncertainty is estimated.
    """
    if method not in BASELINE_METHODS:
        raise ParameterError(f"unknown baseline {method!r}; expected one of {BASELINE_METHODS}")
    rng = np.random.default_rng(seed)

    if method.endswith("-color"):
        if rgb is None:
            raise ParameterError(f"{method} needs an rgb image")
        field = normalize_field(grayscale(rgb))
        toward_lower = False
    else:
        if depth is None:
            raise ParameterError(f"{method} needs a depth image")
        field = normalize_field(depth_to_field(depth))
        toward_lower = True

    if method.startswith("canny"):
        edges = canny(field, sigma=params.blur_sigma, low=params.canny_low,
                      high=params.canny_high)
        if not edges.mask.any():
            raise NoCandidatesError(f"{method}: no edge pixels survived")
        mags = edges.magnitude[edges.mask]
        cut = np.percentile(mags, params.intensity_percentile)
        candidates = _candidates_from_mask(edges.mask & (edges.magnitude >= cut))
        if len(candidates) == 0:
            raise NoCandidatesError(f"{method}: intensity cut removed every edge pixel")
        point = _pick(rng, candidates)
        angle = _gradient_angle(field, point, params.blur_sigma, toward_lower)
        return GraspConfig2D(point=point, angle_rad=angle, uncertainty=None,
                             mode=GraspMode.EDGE)

    if method == "segment-edge":
        if cam is None:
            raise ParameterError("segment-edge needs the camera model for plane fitting")
        fit = ransac_plane(depth, cam, iters=params.ransac_iters,
                           inlier_dist=params.ransac_inlier_dist,
                           seed=int(rng.integers(2 ** 31)))
        above = depth.valid & ~fit.inliers
        if not above.any():
            raise NoCandidatesError("segment-edge: everything fits the table plane")
        labels, n = ndimage.label(above, structure=np.ones((3, 3), dtype=int))
        sizes = ndimage.sum_labels(np.ones_like(labels), labels, index=np.arange(1, n + 1))
        comp = labels == (1 + int(np.argmax(sizes)))
        interior = ndimage.binary_erosion(comp, structure=np.ones((3, 3), dtype=int),
                                          border_value=0)
        boundary = comp & ~interior
        if not boundary.any():
            boundary = comp
        point = _pick(rng, _candidates_from_mask(boundary))
        angle = _gradient_angle(field, point, params.blur_sigma, toward_lower=True)
        return GraspConfig2D(point=point, angle_rad=angle, uncertainty=None,
                             mode=GraspMode.EDGE)

    # harris-depth / harris-color
    response = harris(field, k=params.harris_k, window_sigma=params.harris_window_sigma)
    peak = float(response.data.max())
    if peak <= 0.0:
        raise NoCandidatesError(f"{method}: no corner-like response")
    # first max in (x, y) order, the tie-break used everywhere else
    flat = int(np.argmax(response.data.T))
    x, y = divmod(flat, response.height)
    angle = _gradient_angle(field, (x, y), params.blur_sigma, toward_lower)
    return GraspConfig2D(point=(x, y), angle_rad=angle, uncertainty=None,
                         mode=GraspMode.CORNER)
