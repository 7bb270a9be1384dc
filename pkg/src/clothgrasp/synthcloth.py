"""Synthetic folded-cloth scenes with exact ground truth.

The cloth is a square grid mesh whose vertices remember their material
(uv) coordinates forever. A fold reflects every vertex strictly on one
side of a line in the xy-plane and drops the moved piece onto whatever
lies under its landing position, one layer up. Layer L sits at
z = table + (L + 1) * thickness.

Because folds act on vertices and uv rides along, ground-truth labels are
computed in uv space where they are exact: the outer band is within 1.5 cm
of the material boundary, the inner band within [1.5, 3.0) cm, and corners
are the four 3x3 cm material squares. The true inward direction at an
edge pixel is the flat-cloth inward normal pushed through the accumulated
fold reflections and projected into the image.

Rendering is a z-buffer over the mesh triangles; ties go to the earlier
triangle, so renders are deterministic.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import NoCandidatesError, ParameterError
from .geometry import CameraModel
from .graspsel import GraspConfig2D, GraspMode
from .imaging import DepthImage, RgbImage, save_depth_png, save_rgb_png
from .regions import RegionMask, RegionProbMap, mask_from_planes, save_probmap

TABLE_Z = 0.0
DEFAULT_SIDE = 0.3048          # a 12 inch towel
DEFAULT_THICKNESS = 0.002
DEFAULT_RES = 33
DEFAULT_NOISE_SIGMA = 0.002
OUTER_BAND = 0.015
INNER_BAND = 0.030
CORNER_BOX = 0.030
WORKSPACE_SIDE = 0.6
CAMERA_HEIGHT = 0.7

_CLOTH_COLOR = (240, 240, 240)
_TABLE_COLOR = (40, 40, 45)


@dataclass(frozen=True)
class FoldLine:
    """A directed line in the xy-plane; the left side (positive side of
    the rotated normal) is the part that folds over."""

    point: tuple[float, float]
    direction: tuple[float, float]

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        norm = np.linalg.norm(d)
        if norm == 0.0:
            raise ParameterError("fold line direction must be nonzero")
        object.__setattr__(self, "point", (float(self.point[0]), float(self.point[1])))
        object.__setattr__(self, "direction", (float(d[0] / norm), float(d[1] / norm)))

    @property
    def normal(self) -> np.ndarray:
        dx, dy = self.direction
        return np.array([-dy, dx])


@dataclass(frozen=True)
class ClothModel:
    """Vertex grid with material coordinates, stacking layers, and the
    accumulated in-plane isometry per vertex (uv direction -> world)."""

    side: float
    thickness: float
    res: int
    uv: np.ndarray
    xy: np.ndarray
    layer: np.ndarray
    frames: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return TABLE_Z + (self.layer + 1.0) * self.thickness

    @property
    def triangles(self) -> np.ndarray:
        return _grid_triangles(self.res)

    @property
    def centroid(self) -> np.ndarray:
        return self.xy.mean(axis=0)


def _grid_triangles(res: int) -> np.ndarray:
    ix, iy = np.meshgrid(np.arange(res - 1), np.arange(res - 1), indexing="xy")
    v00 = (iy * res + ix).ravel()
    v10 = v00 + 1
    v01 = v00 + res
    v11 = v01 + 1
    return np.concatenate([
        np.stack([v00, v10, v11], axis=1),
        np.stack([v00, v11, v01], axis=1),
    ])


def make_flat(side: float = DEFAULT_SIDE, res: int = DEFAULT_RES,
              thickness: float = DEFAULT_THICKNESS) -> ClothModel:
    """A flat square cloth on the table, layer 0, uv == xy."""
    if side <= 0.0 or thickness <= 0.0:
        raise ParameterError("side and thickness must be positive")
    if res < 2:
        raise ParameterError("grid resolution must be at least 2")
    axis = np.linspace(0.0, side, res)
    gx, gy = np.meshgrid(axis, axis, indexing="xy")
    uv = np.column_stack([gx.ravel(), gy.ravel()])
    frames = np.broadcast_to(np.eye(2), (res * res, 2, 2)).copy()
    return ClothModel(side=side, thickness=thickness, res=res,
                      uv=uv, xy=uv.copy(),
                      layer=np.zeros(res * res, dtype=np.int64),
                      frames=frames)


def _max_layer_under(points: np.ndarray, tri_xy: np.ndarray,
                     tri_layer: np.ndarray) -> np.ndarray:
    """Highest layer of any given triangle containing each point, -1 if none."""
    if len(tri_xy) == 0:
        return np.full(len(points), -1, dtype=np.int64)
    a, b, c = tri_xy[:, 0], tri_xy[:, 1], tri_xy[:, 2]
    den = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    ok = np.abs(den) > 1e-14
    a, b, c, den, tri_layer = a[ok], b[ok], c[ok], den[ok], tri_layer[ok]
    if len(den) == 0:
        return np.full(len(points), -1, dtype=np.int64)

    px = points[:, 0][:, None]
    py = points[:, 1][:, None]
    wa = ((b[:, 0] - px) * (c[:, 1] - py) - (b[:, 1] - py) * (c[:, 0] - px)) / den
    wb = ((c[:, 0] - px) * (a[:, 1] - py) - (c[:, 1] - py) * (a[:, 0] - px)) / den
    wc = 1.0 - wa - wb
    eps = 1e-9
    inside = (wa >= -eps) & (wb >= -eps) & (wc >= -eps)
    return np.where(inside, tri_layer[None, :], -1).max(axis=1)


def apply_fold(cloth: ClothModel, line: FoldLine) -> ClothModel:
    """Reflect the vertices strictly left of the line onto the stack.

    Moved vertices land one layer above the highest static cloth under
    their new position (or on the table where nothing is under). The
    move is an isometry of the xy-plane, and uv is untouched.
    """
    n = line.normal
    s = (cloth.xy - np.asarray(line.point)) @ n
    moving = s > 0.0
    if not moving.any():
        return cloth

    mirror = np.eye(2) - 2.0 * np.outer(n, n)
    xy = cloth.xy.copy()
    xy[moving] = cloth.xy[moving] - 2.0 * s[moving, None] * n

    frames = cloth.frames.copy()
    frames[moving] = mirror @ frames[moving]

    tris = cloth.triangles
    static_tris = tris[~moving[tris].any(axis=1)]
    layer = cloth.layer.copy()
    under = _max_layer_under(xy[moving], cloth.xy[static_tris],
                             cloth.layer[static_tris].max(axis=1))
    layer[moving] = under + 1

    return ClothModel(side=cloth.side, thickness=cloth.thickness, res=cloth.res,
                      uv=cloth.uv, xy=xy, layer=layer, frames=frames)


def rigid_move(cloth: ClothModel, angle: float, offset=(0.0, 0.0)) -> ClothModel:
    """Rotate about the centroid and translate; layers are unchanged."""
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    center = cloth.centroid
    xy = (cloth.xy - center) @ rot.T + center + np.asarray(offset, dtype=np.float64)
    frames = np.einsum("ij,njk->nik", rot, cloth.frames)
    return ClothModel(side=cloth.side, thickness=cloth.thickness, res=cloth.res,
                      uv=cloth.uv, xy=xy, layer=cloth.layer, frames=frames)


def default_camera(width: int = 640, height: int = 576) -> CameraModel:
    """Straight-down camera centered over the workspace.

    Focal length scales with width so the field of view (and hence the
    visible workspace) is the same at reduced render sizes.
    """
    f = 525.0 * width / 640.0
    return CameraModel(fx=f, fy=f,
                       cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
                       rotation=np.diag([1.0, -1.0, -1.0]),
                       translation=np.array([0.0, 0.0, CAMERA_HEIGHT]))


@dataclass(frozen=True)
class GroundTruth:
    """Per-pixel truth rasters; directions are NaN where undefined."""

    corner: np.ndarray
    outer: np.ndarray
    inner: np.ndarray
    edge_dir: np.ndarray
    corner_dir: np.ndarray
    top_layer: np.ndarray


def render(cloth: ClothModel, cam: CameraModel, width: int = 640, height: int = 576,
           noise_sigma: float = 0.0,
           rng: np.random.Generator | None = None) -> tuple[DepthImage, RgbImage, GroundTruth]:
    """Z-buffer render of the cloth over the table plane.

    Returns the noisy depth raster, a two-tone color render, and the exact
    ground truth (computed before noise is applied).
    """
    if noise_sigma < 0.0:
        raise ParameterError("noise_sigma must be non-negative")
    if noise_sigma > 0.0 and rng is None:
        raise ParameterError("noisy renders need an rng for determinism")
    rot = cam.rotation
    campos = cam.translation

    verts_w = np.column_stack([cloth.xy, cloth.z])
    verts_c = (verts_w - campos) @ rot
    if np.any(verts_c[:, 2] <= 0.0):
        raise ParameterError("cloth must be in front of the camera")
    su = cam.fx * verts_c[:, 0] / verts_c[:, 2] + cam.cx
    sv = cam.fy * verts_c[:, 1] / verts_c[:, 2] + cam.cy

    # per-pixel camera rays and the table-plane depth they hit
    xs = (np.arange(width) - cam.cx) / cam.fx
    ys = (np.arange(height) - cam.cy) / cam.fy
    rcx, rcy = np.meshgrid(xs, ys)
    dirw_z = rot[2, 0] * rcx + rot[2, 1] * rcy + rot[2, 2]
    if np.any(dirw_z >= 0.0):
        raise ParameterError("camera must look down at the table everywhere in frame")
    zbuf = (TABLE_Z - campos[2]) / dirw_z
    tri_of = np.full((height, width), -1, dtype=np.int64)

    tris = cloth.triangles
    ta, tb, tc = verts_c[tris[:, 0]], verts_c[tris[:, 1]], verts_c[tris[:, 2]]
    tri_normal = np.cross(tb - ta, tc - ta)
    tri_plane_d = np.einsum("ij,ij->i", tri_normal, ta)

    for t in range(len(tris)):
        i0, i1, i2 = tris[t]
        u0, u1, u2 = su[i0], su[i1], su[i2]
        v0, v1, v2 = sv[i0], sv[i1], sv[i2]
        x_lo = max(int(math.ceil(min(u0, u1, u2))), 0)
        x_hi = min(int(math.floor(max(u0, u1, u2))), width - 1)
        y_lo = max(int(math.ceil(min(v0, v1, v2))), 0)
        y_hi = min(int(math.floor(max(v0, v1, v2))), height - 1)
        if x_lo > x_hi or y_lo > y_hi:
            continue
        den = (u1 - u0) * (v2 - v0) - (v1 - v0) * (u2 - u0)
        if abs(den) < 1e-12:
            continue
        gx = np.arange(x_lo, x_hi + 1)[None, :]
        gy = np.arange(y_lo, y_hi + 1)[:, None]
        wa = ((u1 - gx) * (v2 - gy) - (v1 - gy) * (u2 - gx)) / den
        wb = ((u2 - gx) * (v0 - gy) - (v2 - gy) * (u0 - gx)) / den
        wc = 1.0 - wa - wb
        eps = 1e-12
        inside = (wa >= -eps) & (wb >= -eps) & (wc >= -eps)
        if not inside.any():
            continue
        n = tri_normal[t]
        ndot = n[0] * rcx[y_lo:y_hi + 1, x_lo:x_hi + 1] + n[1] * rcy[y_lo:y_hi + 1, x_lo:x_hi + 1] + n[2]
        with np.errstate(divide="ignore", invalid="ignore"):
            z_hit = tri_plane_d[t] / ndot
        zview = zbuf[y_lo:y_hi + 1, x_lo:x_hi + 1]
        win = inside & np.isfinite(z_hit) & (z_hit > 0.0) & (z_hit < zview - 1e-12)
        if not win.any():
            continue
        zview[win] = z_hit[win]
        tri_of[y_lo:y_hi + 1, x_lo:x_hi + 1][win] = t

    truth = _ground_truth(cloth, cam, tri_of, zbuf, rcx, rcy)

    depth = zbuf
    if noise_sigma > 0.0:
        depth = depth + rng.normal(0.0, noise_sigma, size=depth.shape)
        depth = np.clip(depth, 1e-6, None)  # keep clear of the invalid sentinel

    rgb = np.empty((height, width, 3), dtype=np.uint8)
    on_cloth = tri_of >= 0
    for ch in range(3):
        rgb[..., ch] = np.where(on_cloth, _CLOTH_COLOR[ch], _TABLE_COLOR[ch])
    return DepthImage(depth), RgbImage(rgb), truth


def _ground_truth(cloth: ClothModel, cam: CameraModel, tri_of: np.ndarray,
                  zbuf: np.ndarray, rcx: np.ndarray, rcy: np.ndarray) -> GroundTruth:
    height, width = tri_of.shape
    shape = (height, width)
    corner = np.zeros(shape, dtype=bool)
    outer = np.zeros(shape, dtype=bool)
    inner = np.zeros(shape, dtype=bool)
    edge_dir = np.full(shape + (2,), np.nan)
    corner_dir = np.full(shape + (2,), np.nan)
    top_layer = np.full(shape, -1, dtype=np.int64)

    pix_y, pix_x = np.nonzero(tri_of >= 0)
    if len(pix_y) == 0:
        return GroundTruth(corner, outer, inner, edge_dir, corner_dir, top_layer)

    tris = cloth.triangles
    rot = cam.rotation
    t_idx = tri_of[pix_y, pix_x]
    tri_verts = tris[t_idx]
    verts_w = np.column_stack([cloth.xy, cloth.z])
    verts_c = (verts_w - cam.translation) @ rot

    z = zbuf[pix_y, pix_x]
    hit_c = np.column_stack([rcx[pix_y, pix_x] * z, rcy[pix_y, pix_x] * z, z])

    a = verts_c[tri_verts[:, 0]]
    e1 = verts_c[tri_verts[:, 1]] - a
    e2 = verts_c[tri_verts[:, 2]] - a
    r = hit_c - a
    g11 = np.einsum("ij,ij->i", e1, e1)
    g12 = np.einsum("ij,ij->i", e1, e2)
    g22 = np.einsum("ij,ij->i", e2, e2)
    r1 = np.einsum("ij,ij->i", e1, r)
    r2 = np.einsum("ij,ij->i", e2, r)
    det = g11 * g22 - g12 * g12
    alpha = (g22 * r1 - g12 * r2) / det
    beta = (g11 * r2 - g12 * r1) / det

    uv_a = cloth.uv[tri_verts[:, 0]]
    uv = uv_a + alpha[:, None] * (cloth.uv[tri_verts[:, 1]] - uv_a) \
        + beta[:, None] * (cloth.uv[tri_verts[:, 2]] - uv_a)
    uv = np.clip(uv, 0.0, cloth.side)

    side = cloth.side
    walls = np.stack([uv[:, 0], uv[:, 1], side - uv[:, 0], side - uv[:, 1]], axis=1)
    clearance = walls.min(axis=1)
    in_corner_box = (((uv[:, 0] < CORNER_BOX) | (uv[:, 0] > side - CORNER_BOX))
                     & ((uv[:, 1] < CORNER_BOX) | (uv[:, 1] > side - CORNER_BOX)))
    is_outer = clearance < OUTER_BAND
    is_inner = (clearance >= OUTER_BAND) & (clearance < INNER_BAND) & ~in_corner_box

    corner[pix_y, pix_x] = in_corner_box
    outer[pix_y, pix_x] = is_outer
    inner[pix_y, pix_x] = is_inner
    top_layer[pix_y, pix_x] = cloth.layer[tri_verts].max(axis=1)

    # inward normal in uv space: toward the nearest wall's opposite
    wall_normals = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    n_uv_edge = wall_normals[walls.argmin(axis=1)]
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    n_uv_corner = np.stack([
        np.where(uv[:, 0] <= side / 2.0, inv_sqrt2, -inv_sqrt2),
        np.where(uv[:, 1] <= side / 2.0, inv_sqrt2, -inv_sqrt2),
    ], axis=1)

    # dominant vertex carries the accumulated fold isometry for the pixel
    w_all = np.stack([1.0 - alpha - beta, alpha, beta], axis=1)
    dominant = tri_verts[np.arange(len(t_idx)), w_all.argmax(axis=1)]
    frames = cloth.frames[dominant]

    for n_uv, sel, target in ((n_uv_edge, is_outer, edge_dir),
                              (n_uv_corner, in_corner_box, corner_dir)):
        if not sel.any():
            continue
        world2 = np.einsum("nij,nj->ni", frames[sel], n_uv[sel])
        dir_w = np.column_stack([world2, np.zeros(sel.sum())])
        dc = dir_w @ rot
        pc = hit_c[sel]
        du = cam.fx * (dc[:, 0] * pc[:, 2] - pc[:, 0] * dc[:, 2]) / (pc[:, 2] ** 2)
        dv = cam.fy * (dc[:, 1] * pc[:, 2] - pc[:, 1] * dc[:, 2]) / (pc[:, 2] ** 2)
        norm = np.hypot(du, dv)
        norm[norm == 0.0] = 1.0
        target[pix_y[sel], pix_x[sel], 0] = du / norm
        target[pix_y[sel], pix_x[sel], 1] = dv / norm

    return GroundTruth(corner, outer, inner, edge_dir, corner_dir, top_layer)


@dataclass(frozen=True)
class SynthScene:
    cloth: ClothModel
    depth: DepthImage
    rgb: RgbImage
    truth: GroundTruth
    cam: CameraModel
    seed: int
    folds: tuple[FoldLine, ...]
    rotation: float
    translation: tuple[float, float]
    noise_sigma: float

    def masks(self) -> RegionMask:
        return mask_from_planes(self.truth.corner, self.truth.outer, self.truth.inner)


def random_scene(seed: int, n_folds=(1, 3), side: float = DEFAULT_SIDE,
                 res: int = DEFAULT_RES, thickness: float = DEFAULT_THICKNESS,
                 noise_sigma: float = DEFAULT_NOISE_SIGMA,
                 width: int = 640, height: int = 576,
                 cam: CameraModel | None = None) -> SynthScene:
    """Fold, place, and render one seeded scene.

    n_folds is either an int or an inclusive (lo, hi) range. The folded
    cloth is rotated uniformly and translated so it stays inside the
    0.6 x 0.6 m workspace under the camera.
    """
    if cam is None:
        cam = default_camera(width, height)
    rng = np.random.default_rng(seed)
    cloth = make_flat(side=side, res=res, thickness=thickness)

    if isinstance(n_folds, int):
        lo = hi = n_folds
    else:
        lo, hi = n_folds
    if not (0 <= lo <= hi):
        raise ParameterError(f"bad fold range ({lo}, {hi})")
    count = int(rng.integers(lo, hi + 1))

    folds = []
    for _ in range(count):
        for _attempt in range(50):
            pivot = cloth.xy[int(rng.integers(len(cloth.xy)))]
            theta = rng.uniform(0.0, 2.0 * math.pi)
            line = FoldLine(point=(pivot[0], pivot[1]),
                            direction=(math.cos(theta), math.sin(theta)))
            s = (cloth.xy - np.asarray(line.point)) @ line.normal
            # a fold should move a real piece and leave a real piece behind
            frac = float((s > 1e-9).mean())
            if 0.05 <= frac <= 0.95:
                cloth = apply_fold(cloth, line)
                folds.append(line)
                break

    rotation = float(rng.uniform(0.0, 2.0 * math.pi))
    cloth = rigid_move(cloth, rotation)

    half = WORKSPACE_SIDE / 2.0
    lo_xy = cloth.xy.min(axis=0)
    hi_xy = cloth.xy.max(axis=0)
    ext = (hi_xy - lo_xy) / 2.0
    mid = (hi_xy + lo_xy) / 2.0
    slack = np.maximum(half - ext, 0.0)
    target = rng.uniform(-slack, slack)
    shift = target - mid
    cloth = rigid_move(cloth, 0.0, shift)

    depth, rgb, truth = render(cloth, cam, width=width, height=height,
                               noise_sigma=noise_sigma, rng=rng)
    return SynthScene(cloth=cloth, depth=depth, rgb=rgb, truth=truth, cam=cam,
                      seed=seed, folds=tuple(folds), rotation=rotation,
                      translation=(float(shift[0]), float(shift[1])),
                      noise_sigma=noise_sigma)


# -- evaluation ------------------------------------------------------------


class FailureReason(Enum):
    NONE = "none"
    MISDETECTION = "misdetection"
    DIRECTION_ERROR = "direction_error"
    NO_CANDIDATES = "no_candidates"


@dataclass(frozen=True)
class GraspOutcome:
    success: bool
    reason: FailureReason
    angular_error_deg: float | None = None


def _wrap_angle(a: float) -> float:
    return math.atan2(math.sin(a), math.cos(a))


def _approach_free(scene: SynthScene, pixel, angle: float,
                   clearance_m: float = 0.02) -> bool:
    """True when marching opposite the grasp direction leaves the cloth
    silhouette within clearance_m (the slide approach is unobstructed)."""
    x, y = pixel
    depth = scene.depth.data[y, x]
    m_per_px = depth / scene.cam.fx
    step_px = 0.5
    n_steps = int(math.floor(clearance_m / (m_per_px * step_px)))
    h, w = scene.truth.top_layer.shape
    cx, sy = math.cos(angle), math.sin(angle)
    for j in range(1, n_steps + 1):
        px = int(round(x - cx * j * step_px))
        py = int(round(y - sy * j * step_px))
        if not (0 <= px < w and 0 <= py < h):
            return True
        if scene.truth.top_layer[py, px] < 0:
            return True
    return False


def evaluate(grasp: GraspConfig2D, scene: SynthScene,
             dir_tol_deg: float = 45.0) -> GraspOutcome:
    """Score a proposed grasp against the scene's ground truth.

    Success needs (a) the right label on the top visible layer at the
    grasp pixel, (b) angular error within dir_tol_deg of the true inward
    direction, and (c) a free approach behind the pixel.
    """
    if dir_tol_deg < 0.0:
        raise ParameterError("dir_tol_deg must be non-negative")
    x, y = grasp.point
    h, w = scene.truth.top_layer.shape
    if not (0 <= x < w and 0 <= y < h):
        raise ParameterError(f"grasp pixel {grasp.point} outside the {w}x{h} image")

    if grasp.mode is GraspMode.CORNER:
        labeled = scene.truth.corner[y, x]
        true_vec = scene.truth.corner_dir[y, x]
    else:
        labeled = scene.truth.outer[y, x]
        true_vec = scene.truth.edge_dir[y, x]
    if not labeled or not np.all(np.isfinite(true_vec)):
        return GraspOutcome(False, FailureReason.MISDETECTION)

    true_angle = math.atan2(true_vec[1], true_vec[0])
    err_deg = abs(math.degrees(_wrap_angle(grasp.angle_rad - true_angle)))
    if err_deg > dir_tol_deg:
        return GraspOutcome(False, FailureReason.DIRECTION_ERROR, err_deg)
    if not _approach_free(scene, grasp.point, grasp.angle_rad):
        return GraspOutcome(False, FailureReason.DIRECTION_ERROR, err_deg)
    return GraspOutcome(True, FailureReason.NONE, err_deg)


def gt_grasp(scene: SynthScene, mode: GraspMode = GraspMode.EDGE) -> GraspConfig2D:
    """First ground-truth grasp, in (x, y) order, that is actually free.

    Scans labeled pixels with their true direction and returns the first
    one whose approach is free; raises NoCandidatesError if none exists.
    """
    plane = scene.truth.outer if mode is GraspMode.EDGE else scene.truth.corner
    dirs = scene.truth.edge_dir if mode is GraspMode.EDGE else scene.truth.corner_dir
    ys, xs = np.nonzero(plane)
    order = np.lexsort((ys, xs))
    ys, xs = ys[order], xs[order]
    for y, x in zip(ys, xs):
        vec = dirs[y, x]
        if not np.all(np.isfinite(vec)):
            continue
        angle = math.atan2(vec[1], vec[0])
        if _approach_free(scene, (x, y), angle):
            return GraspConfig2D(point=(int(x), int(y)), angle_rad=angle,
                                 uncertainty=None, mode=mode)
    raise NoCandidatesError("scene has no free ground-truth grasp")


# -- benchmark -------------------------------------------------------------

OURS = "ours"
ABLATION_NO_DIRECTION = "no-direction-prediction"
ABLATION_NO_UNCERTAINTY = "no-directional-uncertainty"

_METHOD_ALIASES = {
    "nodp": ABLATION_NO_DIRECTION,
    "nodu": ABLATION_NO_UNCERTAINTY,
}


def canonical_method(name: str) -> str:
    from .detectors import BASELINE_METHODS

    key = name.strip().lower()
    key = _METHOD_ALIASES.get(key, key)
    known = (OURS, ABLATION_NO_DIRECTION, ABLATION_NO_UNCERTAINTY) + BASELINE_METHODS
    if key not in known:
        raise ParameterError(f"unknown method {name!r}; expected one of {known}")
    return key


@dataclass(frozen=True)
class BenchRow:
    method: str
    scenes: int
    successes: int
    rate: float
    misdetection: int
    direction_error: int
    no_candidates: int


def _scene_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _method_seed(seed: int, index: int, method: str) -> int:
    from .detectors import BASELINE_METHODS

    registry = (OURS, ABLATION_NO_DIRECTION, ABLATION_NO_UNCERTAINTY) + BASELINE_METHODS
    return int(np.random.SeedSequence([seed, index, 7 + registry.index(method)])
               .generate_state(1)[0])


def run_method(method: str, scene: SynthScene, mode: GraspMode, k: int,
               seed: int, params=None) -> GraspConfig2D:
    """Run one method on one scene; learned-mask methods read the ground
    truth labels, baselines read the raw renders."""
    from .detectors import DetectorParams, baseline_grasp
    from .graspsel import (ablation_no_direction_prediction,
                           ablation_no_directional_uncertainty, select_grasp)

    if params is None:
        params = DetectorParams()
    if method == OURS:
        return select_grasp(scene.masks(), mode=mode, k=k)
    if method == ABLATION_NO_DIRECTION:
        if mode is not GraspMode.EDGE:
            raise ParameterError("ablations are defined for edge mode only")
        return ablation_no_direction_prediction(scene.masks(), seed)
    if method == ABLATION_NO_UNCERTAINTY:
        if mode is not GraspMode.EDGE:
            raise ParameterError("ablations are defined for edge mode only")
        return ablation_no_directional_uncertainty(scene.masks(), seed)
    return baseline_grasp(method, depth=scene.depth, rgb=scene.rgb,
                          cam=scene.cam, params=params, seed=seed)


def benchmark(methods, n_scenes: int, seed: int, mode: GraspMode = GraspMode.EDGE,
              dir_tol_deg: float = 45.0, k: int = 100, n_folds=(1, 3),
              noise_sigma: float = DEFAULT_NOISE_SIGMA, side: float = DEFAULT_SIDE,
              res: int = DEFAULT_RES, params=None,
              scenes: list[SynthScene] | None = None) -> list[BenchRow]:
    """Run the listed methods over seeded random scenes and tally outcomes.

    Scene i is generated from a seed derived from (seed, i), and each
    method draws from its own derived stream, so adding or removing
    methods never changes anyone else's picks. Pass `scenes` to reuse
    pre-generated scenes for the same (seed, n_scenes).
    """
    if n_scenes < 1:
        raise ParameterError("n_scenes must be positive")
    names = [canonical_method(m) for m in methods]
    if scenes is None:
        scenes = [random_scene(_scene_seed(seed, i), n_folds=n_folds, side=side,
                               res=res, noise_sigma=noise_sigma)
                  for i in range(n_scenes)]
    elif len(scenes) != n_scenes:
        raise ParameterError("scenes list does not match n_scenes")

    rows = []
    for method in names:
        tally = {FailureReason.MISDETECTION: 0, FailureReason.DIRECTION_ERROR: 0,
                 FailureReason.NO_CANDIDATES: 0}
        successes = 0
        for i, scene in enumerate(scenes):
            try:
                grasp = run_method(method, scene, mode, k,
                                   _method_seed(seed, i, method), params)
            except NoCandidatesError:
                tally[FailureReason.NO_CANDIDATES] += 1
                continue
            outcome = evaluate(grasp, scene, dir_tol_deg=dir_tol_deg)
            if outcome.success:
                successes += 1
            else:
                tally[outcome.reason] += 1
        rows.append(BenchRow(method=method, scenes=n_scenes, successes=successes,
                             rate=successes / n_scenes,
                             misdetection=tally[FailureReason.MISDETECTION],
                             direction_error=tally[FailureReason.DIRECTION_ERROR],
                             no_candidates=tally[FailureReason.NO_CANDIDATES]))
    return rows


# -- scene bundles on disk -------------------------------------------------


def _merged_direction(truth: GroundTruth) -> np.ndarray:
    """One direction plane: edge direction on outer pixels, corner
    direction on remaining corner pixels, NaN elsewhere."""
    merged = np.where(np.isfinite(truth.edge_dir), truth.edge_dir, truth.corner_dir)
    return merged


def save_bundle(scene: SynthScene, directory, stem: str) -> dict:
    """Write the scene's file bundle; returns the path map."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "depth": directory / f"{stem}.depth.png",
        "rgb": directory / f"{stem}.rgb.png",
        "regions": directory / f"{stem}.regions.png",
        "truth": directory / f"{stem}.truth.png",
        "meta": directory / f"{stem}.meta.json",
    }
    save_depth_png(scene.depth, paths["depth"])
    save_rgb_png(scene.rgb, paths["rgb"])
    save_probmap(RegionProbMap(corner=scene.truth.corner.astype(np.float64),
                               outer=scene.truth.outer.astype(np.float64),
                               inner=scene.truth.inner.astype(np.float64)),
                 paths["regions"])

    merged = _merged_direction(scene.truth)
    h, w = scene.truth.top_layer.shape
    truth_png = np.zeros((h, w, 3), dtype=np.uint8)
    defined = np.all(np.isfinite(merged), axis=2)
    truth_png[..., 0] = np.where(defined, np.round((np.nan_to_num(merged[..., 0]) + 1.0) / 2.0 * 255.0), 128)
    truth_png[..., 1] = np.where(defined, np.round((np.nan_to_num(merged[..., 1]) + 1.0) / 2.0 * 255.0), 128)
    truth_png[..., 2] = np.clip(scene.truth.top_layer + 1, 0, 255).astype(np.uint8)
    from PIL import Image

    Image.fromarray(truth_png, mode="RGB").save(paths["truth"], format="PNG")

    extrinsic = np.eye(4)
    extrinsic[:3, :3] = scene.cam.rotation
    extrinsic[:3, 3] = scene.cam.translation
    meta = {
        "width": w,
        "height": h,
        "fx": scene.cam.fx,
        "fy": scene.cam.fy,
        "cx": scene.cam.cx,
        "cy": scene.cam.cy,
        "extrinsic": [float(v) for v in extrinsic.ravel()],
        "seed": scene.seed,
        "side": scene.cloth.side,
        "thickness": scene.cloth.thickness,
        "resolution": scene.cloth.res,
        "noise_sigma": scene.noise_sigma,
        "rotation": scene.rotation,
        "translation": list(scene.translation),
        "folds": [{"point": list(f.point), "direction": list(f.direction)}
                  for f in scene.folds],
    }
    paths["meta"].write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return paths


def load_camera_meta(path) -> CameraModel:
    """Camera model from a scene bundle's meta.json."""
    from .errors import FormatError

    try:
        meta = json.loads(Path(path).read_text())
        extrinsic = np.asarray(meta["extrinsic"], dtype=np.float64).reshape(4, 4)
        return CameraModel(fx=float(meta["fx"]), fy=float(meta["fy"]),
                           cx=float(meta["cx"]), cy=float(meta["cy"]),
                           rotation=extrinsic[:3, :3],
                           translation=extrinsic[:3, 3])
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad camera metadata ({exc})") from exc
