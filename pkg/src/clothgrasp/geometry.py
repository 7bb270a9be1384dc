"""Pinhole camera math and the 2-d grasp to 6-d plan lift.

World frame: z up, table plane at z = 0. Camera extrinsics map camera
coordinates to world coordinates. The tool frame convention: the approach
axis is the tool z-axis, pointing world-down for a top-down pre-grasp; the
tool x-axis is the slide direction in the workspace plane.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidDepthError, ParameterError
from .imaging import DEPTH_INVALID, DepthImage

DEFAULT_TILT_DEG = 45.0
DEFAULT_Z_OFFSET = 0.015
DEFAULT_PRE_OFFSET = 0.06
DEFAULT_POST_OFFSET = 0.03

_ORTHO_TOL = 1e-9


def _check_rotation(name: str, rot) -> np.ndarray:
    arr = np.asarray(rot, dtype=np.float64)
    if arr.shape != (3, 3):
        raise ParameterError(f"{name} must be 3x3")
    if not np.allclose(arr.T @ arr, np.eye(3), atol=_ORTHO_TOL):
        raise ParameterError(f"{name} is not orthonormal")
    if abs(np.linalg.det(arr) - 1.0) > 1e-6:
        raise ParameterError(f"{name} must have determinant +1")
    return arr


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus a camera-to-world rigid transform."""

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        if not (self.fx > 0.0 and self.fy > 0.0):
            raise ParameterError("focal lengths must be positive")
        rot = _check_rotation("camera rotation", self.rotation)
        t = np.asarray(self.translation, dtype=np.float64)
        if t.shape != (3,):
            raise ParameterError("camera translation must be a 3-vector")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", t)


@dataclass(frozen=True)
class Pose6D:
    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64)
        if pos.shape != (3,):
            raise ParameterError("position must be a 3-vector")
        rot = _check_rotation("orientation", self.orientation)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", rot)


@dataclass(frozen=True)
class SlidePlan:
    """Slide waypoints: both poses share the grasp orientation."""

    pre_slide: Pose6D
    post_slide: Pose6D
    pinch_point: np.ndarray


def deproject(pixel, depth: DepthImage, cam: CameraModel,
              median_fallback: bool = False) -> np.ndarray:
    """Back-project a pixel through its depth into world coordinates.

    An invalid depth reading either raises InvalidDepthError or, with
    median_fallback, takes the median of the valid 3x3 neighborhood.
    Subpixel coordinates are honored by the ray; the depth sample comes
    from the nearest pixel.
    """
    u, v = float(pixel[0]), float(pixel[1])
    x, y = int(round(u)), int(round(v))
    if not (0 <= x < depth.width and 0 <= y < depth.height):
        raise ParameterError(f"pixel {(x, y)} outside {depth.width}x{depth.height} image")
    d = depth.data[y, x]
    if d == DEPTH_INVALID:
        if not median_fallback:
            raise InvalidDepthError(f"invalid depth at pixel {(x, y)}")
        window = depth.data[max(y - 1, 0):y + 2, max(x - 1, 0):x + 2]
        good = window[window != DEPTH_INVALID]
        if len(good) == 0:
            raise InvalidDepthError(f"no valid depth in the 3x3 window at {(x, y)}")
        d = float(np.median(good))
    pc = np.array([(u - cam.cx) * d / cam.fx, (v - cam.cy) * d / cam.fy, d])
    return cam.rotation @ pc + cam.translation


def project(point_w, cam: CameraModel) -> tuple[float, float]:
    """World point to (sub)pixel coordinates."""
    pc = cam.rotation.T @ (np.asarray(point_w, dtype=np.float64) - cam.translation)
    if pc[2] <= 0.0:
        raise DegenerateInputError("point is behind the camera")
    return (cam.fx * pc[0] / pc[2] + cam.cx, cam.fy * pc[1] / pc[2] + cam.cy)


def image_direction(point_w, dir_w, cam: CameraModel) -> tuple[float, float]:
    """Unit image-plane direction of a world direction at a world point.

    Uses the exact projection Jacobian, so no finite differencing.
    """
    pc = cam.rotation.T @ (np.asarray(point_w, dtype=np.float64) - cam.translation)
    if pc[2] <= 0.0:
        raise DegenerateInputError("point is behind the camera")
    dc = cam.rotation.T @ np.asarray(dir_w, dtype=np.float64)
    du = cam.fx * (dc[0] * pc[2] - pc[0] * dc[2]) / (pc[2] * pc[2])
    dv = cam.fy * (dc[1] * pc[2] - pc[1] * dc[2]) / (pc[2] * pc[2])
    norm = math.hypot(du, dv)
    if norm == 0.0:
        raise DegenerateInputError("direction projects to a point")
    return du / norm, dv / norm


def world_yaw(pixel, image_angle: float, depth: DepthImage, cam: CameraModel,
              median_fallback: bool = False) -> float:
    """Map an image-plane angle at a pixel to a yaw in the workspace plane.

    The image direction is lifted to the world direction that lies in the
    z = 0 plane and projects onto it; for a straight-down camera this is
    the image angle passed through the camera yaw.
    """
    p_w = deproject(pixel, depth, cam, median_fallback=median_fallback)
    # columns: image directions of world ex and ey at p_w (unnormalized)
    pc = cam.rotation.T @ (p_w - cam.translation)
    jac = np.empty((2, 2))
    for col, axis in enumerate((np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))):
        dc = cam.rotation.T @ axis
        jac[0, col] = cam.fx * (dc[0] * pc[2] - pc[0] * dc[2]) / (pc[2] * pc[2])
        jac[1, col] = cam.fy * (dc[1] * pc[2] - pc[1] * dc[2]) / (pc[2] * pc[2])
    if abs(np.linalg.det(jac)) < 1e-12:
        raise DegenerateInputError("camera views the workspace plane edge-on")
    v = np.linalg.solve(jac, np.array([math.cos(image_angle), math.sin(image_angle)]))
    return math.atan2(v[1], v[0])


# tool frame at yaw 0: x along world +x, z along world -z
_TOOL_BASE = np.array([
    [1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, -1.0],
])


def rotation_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_about_axis(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about an arbitrary axis."""
    a = np.asarray(axis, dtype=np.float64)
    norm = np.linalg.norm(a)
    if norm == 0.0:
        raise ParameterError("rotation axis must be nonzero")
    a = a / norm
    kmat = np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])
    return np.eye(3) + math.sin(angle) * kmat + (1.0 - math.cos(angle)) * (kmat @ kmat)


def pregrasp_pose(point_w, yaw: float) -> Pose6D:
    """Top-down tool pose above a world point, slide axis at `yaw`."""
    return Pose6D(position=np.asarray(point_w, dtype=np.float64),
                  orientation=rotation_z(yaw) @ _TOOL_BASE)


def tilt_pose(pose: Pose6D, tilt_deg: float = DEFAULT_TILT_DEG,
              z_offset: float = DEFAULT_Z_OFFSET) -> Pose6D:
    """Tilt about the pose's own x-axis and raise it off the surface.

    The x-axis is a world-frame invariant of the tilt, so two successive
    tilts compose into one of the summed angle.
    """
    if not (0.0 < tilt_deg < 90.0):
        raise ParameterError(f"tilt must lie in (0, 90) degrees, got {tilt_deg!r}")
    axis = pose.orientation[:, 0]
    rot = rotation_about_axis(axis, math.radians(tilt_deg))
    return Pose6D(position=pose.position + np.array([0.0, 0.0, z_offset]),
                  orientation=rot @ pose.orientation)


def slide_plan(grasp: Pose6D, yaw: float,
               pre_offset: float = DEFAULT_PRE_OFFSET,
               post_offset: float = DEFAULT_POST_OFFSET) -> SlidePlan:
    """Straight slide through the grasp point along the yaw direction."""
    if pre_offset <= 0.0 or post_offset <= 0.0:
        raise ParameterError("slide offsets must be positive")
    u = np.array([math.cos(yaw), math.sin(yaw), 0.0])
    return SlidePlan(
        pre_slide=Pose6D(position=grasp.position - pre_offset * u,
                         orientation=grasp.orientation),
        post_slide=Pose6D(position=grasp.position + post_offset * u,
                          orientation=grasp.orientation),
        pinch_point=grasp.position.copy())


def quat_wxyz(rot: np.ndarray) -> np.ndarray:
    """Rotation matrix to quaternion (w, x, y, z), canonicalized to w >= 0."""
    from scipy.spatial.transform import Rotation

    x, y, z, w = Rotation.from_matrix(np.asarray(rot, dtype=np.float64)).as_quat()
    q = np.array([w, x, y, z])
    if q[0] < 0.0 or (q[0] == 0.0 and q[np.nonzero(q)[0][0]] < 0.0):
        q = -q
    # normalize -0.0 for stable serialization
    return q + 0.0


@dataclass(frozen=True)
class GraspPlan3D:
    """Full lift of an image-space grasp: poses plus the slide waypoints."""

    point_w: np.ndarray
    yaw: float
    pregrasp: Pose6D
    grasp: Pose6D
    slide: SlidePlan


def plan_grasp(pixel, image_angle: float, depth: DepthImage, cam: CameraModel,
               tilt_deg: float = DEFAULT_TILT_DEG,
               z_offset: float = DEFAULT_Z_OFFSET,
               pre_offset: float = DEFAULT_PRE_OFFSET,
               post_offset: float = DEFAULT_POST_OFFSET,
               median_fallback: bool = True) -> GraspPlan3D:
    """Lift a 2-d grasp to the tilted pose and slide waypoints."""
    point_w = deproject(pixel, depth, cam, median_fallback=median_fallback)
    yaw = world_yaw(pixel, image_angle, depth, cam, median_fallback=median_fallback)
    pre = pregrasp_pose(point_w, yaw)
    grasp = tilt_pose(pre, tilt_deg=tilt_deg, z_offset=z_offset)
    slide = slide_plan(grasp, yaw, pre_offset=pre_offset, post_offset=post_offset)
    return GraspPlan3D(point_w=point_w, yaw=yaw, pregrasp=pre, grasp=grasp, slide=slide)
