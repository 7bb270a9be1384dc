"""Raster containers and the low-level filtering used by every detector.

Conventions used throughout the package:

* pixel coordinates are ``(x, y)`` with ``x`` the column and ``y`` the row;
* arrays are indexed ``[y, x]``;
* depth rasters store meters with ``0.0`` marking invalid (dropout) pixels;
* all border handling is clamp-to-edge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .errors import DegenerateInputError, FormatError, ParameterError

# ITU-R 601 luma weights.
_LUMA_R = 0.299
_LUMA_G = 0.587
_LUMA_B = 0.114

DEPTH_INVALID = 0.0


@dataclass(frozen=True)
class ScalarField:
    """A single-channel float raster, finite everywhere."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ParameterError("scalar field must be a non-empty 2-d array")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("scalar field must be finite everywhere")
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class DepthImage:
    """Depth raster in meters; 0.0 is the invalid-pixel sentinel."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ParameterError("depth image must be a non-empty 2-d array")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
            raise ParameterError("depth values must be finite and non-negative")
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def valid(self) -> np.ndarray:
        return self.data != DEPTH_INVALID


@dataclass(frozen=True)
class RgbImage:
    """8-bit color raster, shape (h, w, 3)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.size == 0:
            raise ParameterError("rgb image must have shape (h, w, 3)")
        if arr.dtype != np.uint8:
            raise ParameterError("rgb image must be uint8")
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


def grayscale(img: RgbImage) -> ScalarField:
    """Convert to luma in [0, 1] with the ITU-R 601 weights.

    Parameters
    ----------
    img : RgbImage

    Returns
    -------
    ScalarField
        ``0.299 R + 0.587 G + 0.114 B`` scaled from [0, 255] to [0, 1].
    """
    rgb = img.data.astype(np.float64) / 255.0
    return ScalarField(_LUMA_R * rgb[..., 0] + _LUMA_G * rgb[..., 1] + _LUMA_B * rgb[..., 2])


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Discrete 1-d Gaussian, radius ceil(3 sigma), normalized to sum 1."""
    if not (sigma > 0.0) or not math.isfinite(sigma):
        raise ParameterError(f"sigma must be positive, got {sigma!r}")
    radius = math.ceil(3.0 * sigma)
    taps = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(taps ** 2) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def gaussian_blur(field: ScalarField, sigma: float) -> ScalarField:
    """Separable Gaussian blur with clamp-to-edge borders.

    The kernel is the discrete sampled Gaussian of radius ceil(3 sigma),
    renormalized so a constant field is preserved exactly.
    """
    kernel = gaussian_kernel(sigma)
    out = ndimage.correlate1d(field.data, kernel, axis=0, mode="nearest")
    out = ndimage.correlate1d(out, kernel, axis=1, mode="nearest")
    return ScalarField(out)


def sobel_gradients(field: ScalarField) -> tuple[ScalarField, ScalarField]:
    """Sobel gradient pair (gx, gy) with clamp-to-edge borders.

    A unit-slope ramp has interior response 8; gx is positive toward
    increasing x, gy positive toward increasing y.
    """
    if field.width < 3 or field.height < 3:
        raise ParameterError("sobel needs at least a 3x3 field")
    diff = np.array([-1.0, 0.0, 1.0])
    smooth = np.array([1.0, 2.0, 1.0])
    gx = ndimage.correlate1d(field.data, diff, axis=1, mode="nearest")
    gx = ndimage.correlate1d(gx, smooth, axis=0, mode="nearest")
    gy = ndimage.correlate1d(field.data, diff, axis=0, mode="nearest")
    gy = ndimage.correlate1d(gy, smooth, axis=1, mode="nearest")
    return ScalarField(gx), ScalarField(gy)


def normalize_field(field: ScalarField) -> ScalarField:
    """Affinely rescale to [0, 1]; a constant field maps to all zeros."""
    lo = float(field.data.min())
    hi = float(field.data.max())
    if hi == lo:
        return ScalarField(np.zeros_like(field.data))
    return ScalarField((field.data - lo) / (hi - lo))


def depth_to_field(depth: DepthImage) -> ScalarField:
    """Lift a depth image to a ScalarField, inpainting invalid pixels.

    Invalid pixels take the value of their nearest valid pixel (clamp
    inpainting). All-invalid input is an error.
    """
    if not depth.valid.any():
        raise DegenerateInputError("depth image has no valid pixels")
    data = depth.data
    if depth.valid.all():
        return ScalarField(data.copy())
    # distance transform of the invalid region, carrying source indices
    iy, ix = ndimage.distance_transform_edt(~depth.valid, return_distances=False, return_indices=True)
    return ScalarField(data[iy, ix])


# -- PNG I/O ---------------------------------------------------------------
# depth: 16-bit single-channel PNG holding millimeters, 0 = invalid
# rgb:   standard 8-bit 3-channel PNG


def _open_png(path) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise FormatError(f"{path}: not a readable PNG ({exc})") from exc
    return img

def save_depth_png(depth: DepthImage, path) -> None:
    mm = np.round(depth.data * 1000.0)
    if np.any(mm > 65535):
        raise ParameterError("depth exceeds the 16-bit millimeter range")
    Image.fromarray(mm.astype(np.uint16)).save(path, format="PNG")


def load_depth_png(path) -> DepthImage:
    img = _open_png(path)
    if img.mode not in ("I;16", "I"):
        raise FormatError(f"{path}: expected 16-bit single-channel PNG, got mode {img.mode}")
    mm = np.asarray(img, dtype=np.float64)
    if mm.ndim != 2:
        raise FormatError(f"{path}: expected a single-channel raster")
    return DepthImage(mm / 1000.0)


def save_rgb_png(img: RgbImage, path) -> None:
    Image.fromarray(img.data, mode="RGB").save(path, format="PNG")


def load_rgb_png(path) -> RgbImage:
    img = _open_png(path)
    if img.mode != "RGB":
        raise FormatError(f"{path}: expected 8-bit 3-channel PNG, got mode {img.mode}")
    return RgbImage(np.asarray(img, dtype=np.uint8))
