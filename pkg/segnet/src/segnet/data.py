"""Sample loading, interchange rasters, splits, and augmentation.

A dataset directory holds scene bundles named `<stem>.depth.png` (16-bit
millimeter depth) and `<stem>.regions.png` (8-bit RGB with the corner,
outer-edge, and inner-edge planes in the R, G, B channels; value/255 is
the class probability). Supervision labels must be strictly binary, so
a regions file used for training may only contain 0 and 255.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DatasetError, FormatError, ParameterError

CLASS_NAMES = ("corner", "outer", "inner")
SPLIT_RATIOS = (4, 1, 1)


# -- interchange rasters ---------------------------------------------------

def load_depth_png(path) -> np.ndarray:
    """Depth in meters from a 16-bit millimeter PNG, shape (H, W)."""
    img = Image.open(path)
    img.load()
    if img.format != "PNG":
        raise FormatError(f"{path}: expected PNG, got {img.format}")
    if img.mode not in ("I;16", "I"):
        raise FormatError(f"{path}: expected 16-bit single-channel PNG, got mode {img.mode}")
    mm = np.asarray(img, dtype=np.float64)
    if mm.ndim != 2:
        raise FormatError(f"{path}: expected a single-channel raster")
    return mm / 1000.0


def save_depth_png(depth: np.ndarray, path) -> None:
    mm = np.round(np.asarray(depth, dtype=np.float64) * 1000.0)
    if np.any(mm > 65535) or np.any(mm < 0):
        raise ParameterError("depth outside the 16-bit millimeter range")
    Image.fromarray(mm.astype(np.uint16)).save(path, format="PNG")


def load_regions_png(path) -> np.ndarray:
    """Class probabilities, shape (3, H, W) in [0, 1], channel order CLASS_NAMES."""
    img = Image.open(path)
    img.load()
    if img.format != "PNG":
        raise FormatError(f"{path}: expected PNG, got {img.format}")
    if img.mode != "RGB":
        raise FormatError(f"{path}: region maps are 3-channel PNGs, got mode {img.mode}")
    data = np.asarray(img, dtype=np.float64) / 255.0
    return np.moveaxis(data, -1, 0)


def save_regions_png(probs: np.ndarray, path) -> None:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 3 or probs.shape[0] != 3:
        raise ParameterError(f"expected (3, H, W) probabilities, got {probs.shape}")
    if probs.min() < 0.0 or probs.max() > 1.0:
        raise ParameterError("probabilities must lie in [0, 1]")
    data = np.round(np.moveaxis(probs, 0, -1) * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path, format="PNG")


# -- training samples ------------------------------------------------------

@dataclass(frozen=True)
class TrainSample:
    """One supervised raster pair; labels are per-class binary planes."""

    depth: np.ndarray   # (H, W) meters
    labels: np.ndarray  # (3, H, W) bool, CLASS_NAMES order
    stem: str

    def __post_init__(self):
        if self.labels.shape != (3,) + self.depth.shape:
            raise ParameterError(
                f"{self.stem}: label shape {self.labels.shape} does not match "
                f"depth shape {self.depth.shape}")
        if self.labels.dtype != np.bool_:
            raise ParameterError(f"{self.stem}: labels must be boolean planes")


def load_sample(depth_path) -> TrainSample:
    """Pair a depth file with its regions file and read both."""
    depth_path = Path(depth_path)
    stem = depth_path.name.removesuffix(".depth.png")
    regions_path = depth_path.with_name(f"{stem}.regions.png")
    if not regions_path.exists():
        raise DatasetError(f"{depth_path}: no matching {regions_path.name}")
    depth = load_depth_png(depth_path)
    probs = load_regions_png(regions_path)
    if probs.shape[1:] != depth.shape:
        raise FormatError(
            f"{regions_path}: size {probs.shape[1:]} does not match depth {depth.shape}")
    binary = (probs == 0.0) | (probs == 1.0)
    if not binary.all():
        raise FormatError(f"{regions_path}: training labels must be strictly binary")
    return TrainSample(depth=depth, labels=probs == 1.0, stem=stem)


def scan_dataset(directory) -> list:
    """All samples under a directory, sorted by stem."""
    directory = Path(directory)
    depth_files = sorted(directory.glob("*.depth.png"))
    if not depth_files:
        raise DatasetError(f"{directory}: no *.depth.png files")
    return [load_sample(p) for p in depth_files]


def split_dataset(samples, seed: int):
    """Deterministic train/val/test split at the 4:1:1 ratio.

    The two holdout shares are floor(n/6) each; remainders go to train,
    so small datasets never lose more than a third to holdout.
    """
    n = len(samples)
    hold = n // sum(SPLIT_RATIOS)
    order = np.random.default_rng(np.random.SeedSequence([seed, 611])).permutation(n)
    val = [samples[i] for i in order[:hold]]
    test = [samples[i] for i in order[hold:2 * hold]]
    train = [samples[i] for i in order[2 * hold:]]
    return train, val, test


# -- paint-labeled supervision ---------------------------------------------

# hue windows in degrees: red corners, yellow outer band, green inner band
PAINT_HUES = {"corner": (340.0, 20.0), "outer": (40.0, 75.0), "inner": (85.0, 160.0)}
_PAINT_MIN_SAT = 100
_PAINT_MIN_VAL = 80


def labels_from_paint(rgb: np.ndarray) -> np.ndarray:
    """Binary class planes from a paint-labeled RGB image, CLASS_NAMES order.

    For real painted-cloth captures: red paint marks corners, yellow the
    outer band, green the inner band. Saturation and value floors reject
    the unpainted cloth and the table, which are near-gray.
    """
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[-1] != 3 or rgb.dtype != np.uint8:
        raise ParameterError(f"expected (H, W, 3) uint8 RGB, got "
                             f"{rgb.shape} {rgb.dtype}")
    hsv = np.asarray(Image.fromarray(rgb, mode="RGB").convert("HSV"),
                     dtype=np.float64)
    hue = hsv[..., 0] * (360.0 / 256.0)
    painted = (hsv[..., 1] >= _PAINT_MIN_SAT) & (hsv[..., 2] >= _PAINT_MIN_VAL)
    planes = []
    for lo, hi in PAINT_HUES.values():
        band = (hue >= lo) | (hue < hi) if lo > hi else (hue >= lo) & (hue < hi)
        planes.append(band & painted)
    return np.stack(planes)


# -- input conditioning and augmentation ----------------------------------

def standardize(depth: np.ndarray) -> np.ndarray:
    """Zero-mean unit-variance float32 copy; an epsilon in the denominator
    keeps constant rasters finite."""
    d = np.asarray(depth, dtype=np.float64)
    return ((d - d.mean()) / (d.std() + 1e-8)).astype(np.float32)


MAX_ROTATION_DEG = 30.0


def augment(depth: np.ndarray, labels: np.ndarray,
            rng: np.random.Generator) -> tuple:
    """Seeded horizontal flip (p=0.5) and rotation within +-30 degrees.

    Rotation resamples nearest-neighbor so label planes stay binary;
    source pixels falling outside the raster take the raster's maximum
    depth (the table is the farthest surface) and empty labels.
    """
    if rng.uniform() < 0.5:
        depth = depth[:, ::-1].copy()
        labels = labels[:, :, ::-1].copy()
    angle = math.radians(rng.uniform(-MAX_ROTATION_DEG, MAX_ROTATION_DEG))
    h, w = depth.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.mgrid[0:h, 0:w]
    c, s = math.cos(angle), math.sin(angle)
    # inverse map: sample the source at the un-rotated position
    sx = np.rint(c * (xx - cx) + s * (yy - cy) + cx).astype(np.int64)
    sy = np.rint(-s * (xx - cx) + c * (yy - cy) + cy).astype(np.int64)
    inside = (0 <= sx) & (sx < w) & (0 <= sy) & (sy < h)
    sxc = np.clip(sx, 0, w - 1)
    syc = np.clip(sy, 0, h - 1)
    out_depth = np.where(inside, depth[syc, sxc], depth.max())
    out_labels = np.where(inside[None], labels[:, syc, sxc], False)
    return out_depth, out_labels


def center_crop(plane: np.ndarray, size: int) -> np.ndarray:
    """Crop the trailing two axes to a centered size x size window."""
    h, w = plane.shape[-2], plane.shape[-1]
    if size > h or size > w:
        raise ParameterError(f"crop size {size} exceeds raster {h}x{w}")
    y0 = (h - size) // 2
    x0 = (w - size) // 2
    return plane[..., y0:y0 + size, x0:x0 + size]
