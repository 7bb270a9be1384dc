"""Region probability maps, thresholded masks, and their on-disk format.

The segmentation head upstream emits three per-pixel probability planes:
corner, outer edge, inner edge. Planes are independent, so a pixel may
carry several labels at once; overlap is meaningful (an outer pixel whose
inner probability is also high sits where two cloth edges coincide).

On disk a probability map is one 8-bit 3-channel PNG: channel 0 corner,
channel 1 outer, channel 2 inner, probability = value / 255.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from PIL import Image

from .errors import FormatError, ParameterError
from .imaging import _open_png


def _check_plane(name: str, plane: np.ndarray, shape=None) -> np.ndarray:
    arr = np.asarray(plane, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ParameterError(f"{name} plane must be a non-empty 2-d array")
    if shape is not None and arr.shape != shape:
        raise ParameterError(f"{name} plane shape {arr.shape} != {shape}")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ParameterError(f"{name} plane must lie in [0, 1]")
    return arr


@dataclass(frozen=True)
class RegionProbMap:
    """Three aligned probability planes in [0, 1]."""

    corner: np.ndarray
    outer: np.ndarray
    inner: np.ndarray

    def __post_init__(self):
        corner = _check_plane("corner", self.corner)
        outer = _check_plane("outer", self.outer, corner.shape)
        inner = _check_plane("inner", self.inner, corner.shape)
        object.__setattr__(self, "corner", corner)
        object.__setattr__(self, "outer", outer)
        object.__setattr__(self, "inner", inner)

    @property
    def shape(self) -> tuple[int, int]:
        return self.corner.shape


def points_of(plane: np.ndarray) -> np.ndarray:
    """True pixels of a boolean plane as (n, 2) int (x, y) tuples.

    Enumeration order is lexicographic on (x, y); every downstream
    lowest-index tie-break inherits this one canonical order.
    """
    ys, xs = np.nonzero(plane)
    order = np.lexsort((ys, xs))
    return np.column_stack([xs[order], ys[order]]).astype(np.int64)


@dataclass(frozen=True)
class RegionMask:
    """Boolean label planes plus their pixel sets.

    Point lists are (x, y) pairs in lexicographic (x, y) order, which is
    the order every tie-break in the selection stack refers to.
    """

    corner: np.ndarray
    outer: np.ndarray
    inner: np.ndarray

    def __post_init__(self):
        corner = np.asarray(self.corner)
        outer = np.asarray(self.outer)
        inner = np.asarray(self.inner)
        for name, plane in (("corner", corner), ("outer", outer), ("inner", inner)):
            if plane.ndim != 2 or plane.dtype != np.bool_:
                raise ParameterError(f"{name} plane must be a 2-d bool array")
            if plane.shape != corner.shape:
                raise ParameterError("mask planes must share one shape")
        object.__setattr__(self, "corner", corner)
        object.__setattr__(self, "outer", outer)
        object.__setattr__(self, "inner", inner)

    @cached_property
    def outer_points(self) -> np.ndarray:
        return points_of(self.outer)

    @cached_property
    def inner_points(self) -> np.ndarray:
        return points_of(self.inner)

    @cached_property
    def corner_points(self) -> np.ndarray:
        return points_of(self.corner)


def threshold_probs(probs: RegionProbMap, tau: float = 0.5,
                    tau_corner: float | None = None,
                    tau_outer: float | None = None,
                    tau_inner: float | None = None) -> RegionMask:
    """Threshold each plane at its own tau (prob >= tau sets the label)."""
    taus = []
    for name, t in (("corner", tau_corner), ("outer", tau_outer), ("inner", tau_inner)):
        t = tau if t is None else t
        # 0 and 1 are excluded: they turn a probability map into all-on /
        # all-off and always indicate a units mistake upstream
        if not (0.0 < t < 1.0):
            raise ParameterError(f"tau_{name} must lie in (0, 1), got {t!r}")
        taus.append(t)
    return RegionMask(
        corner=probs.corner >= taus[0],
        outer=probs.outer >= taus[1],
        inner=probs.inner >= taus[2],
    )


def mask_from_planes(corner: np.ndarray, outer: np.ndarray, inner: np.ndarray) -> RegionMask:
    """Build a RegionMask straight from boolean planes."""
    return RegionMask(corner=np.asarray(corner, dtype=bool),
                      outer=np.asarray(outer, dtype=bool),
                      inner=np.asarray(inner, dtype=bool))


def save_probmap(probs: RegionProbMap, path) -> None:
    stack = np.stack([probs.corner, probs.outer, probs.inner], axis=-1)
    data = np.round(stack * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path, format="PNG")


def load_probmap(path) -> RegionProbMap:
    img = _open_png(path)
    if img.mode != "RGB":
        raise FormatError(f"{path}: region maps are 3-channel PNGs, got mode {img.mode}")
    data = np.asarray(img, dtype=np.float64) / 255.0
    return RegionProbMap(corner=data[..., 0], outer=data[..., 1], inner=data[..., 2])
