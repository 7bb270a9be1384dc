"""Unpadded U-Net over single-channel depth rasters.

Four pooling levels, channel width doubling on the way down, transposed
convolutions and crop-and-concatenate skips on the way up, batch norm
after every 3x3 convolution, and a 1x1 head into the class planes.
Because the convolutions are unpadded, every spatial size on the path
is forced by the input size; the walk is checked at build time so a bad
size fails with the offending level named instead of deep in autograd.
"""

from dataclasses import dataclass

import torch
from torch import nn

from .errors import ParameterError, ShapeError

DEFAULT_BASE_CHANNELS = 64
DEFAULT_LEVELS = 4
DEFAULT_CLASSES = 3


@dataclass(frozen=True)
class SizeWalk:
    """Spatial sizes forced by an input size: skips per level, bottleneck, output."""

    in_size: int
    skip_sizes: tuple
    bottleneck_size: int
    out_size: int


def plan_sizes(in_size: int, levels: int = DEFAULT_LEVELS) -> SizeWalk:
    """Walk the unpadded size arithmetic, naming the level that breaks.

    Down: two 3x3 convolutions cost 4, then a 2x2 pool halves (even sizes
    only). Up: a 2x2 transposed convolution doubles, then two more 3x3
    convolutions cost 4. Feature sizes must stay positive throughout.
    """
    if levels < 1:
        raise ParameterError("need at least one pooling level")
    if in_size < 1:
        raise ParameterError(f"input size must be positive, got {in_size}")
    s = in_size
    skips = []
    for i in range(1, levels + 1):
        s -= 4
        if s < 1:
            raise ShapeError(f"down{i}: convolutions collapse size to {s}")
        skips.append(s)
        if s % 2:
            raise ShapeError(f"down{i}: 2x2 pooling needs an even size, got {s}")
        s //= 2
    s -= 4
    if s < 1:
        raise ShapeError(f"bottleneck: convolutions collapse size to {s}")
    for i in range(levels, 0, -1):
        s *= 2
        if s > skips[i - 1]:
            raise ShapeError(
                f"up{i}: upsampled size {s} exceeds its skip size {skips[i - 1]}")
        s -= 4
        if s < 1:
            raise ShapeError(f"up{i}: convolutions collapse size to {s}")
    return SizeWalk(in_size=in_size, skip_sizes=tuple(skips),
                    bottleneck_size=(skips[-1] // 2) - 4, out_size=s)


class _ConvPair(nn.Module):
    """Two unpadded 3x3 convolutions, each followed by batch norm and ReLU."""

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.Conv2d(c_in, c_out, 3), nn.BatchNorm2d(c_out), nn.ReLU(inplace=True),
            nn.Conv2d(c_out, c_out, 3), nn.BatchNorm2d(c_out), nn.ReLU(inplace=True))

    def forward(self, x):
        return self.block(x)


def _center_crop(x: torch.Tensor, size: int) -> torch.Tensor:
    h = x.shape[-1]
    lo = (h - size) // 2
    return x[..., lo:lo + size, lo:lo + size]


class UNet(nn.Module):
    """The assembled network; `walk` holds the forced spatial sizes."""

    def __init__(self, in_size: int, base_channels: int = DEFAULT_BASE_CHANNELS,
                 levels: int = DEFAULT_LEVELS, classes: int = DEFAULT_CLASSES,
                 in_channels: int = 1):
        super().__init__()
        if base_channels < 1 or classes < 1 or in_channels < 1:
            raise ParameterError("channel counts must be positive")
        self.walk = plan_sizes(in_size, levels)
        self.levels = levels
        self.classes = classes

        widths = [base_channels * (1 << i) for i in range(levels + 1)]
        self.down = nn.ModuleList()
        c = in_channels
        for w in widths[:-1]:
            self.down.append(_ConvPair(c, w))
            c = w
        self.pool = nn.MaxPool2d(2, 2)
        self.bottleneck = _ConvPair(widths[-2], widths[-1])
        self.up_conv = nn.ModuleList()
        self.up_block = nn.ModuleList()
        for w in reversed(widths[:-1]):
            self.up_conv.append(nn.ConvTranspose2d(2 * w, w, 2, stride=2))
            self.up_block.append(_ConvPair(2 * w, w))
        self.head = nn.Conv2d(widths[0], classes, 1)

    @property
    def in_size(self) -> int:
        return self.walk.in_size

    @property
    def out_size(self) -> int:
        return self.walk.out_size

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[-2] != self.in_size or x.shape[-1] != self.in_size:
            raise ShapeError(
                f"expected (B, C, {self.in_size}, {self.in_size}) input, "
                f"got {tuple(x.shape)}")
        skips = []
        for block in self.down:
            x = block(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for up, block, skip in zip(self.up_conv, self.up_block, reversed(skips)):
            x = up(x)
            x = block(torch.cat([_center_crop(skip, x.shape[-1]), x], dim=1))
        return self.head(x)


def build_unet(in_size: int = 572, base_channels: int = DEFAULT_BASE_CHANNELS,
               levels: int = DEFAULT_LEVELS, classes: int = DEFAULT_CLASSES) -> UNet:
    """Construct the network for a given input size, validating the size walk."""
    return UNet(in_size, base_channels=base_channels, levels=levels, classes=classes)
