"""Training loop, checkpoints, and inference back into the interchange format.

Deterministic for a fixed seed on a single device: model init, split,
batch order, and augmentation all draw from streams derived from the
one seed. The checkpoint carries the topology so inference needs no
side channel.
"""

import json
import pickle
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .data import (center_crop, load_depth_png, save_regions_png, scan_dataset,
                   split_dataset, standardize, augment)
from .errors import DatasetError, FormatError, ParameterError, ShapeError
from .loss import LossConfig, weighted_bce_loss
from .model import DEFAULT_BASE_CHANNELS, DEFAULT_LEVELS, build_unet

DEFAULT_LR = 1e-5
DEFAULT_BATCH = 8
DEFAULT_EPOCHS = 200


@dataclass(frozen=True)
class TrainResult:
    checkpoint: Path
    train_loss: list
    val_loss: list


def _sample_tensors(samples, out_size: int, augment_rng=None):
    """Stack samples into network input/target tensors.

    Labels are center-cropped to the output window; the optional rng
    applies the flip/rotation augmentation before conditioning.
    """
    xs, ys = [], []
    for s in samples:
        depth, labels = s.depth, s.labels
        if augment_rng is not None:
            depth, labels = augment(depth, labels, augment_rng)
        xs.append(torch.from_numpy(standardize(depth))[None])
        ys.append(torch.from_numpy(
            center_crop(labels, out_size).astype(np.float32)))
    return torch.stack(xs), torch.stack(ys)


def train(dataset_dir, epochs: int = DEFAULT_EPOCHS, seed: int = 0, *,
          out_dir, lr: float = DEFAULT_LR, batch_size: int = DEFAULT_BATCH,
          base_channels: int = DEFAULT_BASE_CHANNELS, levels: int = DEFAULT_LEVELS,
          loss_cfg: LossConfig = LossConfig(), use_augment: bool = True) -> TrainResult:
    """Fit the network on a bundle directory; writes checkpoint + loss log."""
    if epochs < 1:
        raise ParameterError("epochs must be positive")
    if batch_size < 1:
        raise ParameterError("batch_size must be positive")
    if lr <= 0.0:
        raise ParameterError("learning rate must be positive")
    samples = scan_dataset(dataset_dir)
    sizes = {s.depth.shape for s in samples}
    if len(sizes) != 1:
        raise DatasetError(f"mixed raster sizes in dataset: {sorted(sizes)}")
    h, w = next(iter(sizes))
    if h != w:
        raise ShapeError(f"the network takes square rasters, dataset is {w}x{h}")
    train_set, val_set, _ = split_dataset(samples, seed)
    if not train_set:
        raise DatasetError("split left no training samples")

    torch.manual_seed(seed)
    model = build_unet(h, base_channels=base_channels, levels=levels,
                       classes=len(loss_cfg.weights))
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    order_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    aug_rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))

    train_hist, val_hist = [], []
    for _epoch in range(epochs):
        model.train()
        perm = order_rng.permutation(len(train_set))
        total, seen = 0.0, 0
        for lo in range(0, len(perm), batch_size):
            batch = [train_set[i] for i in perm[lo:lo + batch_size]]
            x, y = _sample_tensors(batch, model.out_size,
                                   aug_rng if use_augment else None)
            opt.zero_grad()
            loss = weighted_bce_loss(torch.sigmoid(model(x)), y, loss_cfg) / len(batch)
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(batch)
            seen += len(batch)
        train_hist.append(total / seen)

        if val_set:
            model.eval()
            with torch.no_grad():
                x, y = _sample_tensors(val_set, model.out_size)
                vloss = weighted_bce_loss(torch.sigmoid(model(x)), y,
                                          loss_cfg) / len(val_set)
            val_hist.append(float(vloss))
        else:
            val_hist.append(None)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / "model.pt"
    torch.save({
        "state_dict": model.state_dict(),
        "in_size": model.in_size,
        "base_channels": base_channels,
        "levels": levels,
        "classes": len(loss_cfg.weights),
    }, ckpt_path)
    (out_dir / "losses.json").write_text(
        json.dumps({"train": train_hist, "val": val_hist}, indent=2) + "\n")
    return TrainResult(checkpoint=ckpt_path, train_loss=train_hist,
                       val_loss=val_hist)


def load_checkpoint(path):
    """Rebuild the trained network from a checkpoint file."""
    try:
        blob = torch.load(path, map_location="cpu", weights_only=True)
        model = build_unet(blob["in_size"], base_channels=blob["base_channels"],
                           levels=blob["levels"], classes=blob["classes"])
        model.load_state_dict(blob["state_dict"])
    except (KeyError, RuntimeError, ValueError, EOFError,
            pickle.UnpicklingError, zipfile.BadZipFile) as exc:
        raise FormatError(f"{path}: not a usable checkpoint ({exc})") from exc
    model.eval()
    return model


def infer(checkpoint, depth_path, out_path=None) -> Path:
    """Predict class probabilities for one depth file.

    The valid output window is centered in the input raster; the emitted
    regions file is padded back to the input size with zeros outside the
    window so it pairs with the depth file it came from. Defaults to
    `<stem>.regions.png` beside the input.
    """
    model = load_checkpoint(checkpoint)
    if model.classes != 3:
        raise FormatError(
            f"{checkpoint}: predicts {model.classes} classes, region "
            f"files carry exactly 3")
    depth = load_depth_png(depth_path)
    h, w = depth.shape
    if h != model.in_size or w != model.in_size:
        raise ShapeError(
            f"{depth_path}: raster is {w}x{h}, the checkpoint takes "
            f"{model.in_size}x{model.in_size}")
    x = torch.from_numpy(standardize(depth))[None, None]
    with torch.no_grad():
        probs = torch.sigmoid(model(x))[0].numpy().astype(np.float64)
    full = np.zeros((3, h, w))
    lo = (h - model.out_size) // 2
    full[:, lo:lo + model.out_size, lo:lo + model.out_size] = probs
    depth_path = Path(depth_path)
    if out_path is None:
        stem = depth_path.name.removesuffix(".depth.png")
        out_path = depth_path.with_name(f"{stem}.regions.png")
    save_regions_png(full, out_path)
    return Path(out_path)
