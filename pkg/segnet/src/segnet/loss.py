"""Weighted per-class binary cross-entropy.

Multi-label segmentation loss: each class plane is an independent
binary problem, positives are up-weighted to offset their scarcity, and
the per-class pixel sums are averaged over classes. Predictions are
clamped away from {0, 1} before the logs.
"""

from dataclasses import dataclass

import torch

from .errors import ParameterError

DEFAULT_POSITIVE_WEIGHT = 20.0


@dataclass(frozen=True)
class LossConfig:
    """Per-class positive weights; the class count is len(weights)."""

    weights: tuple = (DEFAULT_POSITIVE_WEIGHT,) * 3
    eps: float = 1e-7

    def __post_init__(self):
        if len(self.weights) == 0:
            raise ParameterError("need at least one class weight")
        if any(w <= 0.0 for w in self.weights):
            raise ParameterError(f"class weights must be positive, got {self.weights!r}")
        if not (0.0 < self.eps < 0.5):
            raise ParameterError(f"eps must lie in (0, 0.5), got {self.eps!r}")


def weighted_bce_loss(pred: torch.Tensor, labels: torch.Tensor,
                      cfg: LossConfig = LossConfig()) -> torch.Tensor:
    """Mean over classes of the pixel-summed weighted binary cross-entropy.

    Per class k: l_k = -sum_i [w_k * y_i * log p_i + (1 - y_i) * log(1 - p_i)]
    over every pixel (and batch) position i; the result is (1/K) sum_k l_k.
    Accepts (K, H, W) or (B, K, H, W); labels must be strictly binary.
    """
    if pred.shape != labels.shape:
        raise ParameterError(
            f"prediction shape {tuple(pred.shape)} != label shape {tuple(labels.shape)}")
    if pred.ndim not in (3, 4):
        raise ParameterError(f"expected (K, H, W) or (B, K, H, W), got {pred.ndim} dims")
    k = pred.shape[-3]
    if k != len(cfg.weights):
        raise ParameterError(
            f"{k} prediction channels but {len(cfg.weights)} class weights")
    y = labels.to(pred.dtype)
    if not torch.logical_or(y == 0.0, y == 1.0).all():
        raise ParameterError("labels must be strictly binary")

    p = pred.clamp(cfg.eps, 1.0 - cfg.eps)
    shape = (k, 1, 1) if pred.ndim == 3 else (1, k, 1, 1)
    w = torch.as_tensor(cfg.weights, dtype=pred.dtype, device=pred.device).view(shape)
    per_pixel = -(w * y * torch.log(p) + (1.0 - y) * torch.log1p(-p))
    return per_pixel.sum() / k
