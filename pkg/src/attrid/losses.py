"""Differentiable training losses: identity softmax CE, attribute sigmoid CE,
reconstruction and transfer MSEs, and their weighted totals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ContractViolationError, Tensor


@dataclass
class LossWeights:
    lambda1: float = 10.0
    lambda2: float = 10.0

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("loss weights must be nonnegative")


def identity_loss(p_id: Tensor, labels) -> Tensor:
    """Mean negative log probability of the ground-truth class; labels are 1-based."""
    labels = np.asarray(labels, dtype=np.int64)
    n_classes = p_id.shape[1]
    if np.any(labels < 1) or np.any(labels > n_classes):
        raise ContractViolationError(
            f"identity labels must lie in [1, {n_classes}], got range "
            f"[{labels.min()}, {labels.max()}]")
    p = ad.clamp(p_id)
    return ad.scale(ad.mean_all(ad.log(ad.gather_cols(p, labels - 1))), -1.0)


def _sigmoid_ce(logits: Tensor, targets) -> Tensor:
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != logits.shape:
        raise ad.InvalidShapeError(f"sigmoid CE: shape {logits.shape} vs {targets.shape}")
    if np.any(targets < 0.0) or np.any(targets > 1.0):
        raise ContractViolationError("sigmoid CE targets must lie in [0, 1]")
    p = ad.clamp(ad.sigmoid(logits))
    t = ad.constant(targets)
    ones = ad.constant(np.ones_like(targets))
    ce = ad.add(ad.mul(t, ad.log(p)), ad.mul(ad.sub(ones, t), ad.log(ad.sub(ones, p))))
    # sum over attribute classes, mean over the batch
    return ad.scale(ad.mean_all(ad.sum_axis(ce, axis=1)), -1.0)


def attribute_loss(att_logits: Tensor, targets) -> Tensor:
    """Multi-label sigmoid cross entropy; targets may be binary or soft in [0, 1]."""
    return _sigmoid_ce(att_logits, targets)


def iia_attribute_loss(e_iia: Tensor, targets) -> Tensor:
    """Same sigmoid CE with the latent embedding standing in as attribute logits."""
    return _sigmoid_ce(e_iia, targets)


def _mse(a: Tensor, b: Tensor, reduction: str) -> Tensor:
    sq = ad.square(ad.sub(a, b))
    if reduction == "mean":
        return ad.mean_all(sq)
    if reduction == "sum":
        return ad.sum_all(sq)
    raise ValueError(f"unknown reduction {reduction!r}")


def reconstruction_loss(x_id: Tensor, x_rec: Tensor, reduction: str = "mean") -> Tensor:
    return _mse(x_id, x_rec, reduction)


def transfer_loss(e_iia: Tensor, att_logits: Tensor, reduction: str = "mean") -> Tensor:
    return _mse(e_iia, att_logits, reduction)


def total_iia_loss(l_att_iia: Tensor, l_rec: Tensor, l_transfer: Tensor,
                   weights: LossWeights) -> Tensor:
    for name, t in (("attribute", l_att_iia), ("reconstruction", l_rec),
                    ("transfer", l_transfer)):
        if t.item() < 0.0:
            raise ContractViolationError(f"negative {name} loss component")
    return ad.add(l_att_iia,
                  ad.add(ad.scale(l_rec, weights.lambda1),
                         ad.scale(l_transfer, weights.lambda2)))


def total_attribute_loss(l_att: Tensor, l_transfer: Tensor, weights: LossWeights) -> Tensor:
    return ad.add(l_att, ad.scale(l_transfer, weights.lambda2))
