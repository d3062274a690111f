"""
Stage-1 Objective

DiceCE on independent sigmoid channels, deep supervision on two auxiliary
heads, and the attention distillation term:

    L_seg   = DiceCE(main) + lambda1 * DiceCE(aux_deep) + lambda2 * DiceCE(aux_shallow)
    L_total = L_seg + distill_weight * L_distill
"""

from typing import Dict, NamedTuple, Optional, Sequence, Union
import logging

import numpy as np

from bmdsnet.errors import DimensionError, DomainError
from bmdsnet.schemas.experiment import LossWeights
from bmdsnet.services import tensor as T
from bmdsnet.services.tensor import Tensor

logger = logging.getLogger(__name__)

REDUCE_AXES = (0, 2, 3, 4)


def _target_array(target: Union[Tensor, np.ndarray]) -> np.ndarray:
    arr = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=np.float64)
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise DomainError("segmentation target must be binary (0/1)")
    return arr


def dice_ce(logits: Tensor, target: Union[Tensor, np.ndarray], smooth: float = 1e-5) -> Tensor:
    """
    Soft Dice loss plus mean binary cross-entropy.

    Dice per channel is (2 sum(p*y) + eps) / (sum(p) + sum(y) + eps), summed over
    batch and space with p = sigmoid(logits); the loss is 1 - mean over channels.
    CE uses the stable form softplus(z) - z*y.

    Args:
        logits: [B, C, ...]
        target: Binary array of the same shape
        smooth: Dice epsilon

    Raises:
        DimensionError: on shape mismatch
        DomainError: on a non-binary target
    """
    y = _target_array(target)
    if y.shape != logits.shape:
        raise DimensionError(f"dice_ce: logits {logits.shape} vs target {y.shape}")

    yt = T.constant(y)
    p = T.sigmoid(logits)
    inter = T.sum(p * yt, axes=REDUCE_AXES)
    denom = T.sum(p, axes=REDUCE_AXES) + T.constant(y.sum(axis=REDUCE_AXES)) + smooth
    dice = (inter * 2.0 + smooth) / denom
    dice_loss = 1.0 - T.mean(dice)

    ce = T.mean(T.softplus(logits) - logits * yt)
    return dice_loss + ce


def downsample_target(target: np.ndarray, spatial: Sequence[int]) -> np.ndarray:
    """Nearest-neighbour resize of a binary [B, C, ...] target."""
    return T.interp3d(T.constant(target), spatial, mode="nearest").data


class SegTerms(NamedTuple):
    total: Tensor
    main: Tensor
    aux_deep: Tensor
    aux_shallow: Tensor


def seg_terms(out, target: np.ndarray, w: Optional[LossWeights] = None) -> SegTerms:
    w = w or LossWeights()
    main = dice_ce(out.logits_main, target, w.dice_smooth)
    deep_logits, shallow_logits = out.logits_aux
    aux_deep = dice_ce(deep_logits, downsample_target(target, deep_logits.shape[2:]), w.dice_smooth)
    aux_shallow = dice_ce(shallow_logits, downsample_target(target, shallow_logits.shape[2:]), w.dice_smooth)
    total = main + aux_deep * w.lambda1 + aux_shallow * w.lambda2
    return SegTerms(total, main, aux_deep, aux_shallow)


def seg_loss(out, target: np.ndarray, w: Optional[LossWeights] = None) -> Tensor:
    """Main DiceCE plus weighted auxiliary DiceCE (aux targets by nearest downsampling)."""
    return seg_terms(out, target, w).total


def distill_loss(d_refined: Sequence[Tensor], m_att: Tensor, reduction: str = "mean") -> Tensor:
    """
    Attention distillation summed over gated stages.

    Per stage: N(||d||_2 over channels) vs N(interp(mean_c(m_att))), where N is
    per-sample spatial min-max normalization; squared differences are averaged
    (or summed) over voxels.

    Raises:
        DimensionError: if no stage is given
    """
    if not d_refined:
        raise DimensionError("distill_loss needs at least one gated decoder stage")
    if reduction not in ("mean", "sum"):
        raise DomainError(f"distill reduction must be mean or sum, got {reduction!r}")

    pooled = T.mean(m_att, axes=1, keepdims=True)
    total = None
    for d in d_refined:
        feat = T.spatial_minmax_norm(T.channel_l2_norm(d))
        att = T.spatial_minmax_norm(T.interp3d(pooled, d.shape[2:], mode="trilinear"))
        sq = T.square(feat - att)
        term = T.mean(sq) if reduction == "mean" else T.sum(sq)
        total = term if total is None else total + term
    return total


class Stage1Terms(NamedTuple):
    total: Tensor
    seg: SegTerms
    distill: Optional[Tensor]

    def breakdown(self) -> Dict[str, float]:
        values = {
            "total": self.total.item(),
            "seg": self.seg.total.item(),
            "main": self.seg.main.item(),
            "aux_deep": self.seg.aux_deep.item(),
            "aux_shallow": self.seg.aux_shallow.item(),
        }
        if self.distill is not None:
            values["distill"] = self.distill.item()
        return values


def stage1_terms(out, target: np.ndarray, w: Optional[LossWeights] = None) -> Stage1Terms:
    w = w or LossWeights()
    seg = seg_terms(out, target, w)
    if not out.distill_enabled or w.distill_weight == 0.0:
        return Stage1Terms(seg.total, seg, None)
    distill = distill_loss(out.d_refined, out.m_att, w.distill_reduction)
    return Stage1Terms(seg.total + distill * w.distill_weight, seg, distill)


def total_loss_stage1(out, target: np.ndarray, w: Optional[LossWeights] = None) -> Tensor:
    """seg_loss + distill_weight * distill_loss (distillation only when MMCF and DDS are both wired)."""
    return stage1_terms(out, target, w).total
