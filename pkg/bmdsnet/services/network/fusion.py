"""
Fusion and Gating

MMCF: input-level modality recalibration with a zero-initialized residual
scale alpha, x_fused = x + alpha * (x * m_att).

DDS: multiplicative decoder gating driven by the attention map,
d_refined = d * (1 + gamma * sigmoid(proj(interp(mean_c(m_att))))).
"""

from typing import List, NamedTuple, Sequence
import logging

import numpy as np

from bmdsnet.errors import DimensionError
from bmdsnet.services import tensor as T
from bmdsnet.services.tensor import Tensor, parameter
from .module import Conv3d, Module

logger = logging.getLogger(__name__)

MMCF_WIDTH = 8


class MmcfOutput(NamedTuple):
    x_fused: Tensor
    m_att: Tensor
    u_map: Tensor


class MMCF(Module):
    """
    Multimodal contextual fusion.

    Two 3^3 conv + relu layers encode the modalities; 1^3 heads produce the
    attention map (one channel per modality) and a one-channel uncertainty
    guidance map. alpha starts at exactly 0, so the block is an identity map
    at initialization.
    """

    def __init__(self, num_modalities: int, rng: np.random.Generator,
                 width: int = MMCF_WIDTH, alpha_init: float = 0.0):
        super().__init__()
        self.num_modalities = num_modalities
        self.enc1 = Conv3d(num_modalities, width, 3, rng)
        self.enc2 = Conv3d(width, width, 3, rng)
        self.att_head = Conv3d(width, num_modalities, 1, rng)
        self.unc_head = Conv3d(width, 1, 1, rng)
        self.alpha = parameter(np.float64(alpha_init))

    def __call__(self, x: Tensor) -> MmcfOutput:
        if x.ndim != 5 or x.shape[1] != self.num_modalities:
            raise DimensionError(
                f"MMCF expects [B,{self.num_modalities},S,S,S], got shape {x.shape}"
            )
        feat = T.relu(self.enc2(T.relu(self.enc1(x))))
        m_att = T.sigmoid(self.att_head(feat))
        u_map = T.sigmoid(self.unc_head(feat))
        x_fused = x + self.alpha * (x * m_att)
        return MmcfOutput(x_fused, m_att, u_map)


class DDS(Module):
    """
    Residual gating for decoder stages.

    Args:
        stage_channels: Channel count of each gated decoder stage, deepest first
        rng: Initialization stream for the per-stage projections
        gamma_init: Initial gate scale
    """

    def __init__(self, stage_channels: Sequence[int], rng: np.random.Generator,
                 gamma_init: float = 0.1):
        super().__init__()
        self.stage_channels: List[int] = list(stage_channels)
        for i, c in enumerate(self.stage_channels):
            setattr(self, f"proj{i}", Conv3d(1, c, 1, rng))
        self.gamma = parameter(np.float64(gamma_init))

    def gate_map(self, m_att: Tensor, spatial: Sequence[int], stage: int) -> Tensor:
        """G = 1 + gamma * sigmoid(proj(interp(mean_c(m_att)))) at the given resolution."""
        if not 0 <= stage < len(self.stage_channels):
            raise DimensionError(
                f"DDS has no projection for stage {stage} (stages 0..{len(self.stage_channels) - 1})"
            )
        pooled = T.mean(m_att, axes=1, keepdims=True)
        resized = T.interp3d(pooled, spatial, mode="trilinear")
        proj = getattr(self, f"proj{stage}")
        return 1.0 + self.gamma * T.sigmoid(proj(resized))

    def __call__(self, d: Tensor, m_att: Tensor, stage: int) -> Tensor:
        gate = self.gate_map(m_att, d.shape[2:], stage)
        if d.ndim != 5 or d.shape[1] != self.stage_channels[stage]:
            raise DimensionError(
                f"DDS stage {stage} expects {self.stage_channels[stage]} channels, got shape {d.shape}"
            )
        return d * gate


def neutral_attention(x: Tensor) -> Tensor:
    """Constant 0.5 pseudo-attention used when gating runs without MMCF."""
    return T.constant(np.full(x.shape, 0.5))


def mmcf_forward(state: MMCF, x: Tensor) -> MmcfOutput:
    return state(x)


def dds_gate(state: DDS, d: Tensor, m_att: Tensor, stage: int) -> Tensor:
    return state(d, m_att, stage)
