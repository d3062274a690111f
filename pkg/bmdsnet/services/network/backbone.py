"""
Convolutional Encoder-Decoder

Three encoder stages (S, S/2, S/4) with stride-2 downsampling, a bottleneck at
S/8, and three decoder stages (S/8, S/4, S/2) that take the trilinearly
upsampled previous stage concatenated with the equal-resolution encoder skip.
An output block at full resolution feeds the segmentation head, which is owned
by the model so it can be swapped for a Bayesian one.

Auxiliary heads sit on the two coarsest decoder stages.
"""

from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple
import logging

import numpy as np

from bmdsnet.errors import ConfigError
from bmdsnet.services import tensor as T
from bmdsnet.services.tensor import Tensor
from .module import Conv3d, Module

logger = logging.getLogger(__name__)

DEFAULT_WIDTHS = (16, 32, 64)
NUM_CLASSES = 3

GateFn = Callable[[Tensor, int], Tensor]


class ConvBlock(Module):
    """`depth` 3^3 conv + relu layers."""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator, depth: int = 2):
        super().__init__()
        self.depth = depth
        for i in range(depth):
            setattr(self, f"conv{i + 1}", Conv3d(in_channels if i == 0 else out_channels, out_channels, 3, rng))

    @property
    def receptive_radius(self) -> int:
        """Chebyshev radius of input voxels that influence one output voxel."""
        return self.depth

    def __call__(self, x: Tensor) -> Tensor:
        for i in range(self.depth):
            x = T.relu(getattr(self, f"conv{i + 1}")(x))
        return x


class Downsample(Module):
    def __init__(self, channels: int, rng: np.random.Generator):
        super().__init__()
        self.conv = Conv3d(channels, channels, 3, rng, stride=2, padding=1)

    def __call__(self, x: Tensor) -> Tensor:
        return T.relu(self.conv(x))


class EncoderFeatures(NamedTuple):
    skips: List[Tensor]   # full, half, quarter resolution
    bottleneck: Tensor


class BackboneOutput(NamedTuple):
    features: Tensor                 # [B, w1, S, S, S], input to the main head
    logits_aux: List[Tensor]         # [deep (S/8), shallow (S/4)]
    d_refined: List[Tensor]          # decoder stages after gating, deepest first


class Backbone(Module):
    """
    Compact 3D U-Net style trunk.

    Args:
        in_channels: Input modality count
        widths: (w1, w2, w3) channel widths of the three resolution levels
        rng: Initialization stream
    """

    def __init__(self, in_channels: int, widths: Sequence[int], rng: np.random.Generator):
        super().__init__()
        w1, w2, w3 = (int(w) for w in widths)
        self.widths: Tuple[int, int, int] = (w1, w2, w3)

        # === ENCODER ===
        self.enc1 = ConvBlock(in_channels, w1, rng)
        self.down1 = Downsample(w1, rng)
        self.enc2 = ConvBlock(w1, w2, rng)
        self.down2 = Downsample(w2, rng)
        self.enc3 = ConvBlock(w2, w3, rng)
        self.down3 = Downsample(w3, rng)
        self.bottleneck = ConvBlock(w3, w3, rng)

        # === DECODER ===
        self.dec3 = ConvBlock(w3, w3, rng)
        self.aux_deep = Conv3d(w3, NUM_CLASSES, 1, rng)
        self.dec2 = ConvBlock(2 * w3, w2, rng)
        self.aux_shallow = Conv3d(w2, NUM_CLASSES, 1, rng)
        self.dec1 = ConvBlock(2 * w2, w1, rng)
        self.out_block = ConvBlock(2 * w1, w1, rng, depth=1)

    @property
    def decoder_channels(self) -> List[int]:
        """Channels of the gated decoder stages, deepest first."""
        w1, w2, w3 = self.widths
        return [w3, w2, w1]

    @staticmethod
    def check_size(size: int) -> None:
        if size % 8 != 0:
            raise ConfigError(f"volume edge {size} must be divisible by 8", key="data.crop_size")

    def encode(self, x: Tensor) -> EncoderFeatures:
        for s in x.shape[2:]:
            self.check_size(s)
        s1 = self.enc1(x)
        s2 = self.enc2(self.down1(s1))
        s3 = self.enc3(self.down2(s2))
        z = self.bottleneck(self.down3(s3))
        return EncoderFeatures([s1, s2, s3], z)

    @staticmethod
    def _up_concat(x: Tensor, skip: Tensor) -> Tensor:
        return T.concat([T.interp3d(x, skip.shape[2:], mode="trilinear"), skip], axis=1)

    def __call__(self, x: Tensor, gate: Optional[GateFn] = None) -> BackboneOutput:
        """
        Run the trunk.

        Args:
            x: Input [B, C_in, S, S, S] (already fused, when MMCF is wired)
            gate: Optional callable (d, stage) -> gated d applied after each
                decoder stage; stage 0 is the deepest

        Returns:
            BackboneOutput
        """
        enc = self.encode(x)
        s1, s2, s3 = enc.skips
        gate = gate or (lambda d, stage: d)

        d3 = gate(self.dec3(enc.bottleneck), 0)
        aux_deep = self.aux_deep(d3)

        d2 = gate(self.dec2(self._up_concat(d3, s3)), 1)
        aux_shallow = self.aux_shallow(d2)

        d1 = gate(self.dec1(self._up_concat(d2, s2)), 2)

        features = self.out_block(self._up_concat(d1, s1))
        return BackboneOutput(features, [aux_deep, aux_shallow], [d3, d2, d1])
