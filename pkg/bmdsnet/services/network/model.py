"""
BMDS-Net Model

Full pipeline: optional MMCF fusion, the convolutional trunk with optional DDS
gates on the decoder, auxiliary heads and a swappable segmentation head.

Initialization streams are separated per component (trunk, MMCF, DDS, head),
so the trunk and head weights do not depend on which modules are wired.
"""

from typing import List, NamedTuple, Optional, Sequence, Union
import logging

import numpy as np

from bmdsnet.schemas.experiment import ExperimentConfig, ModelSection
from bmdsnet.services.tensor import Tensor, as_tensor
from .backbone import NUM_CLASSES, Backbone, BackboneOutput
from .bayes import BayesianConv3d, init_bayes_head
from .fusion import DDS, MMCF, neutral_attention
from .module import Conv3d, Module

logger = logging.getLogger(__name__)

STREAM_BACKBONE = 0
STREAM_MMCF = 1
STREAM_DDS = 2
STREAM_HEAD = 3


class ModelWiring(NamedTuple):
    """Which of the two mechanisms are wired, with the ablation row name."""
    name: str
    use_mmcf: bool
    use_dds: bool


ABLATION_VARIANTS: List[ModelWiring] = [
    ModelWiring("Baseline", False, False),
    ModelWiring("MMCF Only", True, False),
    ModelWiring("DDS Only", False, True),
    ModelWiring("BMDS-Net", True, True),
]


def ablation_config(use_mmcf: bool, use_dds: bool) -> ModelWiring:
    """Wiring for one ablation row."""
    for variant in ABLATION_VARIANTS:
        if variant.use_mmcf == bool(use_mmcf) and variant.use_dds == bool(use_dds):
            return variant
    raise AssertionError("unreachable")


class TrunkOutput(NamedTuple):
    features: Tensor
    logits_aux: List[Tensor]
    d_refined: List[Tensor]
    m_att: Optional[Tensor]
    u_map: Optional[Tensor]


class NetOutput(NamedTuple):
    """
    Forward result.

    Attributes:
        logits_main: [B, 3, S, S, S]
        logits_aux: [deep at S/8, shallow at S/4]
        m_att: Attention map [B, C_in, S, S, S]; the constant 0.5 map for DDS-only; None when neither is wired
        u_map: Uncertainty guidance map [B, 1, S, S, S], or None without MMCF
        d_refined: Decoder stage features after gating, deepest first
        features: Full-resolution features feeding the head
        distill_enabled: True when a learned attention map drives the gates
    """
    logits_main: Tensor
    logits_aux: List[Tensor]
    m_att: Optional[Tensor]
    u_map: Optional[Tensor]
    d_refined: List[Tensor]
    features: Tensor
    distill_enabled: bool


class BMDSNet(Module):
    """
    Segmentation network.

    Args:
        num_modalities: Input channels
        widths: (w1, w2, w3)
        seed: Initialization seed
        wiring: MMCF/DDS wiring
        alpha_init: Initial MMCF alpha
        gamma_init: Initial DDS gamma
    """

    def __init__(self, num_modalities: int = 4, widths: Sequence[int] = (16, 32, 64), seed: int = 0,
                 wiring: Optional[ModelWiring] = None, alpha_init: float = 0.0, gamma_init: float = 0.1):
        super().__init__()
        wiring = wiring or ABLATION_VARIANTS[-1]
        self.wiring = wiring
        self.num_modalities = num_modalities
        self.seed = int(seed)

        self.backbone = Backbone(num_modalities, widths, np.random.default_rng([self.seed, STREAM_BACKBONE]))
        self.mmcf = (MMCF(num_modalities, np.random.default_rng([self.seed, STREAM_MMCF]), alpha_init=alpha_init)
                     if wiring.use_mmcf else None)
        self.dds = (DDS(self.backbone.decoder_channels, np.random.default_rng([self.seed, STREAM_DDS]),
                        gamma_init=gamma_init)
                    if wiring.use_dds else None)
        self.head: Union[Conv3d, BayesianConv3d] = Conv3d(
            self.backbone.widths[0], NUM_CLASSES, 1, np.random.default_rng([self.seed, STREAM_HEAD])
        )

    @property
    def is_bayesian(self) -> bool:
        return isinstance(self.head, BayesianConv3d)

    @property
    def alpha(self) -> Optional[float]:
        return float(self.mmcf.alpha.data) if self.mmcf is not None else None

    @property
    def gamma(self) -> Optional[float]:
        return float(self.dds.gamma.data) if self.dds is not None else None

    def trunk(self, x: Union[Tensor, np.ndarray]) -> TrunkOutput:
        """Everything up to (not including) the segmentation head."""
        x = as_tensor(x)
        m_att = u_map = None
        if self.mmcf is not None:
            x_in, m_att, u_map = self.mmcf(x)
        else:
            x_in = x

        gate = None
        if self.dds is not None:
            if m_att is None:
                m_att = neutral_attention(x)
            attention = m_att

            def gate(d: Tensor, stage: int) -> Tensor:
                return self.dds(d, attention, stage)

        out: BackboneOutput = self.backbone(x_in, gate=gate)
        return TrunkOutput(out.features, out.logits_aux, out.d_refined, m_att, u_map)

    def __call__(self, x: Union[Tensor, np.ndarray], head_weights: Optional[Sequence[Tensor]] = None) -> NetOutput:
        trunk = self.trunk(x)
        if self.is_bayesian:
            logits = self.head(trunk.features, head_weights)
        else:
            logits = self.head(trunk.features)
        return NetOutput(
            logits_main=logits,
            logits_aux=trunk.logits_aux,
            m_att=trunk.m_att,
            u_map=trunk.u_map,
            d_refined=trunk.d_refined,
            features=trunk.features,
            distill_enabled=self.wiring.use_mmcf and self.wiring.use_dds,
        )

    def convert_to_bayes(self, rho_init: float) -> BayesianConv3d:
        """Swap the deterministic head for a variational one initialised from it."""
        if self.is_bayesian:
            return self.head
        self.head = init_bayes_head(self.head, rho_init)
        return self.head

    def stage2_parameters(self) -> List[Tensor]:
        """Freeze everything except the variational head and return its parameters."""
        self.freeze()
        self.head.unfreeze()
        return self.head.parameters()


def count_parameters(net: Module) -> int:
    return net.num_parameters()


def build_model(model_cfg: ModelSection, seed: int, num_modalities: int = 4,
                bayesian: bool = False, rho_init: float = -5.0) -> BMDSNet:
    net = BMDSNet(
        num_modalities=num_modalities,
        widths=model_cfg.widths,
        seed=seed,
        wiring=ablation_config(model_cfg.use_mmcf, model_cfg.use_dds),
        alpha_init=model_cfg.alpha_init,
        gamma_init=model_cfg.gamma_init,
    )
    if bayesian:
        net.convert_to_bayes(rho_init)
    return net


def build_from_config(cfg: ExperimentConfig, bayesian: bool = False) -> BMDSNet:
    return build_model(cfg.model, cfg.seed, cfg.data.num_modalities, bayesian, cfg.stage2.rho_init)
