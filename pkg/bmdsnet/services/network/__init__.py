"""
Network

MMCF fusion, DDS gating, the convolutional trunk, the variational head and
the assembled model.
"""

from .module import Module, Conv3d
from .fusion import MMCF, DDS, MmcfOutput, mmcf_forward, dds_gate, neutral_attention
from .backbone import Backbone, BackboneOutput, ConvBlock, NUM_CLASSES, DEFAULT_WIDTHS
from .bayes import (
    BayesianConv3d, PredictiveOutput, ElboTerms,
    sample_weights, kl_to_prior, init_bayes_head, elbo_loss, elbo_terms,
    predictive_moments, mc_predict,
)
from .model import (
    BMDSNet, NetOutput, ModelWiring, ABLATION_VARIANTS,
    ablation_config, count_parameters, build_model, build_from_config,
)

__all__ = [
    "Module",
    "Conv3d",
    "MMCF",
    "DDS",
    "MmcfOutput",
    "mmcf_forward",
    "dds_gate",
    "neutral_attention",
    "Backbone",
    "BackboneOutput",
    "ConvBlock",
    "NUM_CLASSES",
    "DEFAULT_WIDTHS",
    "BayesianConv3d",
    "PredictiveOutput",
    "ElboTerms",
    "sample_weights",
    "kl_to_prior",
    "init_bayes_head",
    "elbo_loss",
    "elbo_terms",
    "predictive_moments",
    "mc_predict",
    "BMDSNet",
    "NetOutput",
    "ModelWiring",
    "ABLATION_VARIANTS",
    "ablation_config",
    "count_parameters",
    "build_model",
    "build_from_config",
]
