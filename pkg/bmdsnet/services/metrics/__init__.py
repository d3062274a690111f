"""
Evaluation Metrics

Dice, HD95, calibration (ECE, reliability bins, NLL) and uncertainty AUC.
"""

from .overlap import dice_score
from .surface import hd95, boundary_voxels, nearest_rank, directed_distances
from .calibration import (
    ReliabilityBin, binary_confidence, reliability_table,
    expected_calibration_error, ece, nll,
)
from .uncertainty import uncertainty_error_auc

__all__ = [
    "dice_score",
    "hd95",
    "boundary_voxels",
    "nearest_rank",
    "directed_distances",
    "ReliabilityBin",
    "binary_confidence",
    "reliability_table",
    "expected_calibration_error",
    "ece",
    "nll",
    "uncertainty_error_auc",
]
