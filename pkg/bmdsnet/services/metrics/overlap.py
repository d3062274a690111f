"""Overlap metrics."""

import numpy as np

from bmdsnet.errors import DimensionError


def dice_score(pred: np.ndarray, gt: np.ndarray) -> float:
    """
    2|P ∩ G| / (|P| + |G|) on binary masks; 1.0 when both are empty.

    Raises:
        DimensionError: on shape mismatch
    """
    pred = np.asarray(pred).astype(bool)
    gt = np.asarray(gt).astype(bool)
    if pred.shape != gt.shape:
        raise DimensionError(f"dice_score: shapes {pred.shape} and {gt.shape} differ")
    total = int(pred.sum()) + int(gt.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(pred, gt).sum()) / total
