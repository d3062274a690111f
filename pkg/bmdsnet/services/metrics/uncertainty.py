"""Uncertainty-error discrimination."""

import numpy as np
from sklearn.metrics import roc_auc_score

from bmdsnet.errors import DimensionError, DomainError


def uncertainty_error_auc(variance: np.ndarray, error_mask: np.ndarray) -> float:
    """
    ROC AUC of the variance as a score for error voxels (ties averaged).

    Raises:
        DomainError: if every voxel is an error or none is
    """
    score = np.asarray(variance, dtype=np.float64).reshape(-1)
    errors = np.asarray(error_mask).reshape(-1).astype(bool)
    if score.shape != errors.shape:
        raise DimensionError(f"uncertainty_error_auc: {score.shape} scores vs {errors.shape} labels")
    n_err = int(errors.sum())
    if n_err == 0 or n_err == errors.size:
        raise DomainError("uncertainty AUC is undefined without both error and correct voxels")
    return float(roc_auc_score(errors, score))
