"""
Calibration

Expected calibration error over voxel-wise binary predictions, its per-bin
reliability table, and negative log-likelihood.
"""

from typing import List, NamedTuple, Tuple

import numpy as np

from bmdsnet.errors import DomainError

NLL_CLAMP = 1e-7


def binary_confidence(probs: np.ndarray, labels: np.ndarray,
                      threshold: float = 0.5) -> Tuple[np.ndarray, np.ndarray]:
    """
    Confidence max(p, 1-p) and correctness of the thresholded prediction.

    Returns:
        (confidence, correct) as flat arrays
    """
    p = np.asarray(probs, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1).astype(bool)
    confidence = np.maximum(p, 1.0 - p)
    correct = (p >= threshold) == y
    return confidence, correct.astype(np.float64)


class ReliabilityBin(NamedTuple):
    lower: float
    upper: float
    count: int
    accuracy: float
    confidence: float


def _bin_index(confidence: np.ndarray, bins: int) -> np.ndarray:
    if bins < 1:
        raise DomainError(f"ECE needs at least one bin, got {bins}")
    # equal-width bins over [0.5, 1]; the last bin is closed on the right
    idx = np.floor((confidence - 0.5) / 0.5 * bins).astype(int)
    return np.clip(idx, 0, bins - 1)


def reliability_table(confidence: np.ndarray, correct: np.ndarray, bins: int = 10) -> List[ReliabilityBin]:
    """Per-bin count, accuracy and mean confidence; empty bins report zeros."""
    confidence = np.asarray(confidence, dtype=np.float64).reshape(-1)
    correct = np.asarray(correct, dtype=np.float64).reshape(-1)
    idx = _bin_index(confidence, bins)
    rows: List[ReliabilityBin] = []
    for b in range(bins):
        sel = idx == b
        n = int(sel.sum())
        rows.append(ReliabilityBin(
            lower=0.5 + 0.5 * b / bins,
            upper=0.5 + 0.5 * (b + 1) / bins,
            count=n,
            accuracy=float(correct[sel].mean()) if n else 0.0,
            confidence=float(confidence[sel].mean()) if n else 0.0,
        ))
    return rows


def expected_calibration_error(confidence: np.ndarray, correct: np.ndarray, bins: int = 10) -> float:
    """
    ECE = sum_b (n_b / N) * |acc(b) - conf(b)|, empty bins skipped.

    Raises:
        DomainError: if bins < 1
    """
    table = reliability_table(confidence, correct, bins)
    total = sum(row.count for row in table)
    if total == 0:
        return 0.0
    return float(sum(row.count / total * abs(row.accuracy - row.confidence) for row in table if row.count))


def ece(probs: np.ndarray, labels: np.ndarray, bins: int = 10, threshold: float = 0.5) -> float:
    """ECE of binary probabilities against binary labels."""
    confidence, correct = binary_confidence(probs, labels, threshold)
    return expected_calibration_error(confidence, correct, bins)


def nll(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary negative log-likelihood with probabilities clamped to [1e-7, 1 - 1e-7]."""
    p = np.clip(np.asarray(probs, dtype=np.float64), NLL_CLAMP, 1.0 - NLL_CLAMP)
    y = np.asarray(labels, dtype=np.float64)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))
