"""
Surface Distance

95th-percentile Hausdorff distance between mask boundaries, unit voxel
spacing. A boundary voxel is a foreground voxel with at least one
six-connected background neighbour; voxels outside the array count as
background.
"""

from typing import Optional
import math

import numpy as np
from scipy.ndimage import binary_erosion, generate_binary_structure
from scipy.spatial import cKDTree

from bmdsnet.errors import DimensionError

PERCENTILE = 95.0


def boundary_voxels(mask: np.ndarray) -> np.ndarray:
    """Coordinates [N, ndim] of boundary voxels."""
    mask = np.asarray(mask).astype(bool)
    structure = generate_binary_structure(mask.ndim, 1)
    interior = binary_erosion(mask, structure=structure, border_value=0)
    return np.argwhere(mask & ~interior)


def nearest_rank(values: np.ndarray, percentile: float = PERCENTILE) -> float:
    """Nearest-rank percentile: the ceil(q/100 * n)-th smallest value."""
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    rank = max(1, math.ceil(percentile / 100.0 * ordered.size))
    return float(ordered[rank - 1])


def directed_distances(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Distance from every point of src to its nearest point of dst."""
    distances, _ = cKDTree(dst).query(src, k=1)
    return np.atleast_1d(distances).astype(np.float64)


def hd95(pred: np.ndarray, gt: np.ndarray, percentile: float = PERCENTILE) -> Optional[float]:
    """
    max of the two directed nearest-rank 95th percentiles of boundary distances.

    Returns:
        0.0 when both masks are empty, None when exactly one is empty
    """
    pred = np.asarray(pred).astype(bool)
    gt = np.asarray(gt).astype(bool)
    if pred.shape != gt.shape:
        raise DimensionError(f"hd95: shapes {pred.shape} and {gt.shape} differ")

    p_any, g_any = bool(pred.any()), bool(gt.any())
    if not p_any and not g_any:
        return 0.0
    if p_any != g_any:
        return None

    bp = boundary_voxels(pred)
    bg = boundary_voxels(gt)
    forward = nearest_rank(directed_distances(bp, bg), percentile)
    backward = nearest_rank(directed_distances(bg, bp), percentile)
    return max(forward, backward)
