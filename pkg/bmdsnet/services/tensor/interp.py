"""
3D Resampling

Nearest and trilinear resizing of [B, C, H, W, D] tensors. Both modes are
separable: one [out, in] sampling matrix per spatial axis, applied in turn.
"""

from typing import Sequence, Tuple

import numpy as np

from bmdsnet.errors import DimensionError
from .tensor import Function, Tensor

MODES = ("nearest", "trilinear")


def sampling_matrix(in_size: int, out_size: int, mode: str) -> np.ndarray:
    """
    Build the [out_size, in_size] resampling matrix for one axis.

    Nearest picks floor(i * in/out). Trilinear (per axis: linear) follows the
    align_corners=False convention: src = (i + 0.5) * in/out - 0.5, clamped
    at 0 and at the last input index.
    """
    scale = in_size / out_size
    mat = np.zeros((out_size, in_size))
    idx = np.arange(out_size)

    if mode == "nearest":
        src = np.minimum(np.floor(idx * scale).astype(int), in_size - 1)
        mat[idx, src] = 1.0
        return mat

    src = np.maximum((idx + 0.5) * scale - 0.5, 0.0)
    lo = np.minimum(np.floor(src).astype(int), in_size - 1)
    hi = np.minimum(lo + 1, in_size - 1)
    frac = src - lo
    np.add.at(mat, (idx, lo), 1.0 - frac)
    np.add.at(mat, (idx, hi), frac)
    return mat


class Interp3d(Function):
    def forward(self, x, target_shape: Tuple[int, int, int] = (1, 1, 1), mode: str = "trilinear"):
        if x.ndim != 5:
            raise DimensionError(f"interp3d input must be [B,C,H,W,D], got shape {x.shape}")
        if len(target_shape) != 3 or any(int(t) < 1 for t in target_shape):
            raise DimensionError(f"interp3d target dims must be three values >= 1, got {target_shape}")
        if mode not in MODES:
            raise DimensionError(f"interp3d mode must be one of {MODES}, got {mode!r}")

        self.mats = [sampling_matrix(x.shape[2 + a], int(target_shape[a]), mode) for a in range(3)]
        return np.stack([_resample(item, self.mats) for item in x])

    def backward(self, grad):
        mats_t = [m.T for m in self.mats]
        return (np.stack([_resample(item, mats_t) for item in grad]),)


def _resample(item: np.ndarray, mats) -> np.ndarray:
    """Apply one matrix per spatial axis to a [C, H, W, D] array."""
    out = item
    for axis, mat in enumerate(mats):
        out = np.moveaxis(np.tensordot(mat, out, axes=([1], [1 + axis])), 0, 1 + axis)
    return np.ascontiguousarray(out)


def interp3d(x: Tensor, target_shape: Sequence[int], mode: str = "trilinear") -> Tensor:
    return Interp3d.apply(x, target_shape=tuple(int(t) for t in target_shape), mode=mode)
