"""
3D Convolution

Cross-correlation over [B, C, H, W, D] volumes with a cubic odd kernel.
Each batch item is unrolled into an im2col matrix of its k^3 neighborhoods, so
the forward pass and the weight gradient are one matrix product per item; the
input gradient is scattered back one kernel offset at a time. Summation order
is fixed, so forward and backward are bit-deterministic.
"""

from typing import Optional, Tuple
import logging

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from bmdsnet.errors import DimensionError
from .tensor import Function, Tensor

logger = logging.getLogger(__name__)


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    """Floor-division output extent along one axis."""
    return (size + 2 * padding - kernel) // stride + 1


def _validate(x: np.ndarray, w: np.ndarray, b: Optional[np.ndarray],
              stride: int, padding: int) -> Tuple[int, int, int]:
    if x.ndim != 5:
        raise DimensionError(f"conv3d input must be [B,Ci,H,W,D], got shape {x.shape}")
    if w.ndim != 5:
        raise DimensionError(f"conv3d weight must be [Co,Ci,k,k,k], got shape {w.shape}")
    k = w.shape[2]
    if w.shape[3] != k or w.shape[4] != k:
        raise DimensionError(f"conv3d kernel must be cubic, got axes 2-4 = {w.shape[2:]}")
    if k % 2 == 0:
        raise DimensionError(f"conv3d kernel size must be odd, got {k}")
    if w.shape[1] != x.shape[1]:
        raise DimensionError(
            f"conv3d channel mismatch: input axis 1 = {x.shape[1]}, weight axis 1 = {w.shape[1]}"
        )
    if b is not None and b.shape != (w.shape[0],):
        raise DimensionError(f"conv3d bias must have shape ({w.shape[0]},), got {b.shape}")
    if stride < 1 or padding < 0:
        raise DimensionError(f"conv3d needs stride >= 1 and padding >= 0, got {stride}, {padding}")

    out = tuple(conv_output_size(s, k, stride, padding) for s in x.shape[2:])
    for axis, size in zip(("H", "W", "D"), out):
        if size < 1:
            raise DimensionError(f"conv3d output axis {axis} would be empty for input {x.shape[2:]}")
    return out


class Conv3d(Function):
    def forward(self, x, w, b=None, stride: int = 1, padding: int = 0):
        out_shape = _validate(x, w, b, stride, padding)
        self.k = w.shape[2]
        self.stride = stride
        self.padding = padding
        self.in_shape = x.shape
        self.out_shape = out_shape
        self.w = w
        self.has_bias = b is not None

        p = padding
        self.xpad = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p), (p, p))) if p else x

        # one GEMM per batch item keeps items bit-independent of batch size
        wmat = w.reshape(w.shape[0], -1).T
        out = np.empty((x.shape[0],) + out_shape + (w.shape[0],))
        for n in range(x.shape[0]):
            np.matmul(self._columns(n), wmat, out=out[n].reshape(-1, w.shape[0]))
        if b is not None:
            out += b
        return np.ascontiguousarray(out.transpose(0, 4, 1, 2, 3))

    def _columns(self, n: int) -> np.ndarray:
        """im2col of batch item n: [H'W'D', Ci*k^3], columns ordered like w.reshape(Co, -1)."""
        s = self.stride
        windows = sliding_window_view(self.xpad[n], (self.k,) * 3, axis=(1, 2, 3))[:, ::s, ::s, ::s]
        # [Ci, H', W', D', k, k, k] -> [H', W', D', Ci, k, k, k]
        return windows.transpose(1, 2, 3, 0, 4, 5, 6).reshape(-1, self.w[0].size)

    def _offsets(self):
        s = self.stride
        ho, wo, do = self.out_shape
        for i in range(self.k):
            for j in range(self.k):
                for l in range(self.k):
                    sl = (slice(i, i + s * (ho - 1) + 1, s),
                          slice(j, j + s * (wo - 1) + 1, s),
                          slice(l, l + s * (do - 1) + 1, s))
                    yield i, j, l, sl

    def backward(self, grad):
        co, ci = self.w.shape[:2]
        gw = np.zeros((co, self.w[0].size))
        gxpad = np.zeros_like(self.xpad)
        ho, wo, do = self.out_shape

        for n in range(grad.shape[0]):
            g = grad[n].reshape(co, -1)
            gw += g @ self._columns(n)
            # scatter back one kernel offset at a time; [Ci, H'W'D'] per offset
            for i, j, l, sl in self._offsets():
                gxpad[(n, slice(None)) + sl] += (self.w[:, :, i, j, l].T @ g).reshape(ci, ho, wo, do)

        p = self.padding
        gx = gxpad[:, :, p:p + self.in_shape[2], p:p + self.in_shape[3], p:p + self.in_shape[4]] if p else gxpad
        grads = [gx, gw.reshape(self.w.shape)]
        if self.has_bias:
            grads.append(grad.sum(axis=(0, 2, 3, 4)))
        return tuple(grads)


def conv3d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """
    3D cross-correlation.

    Args:
        x: Input [B, Ci, H, W, D]
        weight: Kernel [Co, Ci, k, k, k], k odd
        bias: Optional [Co]
        stride: Step along every spatial axis
        padding: Zero padding on every side

    Returns:
        Output [B, Co, H', W', D'] with H' = (H + 2p - k) // stride + 1
    """
    if bias is None:
        return Conv3d.apply(x, weight, stride=stride, padding=padding)
    return Conv3d.apply(x, weight, bias, stride=stride, padding=padding)
