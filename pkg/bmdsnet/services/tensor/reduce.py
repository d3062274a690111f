"""
Reductions and Normalisations

Axis reductions (sum, mean, population variance) plus the channel-wise
normalisations used by the fusion block.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np

from bmdsnet.errors import DimensionError
from .tensor import Function, Tensor

MINMAX_EPS = 1e-6

Axes = Optional[Union[int, Sequence[int]]]


def _normalize_axes(axes: Axes, ndim: int) -> Tuple[int, ...]:
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, int):
        axes = (axes,)
    axes = tuple(axes)
    if not axes:
        raise DimensionError("reduction over an empty axis set")
    out = []
    for ax in axes:
        if not -ndim <= ax < ndim:
            raise DimensionError(f"axis {ax} out of range for ndim {ndim}")
        out.append(ax % ndim)
    if len(set(out)) != len(out):
        raise DimensionError(f"repeated axes {axes}")
    return tuple(sorted(out))


class Sum(Function):
    def forward(self, a, axes: Axes = None, keepdims: bool = False):
        self.in_shape = a.shape
        self.axes = _normalize_axes(axes, a.ndim)
        self.keepdims = keepdims
        return a.sum(axis=self.axes, keepdims=keepdims)

    def backward(self, grad):
        if not self.keepdims:
            grad = np.expand_dims(grad, self.axes)
        return (np.broadcast_to(grad, self.in_shape).copy(),)


class Mean(Function):
    def forward(self, a, axes: Axes = None, keepdims: bool = False):
        self.in_shape = a.shape
        self.axes = _normalize_axes(axes, a.ndim)
        self.keepdims = keepdims
        self.count = int(np.prod([a.shape[ax] for ax in self.axes]))
        return a.mean(axis=self.axes, keepdims=keepdims)

    def backward(self, grad):
        if not self.keepdims:
            grad = np.expand_dims(grad, self.axes)
        return (np.broadcast_to(grad / self.count, self.in_shape).copy(),)


class Var(Function):
    """Population variance (divide by n)."""

    def forward(self, a, axes: Axes = None, keepdims: bool = False):
        self.axes = _normalize_axes(axes, a.ndim)
        self.keepdims = keepdims
        self.count = int(np.prod([a.shape[ax] for ax in self.axes]))
        self.centered = a - a.mean(axis=self.axes, keepdims=True)
        return (self.centered ** 2).mean(axis=self.axes, keepdims=keepdims)

    def backward(self, grad):
        if not self.keepdims:
            grad = np.expand_dims(grad, self.axes)
        return (grad * 2.0 * self.centered / self.count,)


class ChannelL2Norm(Function):
    """Per-voxel L2 norm across channels, [B,C,...] -> [B,1,...]."""

    def forward(self, a):
        if a.ndim < 2:
            raise DimensionError(f"channel_l2_norm expects [B,C,...], got {a.shape}")
        self.a = a
        self.out = np.sqrt((a * a).sum(axis=1, keepdims=True))
        return self.out

    def backward(self, grad):
        # zero where the norm is zero
        safe = np.where(self.out > 0, self.out, 1.0)
        return (np.where(self.out > 0, grad * self.a / safe, 0.0),)


class ChannelSoftmax(Function):
    """Softmax over axis 1."""

    def forward(self, a):
        if a.ndim < 2:
            raise DimensionError(f"channel_softmax expects [B,C,...], got {a.shape}")
        shifted = a - a.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        self.out = e / e.sum(axis=1, keepdims=True)
        return self.out

    def backward(self, grad):
        dot = (grad * self.out).sum(axis=1, keepdims=True)
        return (self.out * (grad - dot),)


class SpatialMinMaxNorm(Function):
    """
    Rescale each (batch, channel) map to [0, 1]: (x - min) / (max - min + eps).

    The gradient of min and max is routed to a single arg-extremum voxel.
    """

    def forward(self, a, eps: float = MINMAX_EPS):
        if a.ndim < 3:
            raise DimensionError(f"spatial_minmax_norm expects [B,C,*spatial], got {a.shape}")
        b, c = a.shape[:2]
        flat = a.reshape(b, c, -1)
        self.flat_shape = flat.shape
        self.in_shape = a.shape
        self.arg_min = flat.argmin(axis=2)
        self.arg_max = flat.argmax(axis=2)
        lo = flat.min(axis=2, keepdims=True)
        hi = flat.max(axis=2, keepdims=True)
        self.denom = hi - lo + eps
        self.norm = (flat - lo) / self.denom
        return self.norm.reshape(a.shape)

    def backward(self, grad):
        g = grad.reshape(self.flat_shape)
        inv = 1.0 / self.denom
        dx = g * inv
        # d/d(lo): -1/den + (x-lo)/den^2 ; d/d(hi): -(x-lo)/den^2
        g_lo = (g * (-inv + self.norm * inv)).sum(axis=2)
        g_hi = (g * (-self.norm * inv)).sum(axis=2)
        bi, ci = np.indices(self.arg_min.shape)
        np.add.at(dx, (bi, ci, self.arg_min), g_lo)
        np.add.at(dx, (bi, ci, self.arg_max), g_hi)
        return (dx.reshape(self.in_shape),)


def sum(a: Tensor, axes: Axes = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    return Sum.apply(a, axes=axes, keepdims=keepdims)


def mean(a: Tensor, axes: Axes = None, keepdims: bool = False) -> Tensor:
    return Mean.apply(a, axes=axes, keepdims=keepdims)


def var(a: Tensor, axes: Axes = None, keepdims: bool = False) -> Tensor:
    return Var.apply(a, axes=axes, keepdims=keepdims)


def channel_l2_norm(a: Tensor) -> Tensor:
    return ChannelL2Norm.apply(a)


def channel_softmax(a: Tensor) -> Tensor:
    return ChannelSoftmax.apply(a)


def spatial_minmax_norm(a: Tensor, eps: float = MINMAX_EPS) -> Tensor:
    return SpatialMinMaxNorm.apply(a, eps=eps)
