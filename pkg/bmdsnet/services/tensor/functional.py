"""
Elementwise Operations

Differentiable elementwise ops. Binary ops accept either identical shapes or
one scalar operand (shape ()); anything else is a DimensionError.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from bmdsnet.errors import DimensionError, DomainError
from .tensor import Function, Tensor, as_tensor

SOFTPLUS_LINEAR_THRESHOLD = 30.0


def _binary_shapes(a: np.ndarray, b: np.ndarray, op: str) -> None:
    if a.shape == b.shape or a.ndim == 0 or b.ndim == 0:
        return
    raise DimensionError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if shape == ():
        return np.asarray(grad.sum())
    return grad


class Add(Function):
    def forward(self, a, b):
        _binary_shapes(a, b, "add")
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        return _unbroadcast(grad, self.shapes[0]), _unbroadcast(grad, self.shapes[1])


class Sub(Function):
    def forward(self, a, b):
        _binary_shapes(a, b, "sub")
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad):
        return _unbroadcast(grad, self.shapes[0]), _unbroadcast(-grad, self.shapes[1])


class Mul(Function):
    def forward(self, a, b):
        _binary_shapes(a, b, "mul")
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return (_unbroadcast(grad * self.b, self.a.shape),
                _unbroadcast(grad * self.a, self.b.shape))


class Div(Function):
    def forward(self, a, b):
        _binary_shapes(a, b, "div")
        if np.any(b == 0):
            raise DomainError("div: zero in denominator")
        self.a, self.b = a, b
        return a / b

    def backward(self, grad):
        return (_unbroadcast(grad / self.b, self.a.shape),
                _unbroadcast(-grad * self.a / (self.b ** 2), self.b.shape))


class ScalarMul(Function):
    def forward(self, a, scale: float = 1.0):
        self.scale = float(scale)
        return a * self.scale

    def backward(self, grad):
        return (grad * self.scale,)


class Sigmoid(Function):
    def forward(self, a):
        self.out = expit(a)
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1.0 - self.out),)


class Relu(Function):
    def forward(self, a):
        self.mask = a > 0
        return np.where(self.mask, a, 0.0)

    def backward(self, grad):
        return (grad * self.mask,)


class Softplus(Function):
    """log(1 + e^x), linear above the threshold."""

    def forward(self, a):
        self.a = a
        clipped = np.minimum(a, SOFTPLUS_LINEAR_THRESHOLD)
        return np.where(a > SOFTPLUS_LINEAR_THRESHOLD, a, np.log1p(np.exp(clipped)))

    def backward(self, grad):
        return (grad * expit(self.a),)


class Exp(Function):
    def forward(self, a):
        self.out = np.exp(a)
        return self.out

    def backward(self, grad):
        return (grad * self.out,)


class Log(Function):
    def forward(self, a):
        if np.any(a <= 0):
            raise DomainError("log: input must be strictly positive")
        self.a = a
        return np.log(a)

    def backward(self, grad):
        return (grad / self.a,)


class Square(Function):
    def forward(self, a):
        self.a = a
        return a * a

    def backward(self, grad):
        return (2.0 * grad * self.a,)


class Concat(Function):
    def forward(self, *arrays, axis: int = 1):
        if not arrays:
            raise DimensionError("concat: no inputs")
        ref = arrays[0].shape
        for arr in arrays[1:]:
            if arr.ndim != len(ref) or any(
                s != r for i, (s, r) in enumerate(zip(arr.shape, ref)) if i != axis % len(ref)
            ):
                raise DimensionError(f"concat: shapes {ref} and {arr.shape} differ off axis {axis}")
        self.axis = axis
        self.splits = np.cumsum([arr.shape[axis] for arr in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        return tuple(np.split(grad, self.splits, axis=self.axis))


class Reshape(Function):
    def forward(self, a, shape: Sequence[int] = ()):
        self.in_shape = a.shape
        try:
            return a.reshape(tuple(shape))
        except ValueError as e:
            raise DimensionError(f"reshape: {a.shape} -> {tuple(shape)}: {e}") from e

    def backward(self, grad):
        return (grad.reshape(self.in_shape),)


class BroadcastChannels(Function):
    """Repeat a single-channel map [B,1,...] to C channels."""

    def forward(self, a, channels: int = 1):
        if a.ndim < 2 or a.shape[1] != 1:
            raise DimensionError(f"broadcast_channels: expected [B,1,...], got {a.shape}")
        return np.repeat(a, channels, axis=1)

    def backward(self, grad):
        return (grad.sum(axis=1, keepdims=True),)


Operand = Union[Tensor, float]


def add(a: Operand, b: Operand) -> Tensor:
    return Add.apply(a, b)


def sub(a: Operand, b: Operand) -> Tensor:
    return Sub.apply(a, b)


def mul(a: Operand, b: Operand) -> Tensor:
    return Mul.apply(a, b)


def div(a: Operand, b: Operand) -> Tensor:
    return Div.apply(a, b)


def scalar_mul(a: Tensor, scale: float) -> Tensor:
    return ScalarMul.apply(a, scale=scale)


def sigmoid(a: Tensor) -> Tensor:
    return Sigmoid.apply(a)


def relu(a: Tensor) -> Tensor:
    return Relu.apply(a)


def softplus(a: Tensor) -> Tensor:
    return Softplus.apply(a)


def exp(a: Tensor) -> Tensor:
    return Exp.apply(a)


def log(a: Tensor) -> Tensor:
    return Log.apply(a)


def square(a: Tensor) -> Tensor:
    return Square.apply(a)


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(a, shape=tuple(shape))


def broadcast_channels(a: Tensor, channels: int) -> Tensor:
    return BroadcastChannels.apply(a, channels=channels)


def constant(value, like: Optional[Tensor] = None) -> Tensor:
    """Constant tensor; with `like`, a full array of like's shape."""
    if like is not None:
        return as_tensor(np.full(like.shape, float(value)))
    return as_tensor(value)
