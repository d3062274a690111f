"""
Module

Parameter container with ordered registration, plus the Conv3d layer every
network block is built from.
"""

from collections import OrderedDict
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from bmdsnet.errors import DimensionError
from bmdsnet.services.tensor import Tensor, conv3d, parameter


class Module:
    """
    Base class for parameterized blocks.

    Attributes set to a `Tensor` with requires_grad become parameters; attributes
    set to a `Module` become submodules. Registration order is kept, so
    `named_parameters()` is stable across runs.
    """

    def __init__(self):
        object.__setattr__(self, "_params", OrderedDict())
        object.__setattr__(self, "_modules", OrderedDict())

    def __setattr__(self, name, value):
        params = self.__dict__.get("_params")
        modules = self.__dict__.get("_modules")
        if params is not None:
            params.pop(name, None)
            modules.pop(name, None)
            if isinstance(value, Module):
                modules[name] = value
            elif isinstance(value, Tensor) and value.requires_grad:
                params[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, p in self._params.items():
            yield prefix + name, p
        for name, mod in self._modules.items():
            yield from mod.named_parameters(prefix + name + ".")

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((name, p.data.copy()) for name, p in self.named_parameters())

    def load_state_dict(self, state: Dict[str, np.ndarray], strict: bool = True) -> List[str]:
        """
        Copy arrays into matching parameters.

        Returns:
            Names of parameters that had no entry in `state` (only when not strict)

        Raises:
            DimensionError: on a missing name (strict) or a shape mismatch
        """
        own = dict(self.named_parameters())
        missing = [name for name in own if name not in state]
        if strict and missing:
            raise DimensionError(f"state is missing parameters: {', '.join(missing)}")
        for name, p in own.items():
            if name not in state:
                continue
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.data.shape:
                raise DimensionError(f"parameter {name}: shape {value.shape} != expected {p.data.shape}")
            p.data = value.copy()
        return missing

    def freeze(self) -> None:
        for p in self.parameters():
            p.requires_grad = False

    def unfreeze(self) -> None:
        for p in self.parameters():
            p.requires_grad = True

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))


class Conv3d(Module):
    """
    Convolution layer; He-normal weights from the given generator, zero bias.

    Args:
        in_channels: Input channels
        out_channels: Output channels
        kernel_size: Odd cubic kernel size
        rng: Generator owning this layer's initialization stream
        stride: Spatial stride
        padding: Zero padding; defaults to (kernel_size - 1) // 2
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 rng: np.random.Generator, stride: int = 1, padding: Optional[int] = None):
        super().__init__()
        if kernel_size % 2 == 0:
            raise DimensionError(f"Conv3d kernel size must be odd, got {kernel_size}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = (kernel_size - 1) // 2 if padding is None else padding
        fan_in = in_channels * kernel_size ** 3
        self.weight = parameter(
            rng.normal(0.0, np.sqrt(2.0 / fan_in),
                       size=(out_channels, in_channels, kernel_size, kernel_size, kernel_size))
        )
        self.bias = parameter(np.zeros(out_channels))

    def __call__(self, x: Tensor) -> Tensor:
        return conv3d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)
