"""
Tensor and Function

Reverse-mode automatic differentiation over dense float64 arrays.

A `Tensor` wraps a NumPy array. Every differentiable operation is a `Function`
subclass; applying it to tensors that require grad records the function as the
output's graph node. `Tensor.backward` walks the recorded graph in reverse
topological order and accumulates gradients into leaf tensors.
"""

from typing import Any, Iterable, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np

from bmdsnet.errors import DimensionError, GraphError

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, float, int, Sequence[float]]


class Function:
    """
    Base class for differentiable operations.

    Subclasses implement `forward` on raw arrays and `backward`, which maps the
    gradient w.r.t. the output to one gradient (or None) per input tensor.
    Anything `backward` needs is stashed on `self` during `forward`.
    """

    def __init__(self, *inputs: "Tensor"):
        self.inputs = inputs

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no forward pass")

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError(f"{type(self).__name__} has no backward pass")

    @classmethod
    def apply(cls, *inputs: Union["Tensor", ArrayLike], **kwargs: Any) -> "Tensor":
        """
        Run the forward pass and wire the result into the graph.

        Args:
            *inputs: Tensors (or array-likes, wrapped as constants)
            **kwargs: Non-differentiable options passed to `forward`

        Returns:
            Output tensor; it carries a graph node only when some input
            requires grad.
        """
        tensors = tuple(as_tensor(t) for t in inputs)
        fn = cls(*tensors)
        out = fn.forward(*(t.data for t in tensors), **kwargs)
        requires_grad = any(t.requires_grad for t in tensors)
        return Tensor(out, requires_grad=requires_grad, node=fn if requires_grad else None)


class Tensor:
    """
    Dense float64 array participating in a reverse-mode autodiff graph.

    Attributes:
        data: float64 ndarray, row-major
        requires_grad: whether gradients flow to (and accumulate in) this tensor
        grad: accumulated gradient for leaves, same shape as data, or None
        node: the Function that produced this tensor, or None for leaves
    """

    def __init__(self, data: ArrayLike, requires_grad: bool = False,
                 node: Optional[Function] = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.node = node

    # --- array protocol -------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """Same data, cut from the graph."""
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # --- operators --------------------------------------------------------

    def __add__(self, other: Union["Tensor", float]) -> "Tensor":
        from .functional import add
        return add(self, other)

    def __radd__(self, other: float) -> "Tensor":
        from .functional import add
        return add(other, self)

    def __sub__(self, other: Union["Tensor", float]) -> "Tensor":
        from .functional import sub
        return sub(self, other)

    def __rsub__(self, other: float) -> "Tensor":
        from .functional import sub
        return sub(other, self)

    def __mul__(self, other: Union["Tensor", float]) -> "Tensor":
        from .functional import mul, scalar_mul
        if isinstance(other, (int, float)):
            return scalar_mul(self, float(other))
        return mul(self, other)

    def __rmul__(self, other: float) -> "Tensor":
        return self.__mul__(other)

    def __truediv__(self, other: Union["Tensor", float]) -> "Tensor":
        from .functional import div, scalar_mul
        if isinstance(other, (int, float)):
            return scalar_mul(self, 1.0 / float(other))
        return div(self, other)

    def __neg__(self) -> "Tensor":
        from .functional import scalar_mul
        return scalar_mul(self, -1.0)

    # --- autodiff -----------------------------------------------------------

    def backward(self) -> None:
        """
        Accumulate d(self)/d(leaf) into every reachable leaf requiring grad.

        Repeated calls accumulate; clear grads between steps.

        Raises:
            GraphError: if self is not a scalar or no leaf requires grad
        """
        if self.data.size != 1:
            raise GraphError(f"backward needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise GraphError("loss is not reachable from any tensor that requires grad")

        order = _topological_order(self)
        pending = {id(self): np.ones_like(self.data)}

        for tensor in reversed(order):
            grad = pending.pop(id(tensor), None)
            if grad is None:
                continue
            if tensor.node is None:
                if tensor.requires_grad:
                    tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad
                continue

            input_grads = tensor.node.backward(grad)
            for inp, inp_grad in zip(tensor.node.inputs, input_grads):
                if inp_grad is None or not inp.requires_grad:
                    continue
                key = id(inp)
                if key in pending:
                    pending[key] = pending[key] + inp_grad
                else:
                    pending[key] = inp_grad


def _topological_order(root: Tensor) -> List[Tensor]:
    """Post-order over the graph below root, inputs before consumers."""
    order: List[Tensor] = []
    visited = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]

    while stack:
        tensor, expanded = stack.pop()
        if expanded:
            order.append(tensor)
            continue
        if id(tensor) in visited:
            continue
        visited.add(id(tensor))
        stack.append((tensor, True))
        if tensor.node is not None:
            for inp in reversed(tensor.node.inputs):
                if inp.requires_grad and id(inp) not in visited:
                    stack.append((inp, False))

    return order


def as_tensor(value: Union[Tensor, ArrayLike]) -> Tensor:
    """Wrap non-tensors as constants."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=False)


def parameter(data: ArrayLike) -> Tensor:
    """Leaf tensor that owns a copy of data and requires grad."""
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def zero_grads(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.grad = None
