"""
Finite-Difference Gradient Check

Compares analytic gradients from `Tensor.backward` with central differences.
"""

from typing import Callable, Dict, Sequence, Union
import logging

import numpy as np

from bmdsnet.errors import GradCheckError, GraphError
from .tensor import Tensor

logger = logging.getLogger(__name__)

Params = Union[Sequence[Tensor], Dict[str, Tensor]]


def _as_named(params: Params) -> Dict[str, Tensor]:
    if isinstance(params, dict):
        return dict(params)
    return {f"param{i}": p for i, p in enumerate(params)}


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max|analytic - numeric| / max(1e-12, max|numeric|)."""
    diff = float(np.max(np.abs(analytic - numeric))) if analytic.size else 0.0
    scale = float(np.max(np.abs(numeric))) if numeric.size else 0.0
    return diff / max(1e-12, scale)


def grad_check(f: Callable[[], Tensor], params: Params, h: float = 1e-5,
               per_param: bool = False):
    """
    Check analytic gradients of a scalar function against central differences.

    Args:
        f: Zero-argument callable building the scalar loss from `params`
        params: Tensors (list or name -> tensor) to differentiate w.r.t.
        h: Finite-difference step
        per_param: Also return the error of each parameter tensor

    Returns:
        Maximum relative error over parameters, or (max_error, {name: error})
        when per_param is set.

    Raises:
        GradCheckError: if two evaluations at the same point differ
        GraphError: if f does not return a scalar
    """
    named = _as_named(params)

    first = f()
    second = f()
    if first.size != 1:
        raise GraphError(f"grad_check needs a scalar function, got shape {first.shape}")
    if not np.array_equal(first.data, second.data):
        raise GradCheckError(
            f"function is not deterministic: {first.item()!r} then {second.item()!r}"
        )

    for p in named.values():
        p.grad = None
    loss = f()
    loss.backward()
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in named.items()
    }

    errors: Dict[str, float] = {}
    for name, p in named.items():
        if not (p.data.flags.c_contiguous and p.data.flags.writeable):
            p.data = np.array(p.data, dtype=np.float64)
        numeric = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        num_flat = numeric.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            plus = f().item()
            flat[idx] = orig - h
            minus = f().item()
            flat[idx] = orig
            num_flat[idx] = (plus - minus) / (2.0 * h)
        errors[name] = relative_error(analytic[name], numeric)
        logger.debug(f"grad_check {name} shape={p.shape} rel_err={errors[name]:.3e}")

    for p in named.values():
        p.grad = None

    worst = max(errors.values()) if errors else 0.0
    if per_param:
        return worst, errors
    return worst
