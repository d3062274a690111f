"""
AdamW Optimizer

Adam with decoupled weight decay, plus the cosine learning-rate decay used by
both training stages.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple
import math

import numpy as np

from bmdsnet.errors import DimensionError
from .tensor import Tensor


@dataclass
class AdamWState:
    """Moment buffers and hyperparameters; m/v are keyed by parameter index."""
    lr: float = 1e-3
    weight_decay: float = 1e-4
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    step: int = 0
    m: Dict[int, np.ndarray] = field(default_factory=dict)
    v: Dict[int, np.ndarray] = field(default_factory=dict)


def adamw_step(params: Sequence[Tensor], grads: Sequence[Optional[np.ndarray]],
               state: AdamWState) -> None:
    """
    Apply one AdamW update in place.

    Decay is applied to the weights (p *= 1 - lr * wd), never folded into the
    gradient. Parameters whose grad is None keep their value and moments.

    Args:
        params: Parameter tensors, updated in place
        grads: One gradient (or None) per parameter
        state: Optimizer state; `step` advances by one
    """
    if len(params) != len(grads):
        raise DimensionError(f"adamw_step: {len(params)} params but {len(grads)} grads")

    state.step += 1
    b1, b2 = state.betas
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step

    for idx, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            continue
        if g.shape != p.data.shape:
            raise DimensionError(f"adamw_step: grad shape {g.shape} != param shape {p.data.shape}")
        m = state.m.get(idx)
        v = state.v.get(idx)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.m[idx], state.v[idx] = m, v

        p.data = p.data * (1.0 - state.lr * state.weight_decay)
        p.data = p.data - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


class AdamW:
    """Optimizer over a fixed, ordered parameter list."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, weight_decay: float = 1e-4,
                 betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params: List[Tensor] = list(params)
        self.state = AdamWState(lr=lr, weight_decay=weight_decay, betas=betas, eps=eps)

    @property
    def lr(self) -> float:
        return self.state.lr

    @lr.setter
    def lr(self, value: float) -> None:
        self.state.lr = float(value)

    def step(self) -> None:
        adamw_step(self.params, [p.grad for p in self.params], self.state)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def cosine_lr(epoch: int, total: int, lr0: float, final_ratio: float = 0.01) -> float:
    """Cosine decay from lr0 at epoch 0 to final_ratio * lr0 at the last epoch."""
    if total <= 1:
        return lr0
    lr_min = lr0 * final_ratio
    progress = min(max(epoch, 0), total - 1) / (total - 1)
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + math.cos(math.pi * progress))
