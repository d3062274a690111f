"""
Gradient Check Suite

Finite-difference checks for every differentiable op and for the composite
losses. Array-valued ops are reduced to a scalar by a fixed random projection
sum(op(x) * W). ReLU inputs are drawn away from the kink.

Composite cases differentiate w.r.t. parameters downstream of the last ReLU
(alpha, gamma, attention and segmentation heads), where the loss is smooth.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple
import logging
import time

import numpy as np

from bmdsnet.services import tensor as T
from bmdsnet.services.losses import dice_ce, distill_loss, total_loss_stage1
from bmdsnet.services.network import (
    BMDSNet, BayesianConv3d, Conv3d, MMCF, kl_to_prior, sample_weights,
)
from bmdsnet.services.tensor import Tensor, grad_check, parameter

logger = logging.getLogger(__name__)

TOLERANCE = 1e-5
STEP = 1e-5

Built = Tuple[Callable[[], Tensor], Dict[str, Tensor]]


@dataclass
class GradCase:
    name: str
    build: Callable[[np.random.Generator], Built]


@dataclass
class GradCheckResult:
    name: str
    max_error: float
    per_param: Dict[str, float] = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.max_error < TOLERANCE


def _projected(fn: Callable[[], Tensor], seed: int = 1234) -> Callable[[], Tensor]:
    """Scalar sum(fn() * W) with W fixed on first use."""
    cache: Dict[str, np.ndarray] = {}

    def f() -> Tensor:
        out = fn()
        if "w" not in cache:
            cache["w"] = np.random.default_rng(seed).standard_normal(out.shape)
        return T.sum(out * T.constant(cache["w"]))
    return f


def _away_from_zero(rng: np.random.Generator, shape, low: float = 0.1) -> np.ndarray:
    return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(low, 1.0, size=shape)


def _binary(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.random(shape) < 0.4).astype(np.float64)


def _unary(op: Callable[[Tensor], Tensor], sample=None) -> Callable[[np.random.Generator], Built]:
    def build(rng: np.random.Generator) -> Built:
        data = sample(rng) if sample else rng.standard_normal((2, 3, 2))
        x = parameter(data)
        return _projected(lambda: op(x)), {"x": x}
    return build


def _binary_op(op: Callable[[Tensor, Tensor], Tensor], positive_b: bool = False) -> Callable[[np.random.Generator], Built]:
    def build(rng: np.random.Generator) -> Built:
        a = parameter(rng.standard_normal((2, 3)))
        b_data = rng.uniform(0.5, 1.5, (2, 3)) if positive_b else rng.standard_normal((2, 3))
        b = parameter(b_data)
        return _projected(lambda: op(a, b)), {"a": a, "b": b}
    return build


# === OP CASES ===

def _concat(rng):
    a = parameter(rng.standard_normal((1, 2, 2, 2, 2)))
    b = parameter(rng.standard_normal((1, 3, 2, 2, 2)))
    return _projected(lambda: T.concat([a, b], axis=1)), {"a": a, "b": b}


def _broadcast(rng):
    x = parameter(rng.standard_normal((1, 1, 2, 2, 2)))
    return _projected(lambda: T.broadcast_channels(x, 3)), {"x": x}


def _conv(stride: int):
    def build(rng):
        x = parameter(rng.standard_normal((1, 2, 4, 4, 4)))
        w = parameter(rng.standard_normal((3, 2, 3, 3, 3)) * 0.3)
        b = parameter(rng.standard_normal(3))
        return _projected(lambda: T.conv3d(x, w, b, stride=stride, padding=1)), {"x": x, "w": w, "b": b}
    return build


def _interp(mode: str):
    def build(rng):
        x = parameter(rng.standard_normal((1, 2, 2, 3, 2)))
        return _projected(lambda: T.interp3d(x, (4, 4, 3), mode=mode)), {"x": x}
    return build


def _dice_ce(rng):
    logits = parameter(rng.standard_normal((1, 3, 4, 4, 4)))
    target = _binary(rng, (1, 3, 4, 4, 4))
    return (lambda: dice_ce(logits, target)), {"logits": logits}


def _distill(rng):
    d0 = parameter(rng.standard_normal((1, 2, 2, 2, 2)))
    d1 = parameter(rng.standard_normal((1, 2, 4, 4, 4)))
    m_att = parameter(rng.uniform(0.05, 0.95, (1, 4, 4, 4, 4)))
    return (lambda: distill_loss([d0, d1], m_att)), {"d0": d0, "d1": d1, "m_att": m_att}


def _kl(rng):
    head = BayesianConv3d(4, 3, rho_init=-2.0)
    head.mu_weight.data = rng.standard_normal(head.mu_weight.shape) * 0.5
    head.rho_weight.data = rng.uniform(-3.0, 0.5, head.rho_weight.shape)
    head.mu_bias.data = rng.standard_normal(3) * 0.5
    return (lambda: kl_to_prior(head)), dict(head.named_parameters())


def _elbo(rng):
    head = BayesianConv3d(4, 3, rho_init=-3.0)
    head.mu_weight.data = rng.standard_normal(head.mu_weight.shape) * 0.5
    features = T.constant(rng.standard_normal((1, 4, 4, 4, 4)))
    target = _binary(rng, (1, 3, 4, 4, 4))

    def f():
        # frozen eps: the same draw on every call
        logits = head(features, sample_weights(head, 7))
        return dice_ce(logits, target) + kl_to_prior(head) * 1e-2
    return f, dict(head.named_parameters())


def _mmcf_dice(rng):
    mmcf = MMCF(4, np.random.default_rng(11), alpha_init=0.7)
    head = Conv3d(4, 3, 1, np.random.default_rng(12))
    x = T.constant(rng.standard_normal((1, 4, 4, 4, 4)))
    target = _binary(rng, (1, 3, 4, 4, 4))

    def f():
        return dice_ce(head(mmcf(x).x_fused), target)
    params = {name: p for name, p in mmcf.named_parameters()
              if name == "alpha" or name.startswith("att_head.")}
    params.update({f"head.{name}": p for name, p in head.named_parameters()})
    return f, params


def _total_loss(rng):
    net = BMDSNet(num_modalities=4, widths=(2, 4, 4), seed=3, alpha_init=0.5, gamma_init=0.3)
    x = T.constant(rng.standard_normal((1, 4, 8, 8, 8)))
    target = _binary(rng, (1, 3, 8, 8, 8))

    def f():
        return total_loss_stage1(net(x), target)
    wanted = ("mmcf.alpha", "dds.gamma", "head.weight", "head.bias")
    return f, {name: p for name, p in net.named_parameters() if name in wanted}


CASES: List[GradCase] = [
    GradCase("add", _binary_op(T.add)),
    GradCase("sub", _binary_op(T.sub)),
    GradCase("mul", _binary_op(T.mul)),
    GradCase("div", _binary_op(T.div, positive_b=True)),
    GradCase("scalar_mul", _unary(lambda x: T.scalar_mul(x, -1.7))),
    GradCase("sigmoid", _unary(T.sigmoid)),
    GradCase("relu", _unary(T.relu, lambda rng: _away_from_zero(rng, (2, 3, 2)))),
    GradCase("softplus", _unary(T.softplus)),
    GradCase("exp", _unary(T.exp)),
    GradCase("log", _unary(T.log, lambda rng: rng.uniform(0.2, 2.0, (2, 3, 2)))),
    GradCase("square", _unary(T.square)),
    GradCase("concat", _concat),
    GradCase("reshape", _unary(lambda x: T.reshape(x, (3, 4)))),
    GradCase("broadcast_channels", _broadcast),
    GradCase("sum", _unary(lambda x: T.sum(x, axes=(0, 2), keepdims=True))),
    GradCase("mean", _unary(lambda x: T.mean(x, axes=1))),
    GradCase("var", _unary(lambda x: T.var(x, axes=(1, 2)))),
    GradCase("channel_l2_norm", _unary(T.channel_l2_norm, lambda rng: rng.standard_normal((1, 3, 2, 2, 2)))),
    GradCase("channel_softmax", _unary(T.channel_softmax, lambda rng: rng.standard_normal((1, 3, 2, 2, 2)))),
    GradCase("spatial_minmax_norm", _unary(T.spatial_minmax_norm, lambda rng: rng.standard_normal((2, 2, 2, 2, 2)))),
    GradCase("conv3d", _conv(1)),
    GradCase("conv3d_stride2", _conv(2)),
    GradCase("interp3d_trilinear", _interp("trilinear")),
    GradCase("interp3d_nearest", _interp("nearest")),
    GradCase("dice_ce", _dice_ce),
    GradCase("distill_loss", _distill),
    GradCase("kl_to_prior", _kl),
    GradCase("elbo_frozen_eps", _elbo),
    GradCase("mmcf_dice_ce", _mmcf_dice),
    GradCase("total_loss_stage1", _total_loss),
]


def run_suite(seed: int = 0, names: Optional[List[str]] = None, h: float = STEP) -> List[GradCheckResult]:
    """Run every case (or the named ones); case k draws from stream (seed, k)."""
    results = []
    for k, case in enumerate(CASES):
        if names is not None and case.name not in names:
            continue
        start = time.perf_counter()
        f, params = case.build(np.random.default_rng([seed, k]))
        worst, per_param = grad_check(f, params, h=h, per_param=True)
        result = GradCheckResult(case.name, worst, per_param, time.perf_counter() - start)
        level = logging.INFO if result.passed else logging.WARNING
        logger.log(level, f"gradcheck {case.name}: max relative error {worst:.3e}")
        results.append(result)
    return results
