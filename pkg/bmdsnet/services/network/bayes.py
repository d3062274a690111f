"""
Variational Output Layer

Last-layer Bayesian head: a 1^3 convolution whose weights carry a factorized
Gaussian posterior q(w) = N(mu, softplus(rho)^2) against a N(0, 1) prior.
Weights are drawn with the reparameterization w = mu + softplus(rho) * eps,
eps held constant per draw, so gradients flow to (mu, rho) pathwise.
"""

from dataclasses import dataclass
from typing import List, NamedTuple, Sequence, Tuple
import logging
import math

import numpy as np
from scipy.special import expit

from bmdsnet.errors import DimensionError
from bmdsnet.services import tensor as T
from bmdsnet.services.losses import dice_ce
from bmdsnet.services.tensor import Tensor, parameter
from .module import Conv3d, Module

logger = logging.getLogger(__name__)

DEFAULT_RHO_INIT = -5.0


def softplus_np(x: np.ndarray) -> np.ndarray:
    return np.where(x > 30.0, x, np.log1p(np.exp(np.minimum(x, 30.0))))


class BayesianConv3d(Module):
    """
    1^3 variational convolution.

    Attributes:
        mu_weight, rho_weight: [C_out, C_in, 1, 1, 1]
        mu_bias, rho_bias: [C_out]
        prior_mu, prior_sigma: Gaussian prior parameters (0, 1)
    """

    def __init__(self, in_channels: int, out_channels: int, rho_init: float = DEFAULT_RHO_INIT,
                 prior_mu: float = 0.0, prior_sigma: float = 1.0):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.prior_mu = prior_mu
        self.prior_sigma = prior_sigma
        self.mu_weight = parameter(np.zeros((out_channels, in_channels, 1, 1, 1)))
        self.rho_weight = parameter(np.full((out_channels, in_channels, 1, 1, 1), rho_init))
        self.mu_bias = parameter(np.zeros(out_channels))
        self.rho_bias = parameter(np.full(out_channels, rho_init))

    def posterior_pairs(self) -> List[Tuple[Tensor, Tensor]]:
        return [(self.mu_weight, self.rho_weight), (self.mu_bias, self.rho_bias)]

    def __call__(self, features: Tensor, weights: Sequence[Tensor] = None) -> Tensor:
        """Apply the head with sampled weights, or with the posterior mean when none given."""
        w, b = weights if weights is not None else (self.mu_weight, self.mu_bias)
        return T.conv3d(features, w, b)


def sample_weights(vp: BayesianConv3d, seed) -> Tuple[Tensor, Tensor]:
    """
    Draw (weight, bias) = mu + softplus(rho) * eps.

    Args:
        vp: Variational head
        seed: Anything `numpy.random.default_rng` accepts; the same seed
            always yields the same eps

    Returns:
        Sampled weight and bias, differentiable in mu and rho
    """
    rng = np.random.default_rng(seed)
    drawn = []
    for mu, rho in vp.posterior_pairs():
        eps = rng.standard_normal(mu.shape)
        drawn.append(mu + T.softplus(rho) * T.constant(eps))
    return drawn[0], drawn[1]


def kl_to_prior(vp: BayesianConv3d) -> Tensor:
    """
    Closed-form KL(q || p) summed over all weights:
    log(sp/sq) + (sq^2 + (mq - mp)^2) / (2 sp^2) - 1/2.
    """
    total = None
    sp = vp.prior_sigma
    for mu, rho in vp.posterior_pairs():
        sigma = T.softplus(rho)
        shift = mu - vp.prior_mu if vp.prior_mu else mu
        per_weight = (math.log(sp) - T.log(sigma)
                      + (T.square(sigma) + T.square(shift)) * (1.0 / (2.0 * sp * sp))
                      - 0.5)
        term = T.sum(per_weight)
        total = term if total is None else total + term
    return total


def init_bayes_head(head: Conv3d, sigma_init_rho: float = DEFAULT_RHO_INIT) -> BayesianConv3d:
    """
    Build a variational head whose means copy the deterministic head exactly.

    Raises:
        DimensionError: if the deterministic head is not a 1^3 convolution
    """
    if head.weight.shape[2:] != (1, 1, 1):
        raise DimensionError(f"Bayesian head needs a 1^3 kernel, got weight shape {head.weight.shape}")
    vp = BayesianConv3d(head.in_channels, head.out_channels, rho_init=sigma_init_rho)
    if vp.mu_weight.shape != head.weight.shape or vp.mu_bias.shape != head.bias.shape:
        raise DimensionError(
            f"head shape mismatch: {head.weight.shape}/{head.bias.shape} vs "
            f"{vp.mu_weight.shape}/{vp.mu_bias.shape}"
        )
    vp.mu_weight.data = head.weight.data.copy()
    vp.mu_bias.data = head.bias.data.copy()
    logger.info(
        f"Bayesian head initialised from deterministic weights "
        f"(rho={sigma_init_rho}, sigma={float(softplus_np(np.float64(sigma_init_rho))):.6g})"
    )
    return vp


class ElboTerms(NamedTuple):
    loss: Tensor
    seg: Tensor
    kl: Tensor


def elbo_terms(net, x: Tensor, y: np.ndarray, seed, kl_beta: float) -> ElboTerms:
    """One-sample ELBO: dice_ce with one weight draw + kl_beta * KL."""
    head = net.head
    features = net.trunk(x).features
    weights = sample_weights(head, seed)
    seg = dice_ce(head(features, weights), y)
    kl = kl_to_prior(head)
    return ElboTerms(seg + kl * kl_beta, seg, kl)


def elbo_loss(net, x: Tensor, y: np.ndarray, seed, kl_beta: float) -> Tensor:
    return elbo_terms(net, x, y, seed, kl_beta).loss


@dataclass
class PredictiveOutput:
    """Monte-Carlo predictive moments, [B, 3, S, S, S] each."""
    mean_prob: np.ndarray
    variance: np.ndarray
    samples_used: int


def predictive_moments(probs: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and population variance (divisor T) over the sample axis."""
    stacked = np.stack(list(probs))
    mean = stacked.mean(axis=0)
    variance = ((stacked - mean) ** 2).mean(axis=0)
    return mean, variance


def mc_predict(net, x: Tensor, T_samples: int, seed) -> PredictiveOutput:
    """
    T stochastic passes through the Bayesian head on a shared trunk pass.

    Draw t uses the RNG stream (seed, t).

    Raises:
        DimensionError: if T_samples < 1
    """
    if T_samples < 1:
        raise DimensionError(f"mc_predict needs T >= 1, got {T_samples}")
    features = net.trunk(x.detach()).features.detach()
    head = net.head
    probs = []
    for t in range(T_samples):
        w, b = sample_weights(head, [int(seed), t])
        probs.append(expit(T.conv3d(features, w.detach(), b.detach()).data))
    mean, variance = predictive_moments(probs)
    return PredictiveOutput(mean_prob=mean, variance=variance, samples_used=T_samples)
