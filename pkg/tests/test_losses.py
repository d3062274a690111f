"""
Unit tests for the Stage-1 objective.
"""

import itertools
import math

import numpy as np
import pytest
from scipy.special import expit

from bmdsnet.errors import DimensionError, DomainError
from bmdsnet.schemas.experiment import LossWeights
from bmdsnet.services.losses import (
    dice_ce, distill_loss, downsample_target, seg_loss, stage1_terms, total_loss_stage1,
)
from bmdsnet.services.network import BMDSNet, ablation_config
from bmdsnet.services.tensor import Tensor


def binary_target(seed, shape=(2, 3, 4, 4, 4)):
    return (np.random.default_rng(seed).random(shape) < 0.4).astype(np.float64)


def numpy_dice_ce(z, y, smooth=1e-5):
    axes = (0, 2, 3, 4)
    p = expit(z)
    dice = (2.0 * (p * y).sum(axis=axes) + smooth) / (p.sum(axis=axes) + y.sum(axis=axes) + smooth)
    ce = np.mean(np.logaddexp(0.0, z) - z * y)
    return 1.0 - dice.mean() + ce


def scalar_distill(d, m_att):
    """One stage voxel by voxel, with m_att at twice d's resolution (trilinear halving is a 2^3 block mean)."""
    n, channels = d.shape[2], d.shape[1]
    total, count = 0.0, 0
    for s in range(d.shape[0]):
        feat, att = {}, {}
        for i, j, l in itertools.product(range(n), repeat=3):
            feat[i, j, l] = math.sqrt(sum(d[s, c, i, j, l] ** 2 for c in range(channels)))
            block = [m_att[s, c, 2 * i + a, 2 * j + b, 2 * l + e]
                     for c in range(m_att.shape[1]) for a, b, e in itertools.product((0, 1), repeat=3)]
            att[i, j, l] = sum(block) / len(block)
        for values in (feat, att):
            lo, hi = min(values.values()), max(values.values())
            for key in values:
                values[key] = (values[key] - lo) / (hi - lo + 1e-6)
        for key in feat:
            total += (feat[key] - att[key]) ** 2
            count += 1
    return total / count


class TestDiceCE:
    """Test the segmentation loss"""

    def test_perfect_prediction(self):
        """Test confident correct logits give a near-zero loss"""
        y = binary_target(0)
        logits = Tensor(np.where(y > 0, 20.0, -20.0))
        assert dice_ce(logits, y).item() < 1e-3

    def test_matches_reference(self):
        """Test against a plain numpy evaluation"""
        y = binary_target(1)
        z = np.random.default_rng(2).standard_normal(y.shape) * 3.0
        assert dice_ce(Tensor(z), y).item() == pytest.approx(numpy_dice_ce(z, y), rel=1e-12)

    def test_large_logits_stay_finite(self):
        """Test CE does not overflow for extreme logits"""
        y = binary_target(3)
        z = np.where(y > 0, -800.0, 800.0)
        assert np.isfinite(dice_ce(Tensor(z), y).item())

    def test_non_binary_target(self):
        """Test a soft target raises DomainError"""
        y = binary_target(0)
        y[0, 0, 0, 0, 0] = 0.5
        with pytest.raises(DomainError):
            dice_ce(Tensor(np.zeros(y.shape)), y)

    def test_shape_mismatch(self):
        """Test mismatched logits and target raise DimensionError"""
        with pytest.raises(DimensionError):
            dice_ce(Tensor(np.zeros((1, 3, 4, 4, 4))), binary_target(0))


class TestDistillation:
    """Test the attention distillation term"""

    def test_empty_stage_list(self):
        """Test no gated stage raises DimensionError"""
        with pytest.raises(DimensionError):
            distill_loss([], Tensor(np.full((1, 4, 4, 4, 4), 0.5)))

    def test_unknown_reduction(self):
        """Test only mean and sum are accepted"""
        d = Tensor(np.ones((1, 2, 2, 2, 2)))
        with pytest.raises(DomainError):
            distill_loss([d], Tensor(np.full((1, 4, 4, 4, 4), 0.5)), reduction="max")

    def test_proportional_maps_give_zero(self):
        """Test a feature norm proportional to the pooled attention costs (numerically) nothing"""
        rng = np.random.default_rng(10)
        m_att = rng.random((2, 4, 4, 4, 4))
        pooled = m_att.mean(axis=1, keepdims=True)
        # unit direction across channels, so ||d|| = 3 * pooled
        d = np.concatenate([0.6 * 3.0 * pooled, 0.8 * 3.0 * pooled], axis=1)
        assert distill_loss([Tensor(d)], Tensor(m_att)).item() < 1e-10

    def test_constant_maps_give_zero(self):
        """Test a constant feature map against a constant attention map gives zero"""
        d = Tensor(np.ones((1, 3, 4, 4, 4)))
        m_att = Tensor(np.full((1, 4, 4, 4, 4), 0.5))
        assert distill_loss([d], m_att).item() == pytest.approx(0.0, abs=1e-20)

    def test_matches_scalar_reference(self):
        """Test a random 4^3 stage against a voxel-by-voxel evaluation"""
        rng = np.random.default_rng(11)
        d = rng.standard_normal((2, 3, 4, 4, 4))
        m_att = rng.random((2, 4, 8, 8, 8))
        value = distill_loss([Tensor(d)], Tensor(m_att)).item()
        assert value == pytest.approx(scalar_distill(d, m_att), abs=1e-12)

    def test_sum_is_mean_times_voxels(self):
        """Test the two reductions differ by the voxel count"""
        rng = np.random.default_rng(5)
        d = Tensor(rng.standard_normal((1, 3, 4, 4, 4)))
        m_att = Tensor(rng.random((1, 4, 8, 8, 8)))
        mean = distill_loss([d], m_att, "mean").item()
        total = distill_loss([d], m_att, "sum").item()
        assert total == pytest.approx(mean * 64, rel=1e-12)
        assert 0.0 <= mean <= 1.0

    def test_stages_add_up(self):
        """Test the loss is the sum of per-stage terms"""
        rng = np.random.default_rng(6)
        d0 = Tensor(rng.standard_normal((1, 2, 2, 2, 2)))
        d1 = Tensor(rng.standard_normal((1, 2, 4, 4, 4)))
        m_att = Tensor(rng.random((1, 4, 8, 8, 8)))
        both = distill_loss([d0, d1], m_att).item()
        assert both == pytest.approx(distill_loss([d0], m_att).item() + distill_loss([d1], m_att).item())


class TestStage1Objective:
    """Test deep supervision and the total Stage-1 loss"""

    def test_downsample_target_is_nearest(self):
        """Test halving picks every second voxel"""
        y = binary_target(7, (1, 3, 8, 8, 8))
        np.testing.assert_array_equal(downsample_target(y, (4, 4, 4)), y[..., ::2, ::2, ::2])

    def test_seg_loss_recomposes(self):
        """Test seg_loss equals main + 0.4 aux_deep + 0.2 aux_shallow computed independently"""
        net = BMDSNet(widths=(2, 4, 4), seed=2, alpha_init=0.5)
        x = np.random.default_rng(3).standard_normal((1, 4, 8, 8, 8))
        y = binary_target(12, (1, 3, 8, 8, 8))
        out = net(x)
        deep, shallow = (a.data for a in out.logits_aux)
        expected = (numpy_dice_ce(out.logits_main.data, y)
                    + 0.4 * numpy_dice_ce(deep, y[..., ::8, ::8, ::8])
                    + 0.2 * numpy_dice_ce(shallow, y[..., ::4, ::4, ::4]))
        assert seg_loss(out, y).item() == pytest.approx(expected, abs=1e-12)

    def test_baseline_total_is_seg_loss(self):
        """Test the baseline adds no distillation term"""
        net = BMDSNet(widths=(2, 4, 4), seed=0, wiring=ablation_config(False, False))
        x = np.random.default_rng(0).standard_normal((1, 4, 8, 8, 8))
        y = binary_target(8, (1, 3, 8, 8, 8))
        out = net(x)
        assert total_loss_stage1(out, y).item() == seg_loss(out, y).item()
        assert stage1_terms(out, y).distill is None

    def test_full_model_breakdown(self):
        """Test the breakdown reports every term and totals consistently"""
        net = BMDSNet(widths=(2, 4, 4), seed=0, alpha_init=0.5)
        x = np.random.default_rng(1).standard_normal((1, 4, 8, 8, 8))
        y = binary_target(9, (1, 3, 8, 8, 8))
        w = LossWeights()
        terms = stage1_terms(net(x), y, w)
        parts = terms.breakdown()
        assert set(parts) == {"total", "seg", "main", "aux_deep", "aux_shallow", "distill"}
        assert parts["seg"] == pytest.approx(parts["main"] + w.lambda1 * parts["aux_deep"] + w.lambda2 * parts["aux_shallow"])
        assert parts["total"] == pytest.approx(parts["seg"] + w.distill_weight * parts["distill"])

    def test_zero_distill_weight_skips_term(self):
        """Test distill_weight = 0 drops the term even on the full model"""
        net = BMDSNet(widths=(2, 4, 4), seed=0)
        x = np.random.default_rng(1).standard_normal((1, 4, 8, 8, 8))
        terms = stage1_terms(net(x), binary_target(9, (1, 3, 8, 8, 8)), LossWeights(distill_weight=0.0))
        assert terms.distill is None
        assert "distill" not in terms.breakdown()
