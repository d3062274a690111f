"""
Unit tests for the network: MMCF fusion, DDS gating, the trunk and the
variational head.
"""

import numpy as np
import pytest

from bmdsnet.errors import ConfigError, DimensionError
from bmdsnet.services import tensor as T
from bmdsnet.services.network import (
    ABLATION_VARIANTS, DDS, MMCF, BMDSNet, Backbone, BayesianConv3d, Conv3d, ConvBlock,
    ablation_config, count_parameters, init_bayes_head, kl_to_prior, mc_predict,
    predictive_moments, sample_weights,
)
from bmdsnet.services.tensor import Tensor

WIDTHS = (2, 4, 4)
# softplus(RHO_UNIT) == 1
RHO_UNIT = float(np.log(np.expm1(1.0)))


def tiny_net(use_mmcf=True, use_dds=True, seed=0, **kwargs):
    return BMDSNet(num_modalities=4, widths=WIDTHS, seed=seed,
                   wiring=ablation_config(use_mmcf, use_dds), **kwargs)


def random_input(seed, size=8, batch=1):
    return Tensor(np.random.default_rng(seed).standard_normal((batch, 4, size, size, size)))


class TestMMCF:
    """Test the input-level fusion block"""

    def test_zero_init_is_identity(self):
        """Test alpha = 0 returns the input bit for bit"""
        mmcf = MMCF(4, np.random.default_rng(0))
        x = random_input(1)
        out = mmcf(x)
        np.testing.assert_array_equal(out.x_fused.data, x.data)

    def test_output_shapes(self):
        """Test attention has one channel per modality, guidance one channel"""
        out = MMCF(4, np.random.default_rng(0), alpha_init=1.0)(random_input(2))
        assert out.m_att.shape == (1, 4, 8, 8, 8)
        assert out.u_map.shape == (1, 1, 8, 8, 8)
        assert np.all((out.m_att.data > 0) & (out.m_att.data < 1))

    def test_nonzero_alpha_recalibrates(self):
        """Test x_fused = x + alpha * x * m_att"""
        out = MMCF(4, np.random.default_rng(0), alpha_init=0.5)(random_input(3))
        x = random_input(3).data
        np.testing.assert_allclose(out.x_fused.data, x + 0.5 * x * out.m_att.data)

    def test_channel_mismatch(self):
        """Test a wrong modality count raises DimensionError"""
        with pytest.raises(DimensionError):
            MMCF(4, np.random.default_rng(0))(Tensor(np.zeros((1, 3, 8, 8, 8))))


class TestDDS:
    """Test the decoder gate"""

    def test_zero_gamma_is_identity(self):
        """Test gamma = 0 leaves decoder features unchanged"""
        dds = DDS([4, 4, 2], np.random.default_rng(0), gamma_init=0.0)
        d = Tensor(np.random.default_rng(1).standard_normal((1, 4, 2, 2, 2)))
        m_att = Tensor(np.random.default_rng(2).random((1, 4, 8, 8, 8)))
        np.testing.assert_array_equal(dds(d, m_att, 1).data, d.data)

    def test_gate_range(self):
        """Test the gate lies in [1, 1 + gamma]"""
        dds = DDS([4, 4, 2], np.random.default_rng(0), gamma_init=0.3)
        m_att = Tensor(np.random.default_rng(2).random((1, 4, 8, 8, 8)))
        gate = dds.gate_map(m_att, (4, 4, 4), 2).data
        assert gate.shape == (1, 2, 4, 4, 4)
        assert np.all(gate >= 1.0) and np.all(gate <= 1.3)

    def test_unknown_stage(self):
        """Test a stage without projection raises DimensionError"""
        dds = DDS([4, 4, 2], np.random.default_rng(0))
        with pytest.raises(DimensionError):
            dds.gate_map(Tensor(np.ones((1, 4, 8, 8, 8))), (2, 2, 2), 3)

    def test_channel_mismatch(self):
        """Test decoder features with the wrong width raise DimensionError"""
        dds = DDS([4, 4, 2], np.random.default_rng(0))
        with pytest.raises(DimensionError):
            dds(Tensor(np.ones((1, 3, 2, 2, 2))), Tensor(np.ones((1, 4, 8, 8, 8))), 0)


class TestBackbone:
    """Test the trunk and the assembled model"""

    def test_output_shapes(self):
        """Test main, auxiliary and decoder stage shapes"""
        out = tiny_net()(random_input(0))
        assert out.logits_main.shape == (1, 3, 8, 8, 8)
        assert [a.shape for a in out.logits_aux] == [(1, 3, 1, 1, 1), (1, 3, 2, 2, 2)]
        assert [d.shape for d in out.d_refined] == [(1, 4, 1, 1, 1), (1, 4, 2, 2, 2), (1, 2, 4, 4, 4)]
        assert out.features.shape == (1, 2, 8, 8, 8)
        assert out.distill_enabled is True

    def test_batch_of_two_matches_singles(self):
        """Test a batch of two equals two batches of one, bit for bit"""
        net = tiny_net(seed=5, alpha_init=0.5)
        x = random_input(12, batch=2)
        both = net(x).logits_main.data
        singles = np.concatenate([net(Tensor(x.data[n:n + 1])).logits_main.data for n in range(2)])
        np.testing.assert_array_equal(both, singles)

    @pytest.mark.parametrize("use_mmcf,use_dds,expected", [
        (False, False, 6687),
        (True, False, 6687 + 2654),
        (False, True, 6687 + 21),
        (True, True, 6687 + 2654 + 21),
    ])
    def test_parameter_counts(self, use_mmcf, use_dds, expected):
        """Test parameter counts of the four wiring variants"""
        assert count_parameters(tiny_net(use_mmcf, use_dds)) == expected

    def test_size_must_divide_by_eight(self):
        """Test an edge length not divisible by 8 raises ConfigError"""
        with pytest.raises(ConfigError):
            Backbone.check_size(12)
        with pytest.raises(ConfigError):
            tiny_net()(random_input(0, size=12))

    def test_trunk_init_independent_of_wiring(self):
        """Test trunk and head weights do not depend on which modules are wired"""
        base = dict(tiny_net(False, False, seed=4).named_parameters())
        full = dict(tiny_net(True, True, seed=4).named_parameters())
        for name, p in base.items():
            np.testing.assert_array_equal(full[name].data, p.data, err_msg=name)

    def test_zero_init_matches_backbone(self):
        """Test alpha = 0 and gamma = 0 reproduce the plain backbone bit for bit"""
        base = tiny_net(False, False, seed=7)
        full = tiny_net(True, True, seed=7, alpha_init=0.0, gamma_init=0.0)
        for k in range(10):
            x = random_input(100 + k)
            np.testing.assert_array_equal(full(x).logits_main.data, base(x).logits_main.data)

    def test_dds_only_uses_neutral_attention(self):
        """Test the DDS-only variant gates with a constant 0.5 map and skips distillation"""
        out = tiny_net(False, True)(random_input(0))
        np.testing.assert_array_equal(out.m_att.data, np.full((1, 4, 8, 8, 8), 0.5))
        assert out.u_map is None
        assert out.distill_enabled is False

    def test_baseline_has_no_maps(self):
        """Test the baseline has neither attention nor learned scalars"""
        net = tiny_net(False, False)
        out = net(random_input(0))
        assert out.m_att is None and out.u_map is None
        assert net.alpha is None and net.gamma is None

    def test_ablation_variants(self):
        """Test the four ablation rows in table order"""
        assert [v.name for v in ABLATION_VARIANTS] == ["Baseline", "MMCF Only", "DDS Only", "BMDS-Net"]
        assert ablation_config(True, False).name == "MMCF Only"

    def test_state_dict_round_trip(self):
        """Test loading a state dict reproduces the outputs"""
        src, dst = tiny_net(seed=1), tiny_net(seed=2)
        dst.load_state_dict(src.state_dict())
        x = random_input(5)
        np.testing.assert_array_equal(dst(x).logits_main.data, src(x).logits_main.data)

    def test_state_dict_shape_mismatch(self):
        """Test a wrongly shaped entry raises DimensionError"""
        net = tiny_net()
        state = net.state_dict()
        state["head.bias"] = np.zeros(4)
        with pytest.raises(DimensionError):
            net.load_state_dict(state)


class TestReceptiveField:
    """Test a single-voxel perturbation stays inside the analytic receptive field"""

    @staticmethod
    def changed_extent(fn, channels, size=13, seed=0):
        """Largest Chebyshev distance from the perturbed center voxel at which fn's output moved."""
        x = np.random.default_rng(seed).standard_normal((1, channels, size, size, size))
        bumped = x.copy()
        c = size // 2
        bumped[0, :, c, c, c] += 5.0
        diff = np.abs(fn(Tensor(bumped)).data - fn(Tensor(x)).data).max(axis=(0, 1))
        moved = np.argwhere(diff > 0)
        assert len(moved) > 0
        return int(np.abs(moved - c).max())

    def test_stacked_conv_blocks(self):
        """Test two stacked conv blocks only reach the sum of their radii"""
        rng = np.random.default_rng(3)
        first = ConvBlock(4, 3, rng)
        second = ConvBlock(3, 3, rng, depth=1)
        radius = first.receptive_radius + second.receptive_radius
        assert radius == 3
        assert self.changed_extent(lambda x: second(first(x)), channels=4) <= radius

    def test_mmcf_attention_is_local(self):
        """Test the fused input moves only within the two 3^3 encoder layers' reach"""
        mmcf = MMCF(4, np.random.default_rng(0), alpha_init=1.0)
        reach = ConvBlock(4, 8, np.random.default_rng(0)).receptive_radius
        assert self.changed_extent(lambda x: mmcf(x).x_fused, channels=4) <= reach
        assert self.changed_extent(lambda x: mmcf(x).m_att, channels=4) <= reach


class TestBayesianHead:
    """Test the variational head, KL term and Monte-Carlo prediction"""

    def test_init_copies_deterministic_head(self):
        """Test posterior means equal the deterministic weights"""
        head = Conv3d(2, 3, 1, np.random.default_rng(0))
        head.bias.data = np.array([0.1, -0.2, 0.3])
        vp = init_bayes_head(head, -5.0)
        np.testing.assert_array_equal(vp.mu_weight.data, head.weight.data)
        np.testing.assert_array_equal(vp.mu_bias.data, head.bias.data)
        np.testing.assert_array_equal(vp.rho_weight.data, np.full((3, 2, 1, 1, 1), -5.0))

    def test_init_needs_pointwise_head(self):
        """Test a 3^3 head cannot become variational"""
        with pytest.raises(DimensionError):
            init_bayes_head(Conv3d(2, 3, 3, np.random.default_rng(0)))

    def test_converted_net_keeps_mean_prediction(self):
        """Test the posterior-mean Bayesian net equals the Stage-1 net right after conversion"""
        net = tiny_net(seed=3)
        x = random_input(6)
        before = net(x).logits_main.data.copy()
        net.convert_to_bayes(-5.0)
        assert net.is_bayesian
        np.testing.assert_array_equal(net(x).logits_main.data, before)

    def test_stage2_parameters_only_head(self):
        """Test Stage 2 trains mu and rho of the head only"""
        net = tiny_net()
        net.convert_to_bayes(-5.0)
        params = net.stage2_parameters()
        assert len(params) == 4
        trainable = [name for name, p in net.named_parameters() if p.requires_grad]
        assert sorted(trainable) == ["head.mu_bias", "head.mu_weight", "head.rho_bias", "head.rho_weight"]

    def test_kl_zero_at_prior(self):
        """Test KL(N(0,1) || N(0,1)) is zero"""
        vp = BayesianConv3d(3, 2, rho_init=RHO_UNIT)
        assert abs(kl_to_prior(vp).item()) < 1e-12

    def test_kl_matches_monte_carlo(self):
        """Test the closed form against a 10^5-draw estimate on random posteriors"""
        rng = np.random.default_rng(11)
        for _ in range(20):
            vp = BayesianConv3d(1, 1)
            mu_w, mu_b = rng.normal(0.0, 1.0, 2)
            rho_w, rho_b = rng.uniform(-2.0, 1.0, 2)
            vp.mu_weight.data = np.full((1, 1, 1, 1, 1), mu_w)
            vp.mu_bias.data = np.array([mu_b])
            vp.rho_weight.data = np.full((1, 1, 1, 1, 1), rho_w)
            vp.rho_bias.data = np.array([rho_b])

            estimate = 0.0
            for mu, rho in [(mu_w, rho_w), (mu_b, rho_b)]:
                sigma = np.log1p(np.exp(rho))
                w = rng.normal(mu, sigma, 100_000)
                log_q = -0.5 * ((w - mu) / sigma) ** 2 - np.log(sigma)
                log_p = -0.5 * w ** 2
                estimate += float(np.mean(log_q - log_p))

            closed = kl_to_prior(vp).item()
            assert closed == pytest.approx(estimate, rel=0.02, abs=5e-3)

    def test_kl_unit_shift(self):
        """Test mu = 1, sigma = 1 against N(0, 1) costs 0.5 per weight"""
        vp = BayesianConv3d(3, 2, rho_init=RHO_UNIT)
        vp.mu_weight.data = np.ones((2, 3, 1, 1, 1))
        vp.mu_bias.data = np.ones(2)
        assert kl_to_prior(vp).item() == pytest.approx(0.5 * (6 + 2), abs=1e-10)

    def test_sample_weights_at_zero_rho(self):
        """Test rho = 0 draws mu + ln(2) * eps with eps from the given seed"""
        vp = BayesianConv3d(2, 3, rho_init=0.0)
        vp.mu_weight.data = np.random.default_rng(1).standard_normal((3, 2, 1, 1, 1))
        vp.mu_bias.data = np.array([0.5, -1.0, 2.0])
        w, b = sample_weights(vp, 9)
        rng = np.random.default_rng(9)
        eps_w = rng.standard_normal((3, 2, 1, 1, 1))
        eps_b = rng.standard_normal(3)
        np.testing.assert_allclose(w.data, vp.mu_weight.data + np.log(2.0) * eps_w, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(b.data, vp.mu_bias.data + np.log(2.0) * eps_b, rtol=1e-12, atol=1e-15)

    def test_sample_weights_spread_matches_softplus(self):
        """Test the empirical std of 10^6 draws is softplus(rho) within 0.5%"""
        rho = -0.7
        vp = BayesianConv3d(1000, 1000, rho_init=rho)
        w, _ = sample_weights(vp, 21)
        sigma = np.log1p(np.exp(rho))
        assert w.data.size == 1_000_000
        assert np.std(w.data) == pytest.approx(sigma, rel=5e-3)

    def test_sample_weights_reproducible(self):
        """Test the same seed draws the same weights"""
        vp = BayesianConv3d(2, 3, rho_init=-1.0)
        w1, b1 = sample_weights(vp, [4, 2])
        w2, b2 = sample_weights(vp, [4, 2])
        np.testing.assert_array_equal(w1.data, w2.data)
        np.testing.assert_array_equal(b1.data, b2.data)
        w3, _ = sample_weights(vp, [4, 3])
        assert not np.array_equal(w1.data, w3.data)

    def test_sample_gradients_reach_mu_and_rho(self):
        """Test the reparameterised draw is differentiable in mu and rho"""
        vp = BayesianConv3d(2, 3, rho_init=-1.0)
        w, b = sample_weights(vp, 0)
        (T.sum(w * w) + T.sum(b)).backward()
        assert vp.mu_weight.grad is not None and vp.rho_weight.grad is not None
        assert vp.mu_bias.grad is not None and vp.rho_bias.grad is not None

    def test_collapsed_posterior_has_no_variance(self):
        """Test rho = -40 gives (numerically) zero predictive variance"""
        net = tiny_net(seed=2)
        x = random_input(8)
        deterministic = 1.0 / (1.0 + np.exp(-net(x).logits_main.data))
        net.convert_to_bayes(-40.0)
        pred = mc_predict(net, x, 5, seed=1)
        assert pred.samples_used == 5
        assert np.all(pred.variance <= 1e-12)
        np.testing.assert_allclose(pred.mean_prob, deterministic, atol=1e-9)

    def test_mc_predict_needs_samples(self):
        """Test T = 0 raises DimensionError"""
        net = tiny_net()
        net.convert_to_bayes(-5.0)
        with pytest.raises(DimensionError):
            mc_predict(net, random_input(0), 0, seed=0)

    def test_mc_predict_reproducible(self):
        """Test the same seed gives identical moments"""
        net = tiny_net()
        net.convert_to_bayes(-1.0)
        x = random_input(9)
        a = mc_predict(net, x, 3, seed=7)
        b = mc_predict(net, x, 3, seed=7)
        np.testing.assert_array_equal(a.mean_prob, b.mean_prob)
        np.testing.assert_array_equal(a.variance, b.variance)
        assert np.any(a.variance > 0)

    def test_predictive_moments_hand_case(self):
        """Test {0.2, 0.5, 0.8} gives mean 0.5 and population variance 0.06"""
        mean, var = predictive_moments([np.array([0.2]), np.array([0.5]), np.array([0.8])])
        assert mean[0] == pytest.approx(0.5, abs=1e-12)
        assert var[0] == pytest.approx(0.06, abs=1e-12)
