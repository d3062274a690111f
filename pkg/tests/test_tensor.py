"""
Unit tests for the tensor core.

Forward values of every op against NumPy, backward plumbing, error paths,
the optimizer and the learning-rate schedule.
"""

import numpy as np
import pytest

from bmdsnet.errors import DimensionError, DomainError, GradCheckError, GraphError
from bmdsnet.services import tensor as T
from bmdsnet.services.tensor import (
    AdamW, Tensor, adamw_step, AdamWState, as_tensor, conv_output_size, cosine_lr,
    grad_check, parameter, relative_error, sampling_matrix,
)


def naive_conv3d(x, w, b, stride, padding):
    """Direct six-loop cross-correlation"""
    xp = np.pad(x, ((0, 0), (0, 0)) + ((padding, padding),) * 3)
    k = w.shape[2]
    out_dims = [conv_output_size(s, k, stride, padding) for s in x.shape[2:]]
    out = np.zeros((x.shape[0], w.shape[0], *out_dims))
    for n in range(x.shape[0]):
        for o in range(w.shape[0]):
            for i in range(out_dims[0]):
                for j in range(out_dims[1]):
                    for l in range(out_dims[2]):
                        patch = xp[n, :, i * stride:i * stride + k, j * stride:j * stride + k,
                                   l * stride:l * stride + k]
                        out[n, o, i, j, l] = np.sum(patch * w[o]) + b[o]
    return out


class TestTensorBasics:
    """Test tensor wrapping, graph construction and backward"""

    def test_data_is_float64(self):
        """Test integer input is stored as float64"""
        t = Tensor([1, 2, 3])
        assert t.data.dtype == np.float64
        assert t.shape == (3,)
        assert t.requires_grad is False

    def test_constant_op_has_no_node(self):
        """Test ops on constants do not build a graph"""
        out = as_tensor(np.ones(3)) + 1.0
        assert out.node is None
        assert out.requires_grad is False

    def test_shared_input_accumulates(self):
        """Test a tensor used twice receives both gradient contributions"""
        x = parameter([1.0, -2.0, 3.0])
        T.sum(x * x).backward()
        np.testing.assert_allclose(x.grad, 2.0 * x.data)

    def test_diamond_graph(self):
        """Test gradient through two branches that rejoin"""
        x = parameter([0.5, 1.5])
        a = T.exp(x)
        b = T.square(x)
        T.sum(a + b).backward()
        np.testing.assert_allclose(x.grad, np.exp(x.data) + 2.0 * x.data)

    def test_repeated_backward_accumulates(self):
        """Test calling backward twice adds the gradients"""
        x = parameter([2.0])
        loss = T.sum(x * 3.0)
        loss.backward()
        loss.backward()
        assert x.grad[0] == pytest.approx(6.0)

    def test_backward_needs_scalar(self):
        """Test backward on a non-scalar raises GraphError"""
        x = parameter(np.ones((2, 2)))
        with pytest.raises(GraphError):
            (x * 2.0).backward()

    def test_backward_needs_grad_path(self):
        """Test backward on a constant loss raises GraphError"""
        with pytest.raises(GraphError):
            T.sum(as_tensor(np.ones(3))).backward()

    def test_scalar_broadcast_gradient(self):
        """Test a scalar operand gets the summed gradient"""
        s = parameter(2.0)
        x = parameter(np.arange(4.0))
        T.sum(s * x).backward()
        assert float(s.grad) == pytest.approx(6.0)
        np.testing.assert_allclose(x.grad, np.full(4, 2.0))

    def test_detach_cuts_graph(self):
        """Test detached tensors do not receive gradients"""
        x = parameter([1.0, 2.0])
        loss = T.sum(x * x.detach())
        loss.backward()
        np.testing.assert_allclose(x.grad, x.data)


class TestElementwise:
    """Test elementwise ops and their error paths"""

    def test_shape_mismatch(self):
        """Test binary ops reject non-scalar shape mismatches"""
        with pytest.raises(DimensionError):
            T.add(Tensor(np.ones((2, 3))), Tensor(np.ones(3)))

    def test_div_by_zero(self):
        """Test division by an exact zero raises DomainError"""
        with pytest.raises(DomainError):
            T.div(Tensor([1.0, 2.0]), Tensor([1.0, 0.0]))

    def test_log_nonpositive(self):
        """Test log of a non-positive value raises DomainError"""
        with pytest.raises(DomainError):
            T.log(Tensor([1.0, 0.0]))

    def test_softplus_is_stable(self):
        """Test softplus is linear for large inputs and finite for very negative ones"""
        out = T.softplus(Tensor([100.0, 0.0, -800.0])).data
        assert out[0] == 100.0
        assert out[1] == pytest.approx(np.log(2.0))
        assert out[2] == 0.0

    def test_sigmoid_matches_formula(self):
        """Test sigmoid against 1 / (1 + e^-x)"""
        x = np.linspace(-5, 5, 11)
        np.testing.assert_allclose(T.sigmoid(Tensor(x)).data, 1.0 / (1.0 + np.exp(-x)))

    def test_relu_gradient_mask(self):
        """Test relu passes gradient only where the input is positive"""
        x = parameter([-1.0, 0.0, 2.0])
        T.sum(T.relu(x)).backward()
        np.testing.assert_array_equal(x.grad, [0.0, 0.0, 1.0])


class TestShapeOps:
    """Test concat, reshape and channel broadcast"""

    def test_concat_gradient_split(self):
        """Test concat routes each gradient slice back to its input"""
        a = parameter(np.ones((1, 2, 2)))
        b = parameter(np.ones((1, 3, 2)))
        weights = np.arange(10.0).reshape(1, 5, 2)
        T.sum(T.concat([a, b], axis=1) * T.constant(weights)).backward()
        np.testing.assert_array_equal(a.grad, weights[:, :2])
        np.testing.assert_array_equal(b.grad, weights[:, 2:])

    def test_concat_off_axis_mismatch(self):
        """Test concat rejects shapes that differ off the concat axis"""
        with pytest.raises(DimensionError):
            T.concat([Tensor(np.ones((1, 2, 2))), Tensor(np.ones((1, 2, 3)))], axis=1)

    def test_reshape_bad_size(self):
        """Test reshape to an incompatible size raises DimensionError"""
        with pytest.raises(DimensionError):
            T.reshape(Tensor(np.ones(6)), (4, 2))

    def test_broadcast_channels(self):
        """Test one channel repeats to C channels and gradients sum back"""
        x = parameter(np.ones((1, 1, 2, 2, 2)))
        out = T.broadcast_channels(x, 3)
        assert out.shape == (1, 3, 2, 2, 2)
        T.sum(out).backward()
        np.testing.assert_array_equal(x.grad, np.full((1, 1, 2, 2, 2), 3.0))


class TestReductions:
    """Test reductions and channel normalisations"""

    def test_var_is_population(self):
        """Test var divides by n"""
        x = np.array([[1.0, 2.0, 3.0, 4.0]])
        assert T.var(Tensor(x), axes=1).data[0] == pytest.approx(1.25)

    def test_reduction_axes_validated(self):
        """Test empty, repeated and out-of-range axes raise DimensionError"""
        x = Tensor(np.ones((2, 3)))
        for axes in [(), (0, 0), 2]:
            with pytest.raises(DimensionError):
                T.sum(x, axes=axes)

    def test_keepdims(self):
        """Test keepdims keeps reduced axes with extent 1"""
        x = Tensor(np.ones((2, 3, 4)))
        assert T.mean(x, axes=(0, 2), keepdims=True).shape == (1, 3, 1)
        assert T.mean(x, axes=(0, 2)).shape == (3,)

    def test_channel_softmax_sums_to_one(self):
        """Test softmax over channels sums to 1 at every voxel"""
        x = np.random.default_rng(0).standard_normal((2, 4, 3, 3, 3)) * 10
        out = T.channel_softmax(Tensor(x)).data
        np.testing.assert_allclose(out.sum(axis=1), 1.0)

    def test_channel_l2_norm_zero_gradient(self):
        """Test the L2 norm has zero gradient where the norm is zero"""
        x = parameter(np.zeros((1, 2, 1, 1, 2)))
        x.data[0, :, 0, 0, 1] = [3.0, 4.0]
        out = T.channel_l2_norm(x)
        assert out.data[0, 0, 0, 0, 1] == pytest.approx(5.0)
        T.sum(out).backward()
        np.testing.assert_array_equal(x.grad[0, :, 0, 0, 0], [0.0, 0.0])
        np.testing.assert_allclose(x.grad[0, :, 0, 0, 1], [0.6, 0.8])

    def test_spatial_minmax_range(self):
        """Test min-max normalisation maps each map into [0, 1)"""
        x = np.random.default_rng(1).standard_normal((2, 3, 4, 4, 4))
        out = T.spatial_minmax_norm(Tensor(x)).data
        flat = out.reshape(2, 3, -1)
        np.testing.assert_allclose(flat.min(axis=2), 0.0)
        assert np.all(flat.max(axis=2) < 1.0)
        assert np.all(flat.max(axis=2) > 0.999)


class TestConv3d:
    """Test 3D convolution against a direct loop"""

    @pytest.mark.parametrize("stride,padding", [(1, 1), (1, 0), (2, 1)])
    def test_matches_naive(self, stride, padding):
        """Test conv3d equals the direct cross-correlation"""
        rng = np.random.default_rng(stride * 10 + padding)
        x = rng.standard_normal((2, 2, 5, 4, 5))
        w = rng.standard_normal((3, 2, 3, 3, 3))
        b = rng.standard_normal(3)
        out = T.conv3d(Tensor(x), Tensor(w), Tensor(b), stride=stride, padding=padding).data
        np.testing.assert_allclose(out, naive_conv3d(x, w, b, stride, padding), atol=1e-12)

    @pytest.mark.parametrize("stride", [1, 2])
    def test_backward_is_adjoint(self, stride):
        """Test input and weight gradients satisfy <conv(dx, w), g> = <gx, dx> and likewise for w"""
        rng = np.random.default_rng(40 + stride)
        x = parameter(rng.standard_normal((2, 2, 5, 6, 5)))
        w = parameter(rng.standard_normal((3, 2, 3, 3, 3)))
        out = T.conv3d(x, w, stride=stride, padding=1)
        g = rng.standard_normal(out.shape)
        T.sum(out * g).backward()

        zero = np.zeros(3)
        dx = rng.standard_normal(x.shape)
        dw = rng.standard_normal(w.shape)
        expected_x = np.sum(naive_conv3d(dx, w.data, zero, stride, 1) * g)
        expected_w = np.sum(naive_conv3d(x.data, dw, zero, stride, 1) * g)
        assert np.sum(x.grad * dx) == pytest.approx(expected_x, rel=1e-10)
        assert np.sum(w.grad * dw) == pytest.approx(expected_w, rel=1e-10)

    def test_batch_items_independent(self):
        """Test a batch of two equals each item convolved alone, bit for bit"""
        rng = np.random.default_rng(7)
        x = rng.standard_normal((2, 3, 6, 6, 6))
        w = Tensor(rng.standard_normal((4, 3, 3, 3, 3)))
        b = Tensor(rng.standard_normal(4))
        both = T.conv3d(Tensor(x), w, b, padding=1).data
        for n in range(2):
            single = T.conv3d(Tensor(x[n:n + 1]), w, b, padding=1).data
            np.testing.assert_array_equal(both[n:n + 1], single)

    def test_output_size_floor(self):
        """Test stride-2 output sizes use floor division"""
        assert conv_output_size(8, 3, 2, 1) == 4
        assert conv_output_size(5, 3, 2, 1) == 3
        assert conv_output_size(1, 3, 2, 1) == 1

    def test_even_kernel_rejected(self):
        """Test an even kernel raises DimensionError"""
        with pytest.raises(DimensionError):
            T.conv3d(Tensor(np.ones((1, 1, 4, 4, 4))), Tensor(np.ones((1, 1, 2, 2, 2))))

    def test_channel_mismatch(self):
        """Test input and weight channel mismatch raises DimensionError"""
        with pytest.raises(DimensionError):
            T.conv3d(Tensor(np.ones((1, 2, 4, 4, 4))), Tensor(np.ones((1, 3, 3, 3, 3))), padding=1)

    def test_empty_output(self):
        """Test an output extent below 1 raises DimensionError"""
        with pytest.raises(DimensionError):
            T.conv3d(Tensor(np.ones((1, 1, 2, 2, 2))), Tensor(np.ones((1, 1, 3, 3, 3))))


class TestInterp3d:
    """Test trilinear and nearest resampling"""

    def test_nearest_upsample_repeats(self):
        """Test nearest 2x upsampling repeats every voxel"""
        x = np.arange(8.0).reshape(1, 1, 2, 2, 2)
        out = T.interp3d(Tensor(x), (4, 4, 4), mode="nearest").data
        expected = x.repeat(2, axis=2).repeat(2, axis=3).repeat(2, axis=4)
        np.testing.assert_array_equal(out, expected)

    def test_same_size_is_identity(self):
        """Test resampling to the same size is exact for both modes"""
        x = np.random.default_rng(2).standard_normal((1, 2, 3, 4, 2))
        for mode in ("nearest", "trilinear"):
            np.testing.assert_array_equal(T.interp3d(Tensor(x), (3, 4, 2), mode=mode).data, x)

    def test_trilinear_rows_sum_to_one(self):
        """Test every trilinear sampling row is a convex combination"""
        mat = sampling_matrix(3, 7, "trilinear")
        np.testing.assert_allclose(mat.sum(axis=1), 1.0)
        assert np.all(mat >= 0.0)

    def test_trilinear_preserves_constant(self):
        """Test a constant field stays constant under trilinear resampling"""
        out = T.interp3d(Tensor(np.full((1, 1, 2, 2, 2), 4.5)), (5, 3, 4)).data
        np.testing.assert_allclose(out, 4.5)

    def test_trilinear_ramp_downsample(self):
        """Test 4^3 -> 2^3 on f = x samples the ramp at 0.5 and 2.5"""
        ramp = np.broadcast_to(np.arange(4.0)[:, None, None], (4, 4, 4)).reshape(1, 1, 4, 4, 4)
        out = T.interp3d(Tensor(ramp), (2, 2, 2)).data
        np.testing.assert_allclose(out[0, 0, :, 0, 0], [0.5, 2.5], atol=1e-12)
        np.testing.assert_allclose(out[0, 0], np.broadcast_to(np.array([0.5, 2.5])[:, None, None], (2, 2, 2)),
                                   atol=1e-12)

    def test_bad_mode(self):
        """Test an unknown mode raises DimensionError"""
        with pytest.raises(DimensionError):
            T.interp3d(Tensor(np.ones((1, 1, 2, 2, 2))), (4, 4, 4), mode="cubic")


class TestGradCheck:
    """Test the finite-difference checker itself"""

    def test_relative_error_scale_floor(self):
        """Test the denominator never drops below 1e-12"""
        assert relative_error(np.array([1e-13]), np.array([0.0])) == pytest.approx(0.1)

    def test_correct_gradient_passes(self):
        """Test a correct analytic gradient gives a tiny error"""
        x = parameter(np.random.default_rng(3).standard_normal(5))
        err = grad_check(lambda: T.sum(T.sigmoid(x) * x), [x])
        assert err < 1e-7

    def test_nondeterministic_function(self):
        """Test a function that changes between calls raises GradCheckError"""
        x = parameter([1.0])
        calls = iter(range(100))

        def f():
            return T.sum(x * float(next(calls)))
        with pytest.raises(GradCheckError):
            grad_check(f, [x])

    def test_per_param_errors(self):
        """Test per_param returns one error per named tensor"""
        a = parameter([1.0, 2.0])
        b = parameter([0.5])
        worst, errors = grad_check(lambda: T.sum(a * a) + T.sum(T.exp(b)), {"a": a, "b": b}, per_param=True)
        assert set(errors) == {"a", "b"}
        assert worst == max(errors.values())
        # grads are cleared afterwards
        assert a.grad is None and b.grad is None


class TestAdamW:
    """Test the optimizer and schedule"""

    def test_first_step_moves_by_lr(self):
        """Test the first bias-corrected step has magnitude lr per entry"""
        p = parameter([1.0, -1.0])
        state = AdamWState(lr=0.1, weight_decay=0.0)
        adamw_step([p], [np.array([3.0, -0.5])], state)
        np.testing.assert_allclose(p.data, [0.9, -0.9], atol=1e-6)
        assert state.step == 1

    def test_decay_is_decoupled(self):
        """Test a zero gradient still applies weight decay"""
        p = parameter([2.0])
        state = AdamWState(lr=0.1, weight_decay=0.5)
        adamw_step([p], [np.zeros(1)], state)
        assert p.data[0] == pytest.approx(2.0 * (1.0 - 0.05))

    def test_zero_grad_without_decay_is_noop(self):
        """Test a zero gradient with zero decay leaves the parameter unchanged"""
        p = parameter([1.5, -2.0])
        adamw_step([p], [np.zeros(2)], AdamWState(lr=0.1, weight_decay=0.0))
        np.testing.assert_array_equal(p.data, [1.5, -2.0])

    def test_positive_grad_decreases(self):
        """Test p = 1, g = 1, lr = 0.1 moves p downwards"""
        p = parameter([1.0])
        adamw_step([p], [np.ones(1)], AdamWState(lr=0.1, weight_decay=0.0))
        assert p.data[0] < 1.0

    def test_decay_only_scales_by_lr_times_decay(self):
        """Test decay 0.1 with zero gradient and lr 0.1 gives p * (1 - 0.01)"""
        p = parameter([3.0, -4.0])
        adamw_step([p], [np.zeros(2)], AdamWState(lr=0.1, weight_decay=0.1))
        np.testing.assert_allclose(p.data, [3.0 * 0.99, -4.0 * 0.99], rtol=1e-12)

    def test_none_grad_untouched(self):
        """Test a parameter without gradient keeps its value"""
        p = parameter([2.0])
        opt = AdamW([p], lr=0.1, weight_decay=0.5)
        opt.step()
        assert p.data[0] == 2.0

    def test_grad_shape_checked(self):
        """Test a gradient of the wrong shape raises DimensionError"""
        with pytest.raises(DimensionError):
            adamw_step([parameter([1.0, 2.0])], [np.ones(3)], AdamWState())

    def test_minimizes_quadratic(self):
        """Test AdamW drives a simple quadratic towards its minimum"""
        p = parameter([5.0, -3.0])
        opt = AdamW([p], lr=0.1, weight_decay=0.0)
        for _ in range(300):
            opt.zero_grad()
            T.sum(T.square(p)).backward()
            opt.step()
        assert np.all(np.abs(p.data) < 0.1)

    def test_cosine_schedule(self):
        """Test cosine decay endpoints and midpoint"""
        assert cosine_lr(0, 11, 1e-3) == pytest.approx(1e-3)
        assert cosine_lr(10, 11, 1e-3) == pytest.approx(1e-5)
        assert cosine_lr(5, 11, 1e-3) == pytest.approx(0.5 * (1e-3 + 1e-5))
        # single epoch keeps the base rate
        assert cosine_lr(0, 1, 1e-3) == 1e-3
