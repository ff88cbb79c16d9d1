import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from owslr.numerics import (
    AdamState, Graph, GraphError, NonFiniteError, OptimizerError, ShapeError, Tensor, adam_step,
    add, backward, check_gradients, concat, conv2d, default_dtype, elementwise, full, index,
    init_tensor, l1_loss, matmul, mean, mul, precision, reduce, relu, reshape, scale, sub,
    sum_all, tile, uniform, zeros,
)


def grads_of(fn, *inputs):
    for t in inputs:
        t.grad = None
    with Graph() as graph:
        loss = fn()
    backward(graph, loss)
    return [t.grad for t in inputs]


class TensorFactoryTestCase(SimpleTestCase):

    def test_zeros(self):
        """Test the zeros factory"""
        assert_array_equal(zeros((2, 2)).data, [[0, 0], [0, 0]])

    def test_constant_fill(self):
        """Test the constant factory"""
        assert_array_equal(init_tensor((3,), 'constant', value=1.5).data, [1.5, 1.5, 1.5])

    def test_uniform_is_reproducible(self):
        """Test that a seed fixes uniform initialisation"""
        first = init_tensor((4,), 'uniform', seed=7, low=-1, high=1)
        second = init_tensor((4,), 'uniform', seed=7, low=-1, high=1)
        assert_array_equal(first.data, second.data)
        self.assertTrue(np.all(np.abs(first.data) <= 1.0))

    def test_empty_shape_rejected(self):
        """Test that scalar and zero-sized shapes are rejected"""
        with self.assertRaises(ShapeError):
            zeros(())
        with self.assertRaises(ShapeError):
            zeros((2, 0))

    def test_non_finite_fill_rejected(self):
        """Test that NaN and inf fills are rejected"""
        with self.assertRaises(ValueError):
            full((2,), float('nan'))

    def test_default_dtype_is_float32_and_precision_switches(self):
        """Test that precision() switches the factory dtype and restores it"""
        self.assertIs(default_dtype(), np.float32)
        with precision(np.float64):
            self.assertEqual(zeros((1,)).dtype, np.float64)
        self.assertEqual(zeros((1,)).dtype, np.float32)

    def test_tensor_rejects_nan(self):
        """Test that tensors refuse non-finite data"""
        with self.assertRaises(NonFiniteError):
            Tensor(np.array([1.0, np.inf]))


class ElementwiseTestCase(SimpleTestCase):

    def test_relu_sign_cases(self):
        """Test relu on negative, zero and positive inputs"""
        assert_array_equal(relu(Tensor([-1.0, 0.0, 2.0])).data, [0, 0, 2])

    def test_mul(self):
        """Test elementwise product"""
        assert_array_equal(mul(Tensor([2.0, 3.0]), Tensor([4.0, 5.0])).data, [8, 15])

    def test_elementwise_dispatch(self):
        """Test that elementwise() routes to the named op"""
        a, b = Tensor([1.0, 2.0]), Tensor([3.0, 5.0])
        assert_array_equal(elementwise('add', a, b).data, [4, 7])
        assert_array_equal(elementwise('sub', a, b).data, [-2, -3])
        with self.assertRaises(ValueError):
            elementwise('mul', a)

    def test_shape_mismatch_is_an_error_not_a_broadcast(self):
        """Test that mismatched shapes raise instead of broadcasting"""
        with self.assertRaises(ShapeError):
            add(Tensor(np.ones((2, 3))), Tensor(np.ones((3,))))

    def test_add_gradient_is_all_ones(self):
        """Test that add passes the gradient through unchanged"""
        a = Tensor(np.arange(4.0), requires_grad=True)
        b = Tensor(np.ones(4), requires_grad=True)
        grad_a, = grads_of(lambda: sum_all(add(a, b)), a)
        assert_array_equal(grad_a, np.ones(4))

    def test_scale_and_sub_gradients(self):
        """Test gradients of scale and sub"""
        a = Tensor(np.ones(3), requires_grad=True)
        b = Tensor(np.ones(3), requires_grad=True)
        grad_a, grad_b = grads_of(lambda: sum_all(scale(sub(a, b), 2.0)), a, b)
        assert_array_equal(grad_a, [2, 2, 2])
        assert_array_equal(grad_b, [-2, -2, -2])


class MatmulTestCase(SimpleTestCase):

    def test_identity(self):
        """Test that multiplying by identity returns the input"""
        x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert_array_equal(matmul(Tensor(np.eye(2)), x).data, x.data)

    def test_direct_dot(self):
        """Test matmul against a hand-computed product"""
        assert_array_equal(matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]])).data, [[11]])

    def test_inner_dimension_mismatch(self):
        """Test that mismatched inner dimensions raise"""
        with self.assertRaises(ShapeError):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_gradient_matches_finite_differences(self):
        """Test matmul gradients against finite differences"""
        rng = np.random.default_rng(3)
        with precision(np.float64):
            a = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
            b = Tensor(rng.standard_normal((4, 2)), requires_grad=True)
            w = Tensor(rng.standard_normal((3, 2)))
            result = check_gradients('matmul', lambda: sum_all(mul(matmul(a, b), w)), [a, b])
        self.assertTrue(result.passed, result)


class Conv2dTestCase(SimpleTestCase):

    def test_one_by_one_identity_kernel(self):
        """Test that a 1x1 identity kernel copies the input"""
        rng = np.random.default_rng(0)
        x = Tensor(rng.standard_normal((5, 4, 3)))
        kernel = Tensor(np.eye(3).reshape(1, 1, 3, 3))
        assert_allclose(conv2d(x, kernel).data, x.data, rtol=1e-6)

    def test_all_ones_kernel_counts_neighbours(self):
        """Test that an all-ones kernel counts in-bounds neighbours under zero padding"""
        out = conv2d(Tensor(np.ones((3, 3, 1))), Tensor(np.ones((3, 3, 1, 1)))).data[:, :, 0]
        self.assertEqual(out[1, 1], 9)
        self.assertEqual(out[0, 0], 4)
        self.assertEqual(out[0, 1], 6)

    def test_kernel_orientation_is_correlation(self):
        """Kernel tap (0, 0) reads the up-left neighbour."""
        x = np.zeros((3, 3, 1))
        x[0, 0, 0] = 1.0
        kernel = np.zeros((3, 3, 1, 1))
        kernel[0, 0, 0, 0] = 1.0
        out = conv2d(Tensor(x), Tensor(kernel)).data
        self.assertEqual(out[1, 1, 0], 1.0)

    def test_channel_mismatch(self):
        """Test that a kernel with the wrong input channels raises"""
        with self.assertRaises(ShapeError):
            conv2d(Tensor(np.ones((4, 4, 2))), Tensor(np.ones((3, 3, 3, 1))))

    def test_even_kernel_rejected(self):
        """Test that even kernel sizes are rejected"""
        with self.assertRaises(ShapeError):
            conv2d(Tensor(np.ones((4, 4, 1))), Tensor(np.ones((2, 2, 1, 1))))

    def test_gradients_match_finite_differences(self):
        """Test conv2d gradients against finite differences"""
        rng = np.random.default_rng(11)
        with precision(np.float64):
            x = Tensor(rng.standard_normal((4, 4, 2)), requires_grad=True)
            k = Tensor(rng.standard_normal((3, 3, 2, 2)), requires_grad=True)
            w = Tensor(rng.standard_normal((4, 4, 2)))
            result = check_gradients('conv2d', lambda: sum_all(mul(conv2d(x, k), w)), [x, k])
        self.assertTrue(result.passed, result)
        self.assertEqual(result.checked, x.size + k.size)


class ReductionAndLossTestCase(SimpleTestCase):

    def test_sum_and_mean(self):
        """Test sum and mean reductions"""
        self.assertEqual(reduce('sum', Tensor([1.0, 2.0, 3.0])).item(), 6.0)
        self.assertEqual(reduce('mean', Tensor([2.0, 4.0])).item(), 3.0)
        self.assertEqual(sum_all(Tensor([1.0])).shape, ())

    def test_mean_gradient_is_uniform(self):
        """Test that the mean spreads its gradient evenly"""
        a = Tensor(np.arange(4.0), requires_grad=True)
        grad, = grads_of(lambda: mean(a), a)
        assert_array_equal(grad, [0.25] * 4)

    def test_l1_loss_values(self):
        """Test l1_loss values"""
        pred = Tensor(np.full((2, 3), 0.75))
        self.assertEqual(l1_loss(pred, Tensor(np.full((2, 3), 0.75))).item(), 0.0)
        self.assertAlmostEqual(l1_loss(pred, Tensor(np.full((2, 3), 0.25))).item(), 0.5, places=6)

    def test_l1_loss_gradient_is_sign_over_n(self):
        """Test that the l1 gradient is sign(pred - target) / n"""
        pred = Tensor(np.full((2, 4), 1.0), requires_grad=True)
        grad, = grads_of(lambda: l1_loss(pred, Tensor(np.zeros((2, 4)))), pred)
        assert_allclose(grad, np.full((2, 4), 1.0 / 8))

    def test_l1_loss_rejects_tracked_target(self):
        """Test that a target requiring gradients is refused"""
        with self.assertRaises(ValueError):
            l1_loss(Tensor([1.0]), Tensor([1.0], requires_grad=True))


class ShapePlumbingTestCase(SimpleTestCase):

    def test_tile_gradient_sums_over_copies(self):
        """Test that tile sums the gradient over its copies"""
        v = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        grad, = grads_of(lambda: sum_all(tile(v, (3, 2))), v)
        assert_array_equal(grad, [6, 6])

    def test_gather_gradient_counts_references(self):
        """Test that gather scatter-adds into repeated indices"""
        a = Tensor(np.arange(5.0), requires_grad=True)
        grad, = grads_of(lambda: sum_all(index(a, (np.array([0, 0, 3, 4, 4, 4]),))), a)
        assert_array_equal(grad, [2, 0, 0, 1, 3])

    def test_slice_and_reshape(self):
        """Test slicing and reshaping values and gradients"""
        a = Tensor(np.arange(12.0).reshape(3, 4), requires_grad=True)
        grad, = grads_of(lambda: sum_all(reshape(index(a, (slice(1, 3), slice(None))), (8,))), a)
        assert_array_equal(grad, [[0] * 4, [1] * 4, [1] * 4])

    def test_concat_splits_gradient(self):
        """Test that concat routes each gradient slice to its input"""
        a = Tensor(np.ones((1, 2)), requires_grad=True)
        b = Tensor(np.ones((2, 2)), requires_grad=True)
        w = Tensor(np.arange(6.0).reshape(3, 2))
        grad_a, grad_b = grads_of(lambda: sum_all(mul(concat([a, b], axis=0), w)), a, b)
        assert_array_equal(grad_a, [[0, 1]])
        assert_array_equal(grad_b, [[2, 3], [4, 5]])


class BackwardTestCase(SimpleTestCase):

    def test_square_gradient(self):
        """Test backward through x * x"""
        x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
        grad, = grads_of(lambda: sum_all(mul(x, x)), x)
        assert_array_equal(grad, [2, -4, 6])

    def test_l1_of_matmul_matches_finite_differences(self):
        """Test a composed loss against finite differences"""
        rng = np.random.default_rng(5)
        with precision(np.float64):
            W = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
            x = Tensor(rng.standard_normal((4, 2)), requires_grad=True)
            y = Tensor(rng.standard_normal((3, 2)))
            result = check_gradients('l1(Wx)', lambda: l1_loss(matmul(W, x), y), [W, x])
        self.assertTrue(result.passed, result)

    def test_untracked_loss_writes_nothing(self):
        """Test that backward on an untracked loss leaves gradients empty"""
        a = Tensor(np.ones(3))
        with Graph() as graph:
            loss = sum_all(a)
        backward(graph, loss)
        self.assertIsNone(a.grad)
        self.assertEqual(len(graph), 0)

    def test_graph_is_single_use(self):
        """Test that a graph cannot be run backward twice"""
        a = Tensor(np.ones(3), requires_grad=True)
        with Graph() as graph:
            loss = sum_all(a)
        backward(graph, loss)
        with self.assertRaises(GraphError):
            backward(graph, loss)

    def test_non_scalar_loss_rejected(self):
        """Test that backward needs a scalar loss"""
        a = Tensor(np.ones(3), requires_grad=True)
        with Graph() as graph:
            out = relu(a)
        with self.assertRaises(ShapeError):
            backward(graph, out)

    def test_ops_outside_graph_are_not_recorded(self):
        """Test that ops outside a graph context are not recorded"""
        a = Tensor(np.ones(3), requires_grad=True)
        self.assertIsNone(sum_all(a)._node)

    def test_shared_input_accumulates(self):
        """Test that gradients accumulate when an input is used twice"""
        a = Tensor(np.array([2.0]), requires_grad=True)
        grad, = grads_of(lambda: sum_all(add(mul(a, a), a)), a)
        assert_array_equal(grad, [5.0])


class AdamTestCase(SimpleTestCase):

    def test_first_step_moves_by_lr(self):
        """Test that the first bias-corrected step moves by about lr"""
        theta = Tensor(np.zeros(1), requires_grad=True)
        theta.grad = np.array([0.1], dtype=theta.dtype)
        adam_step([theta], AdamState(), 1e-4)
        assert_allclose(theta.data, [-1e-4], rtol=1e-3)
        self.assertIsNone(theta.grad)

    def test_zero_gradient_leaves_parameters(self):
        """Test that a zero gradient leaves parameters in place"""
        theta = Tensor(np.array([0.5, -0.5]), requires_grad=True)
        theta.grad = np.zeros(2, dtype=theta.dtype)
        adam_step([theta], AdamState(), 1e-3)
        assert_array_equal(theta.data, [0.5, -0.5])

    def test_identical_inputs_identical_outputs(self):
        """Test that Adam is deterministic"""
        def run():
            p = uniform((5,), 2, requires_grad=True)
            state = AdamState()
            for step in range(3):
                p.grad = np.full(5, 0.1 * (step + 1), dtype=p.dtype)
                adam_step([p], state, 1e-2)
            return p.data
        assert_array_equal(run(), run())

    def test_non_finite_update_leaves_everything_untouched(self):
        """A blow-up in a later parameter must not half-apply the step."""
        first = Tensor(np.array([0.5, -0.5]), requires_grad=True, name='first')
        second = Tensor(np.array([1.0]), requires_grad=True, name='second')
        state = AdamState()
        first.grad = np.full(2, 0.1, dtype=first.dtype)
        second.grad = np.full(1, 0.1, dtype=second.dtype)
        adam_step([first, second], state, 1e-3)
        before = (first.data.copy(), second.data.copy(), [m.copy() for m in state.m], state.t)

        first.grad = np.full(2, 0.1, dtype=first.dtype)
        second.grad = np.array([np.nan], dtype=second.dtype)
        with self.assertRaisesMessage(NonFiniteError, 'second'):
            adam_step([first, second], state, 1e-3)
        assert_array_equal(first.data, before[0])
        assert_array_equal(second.data, before[1])
        for m, m_before in zip(state.m, before[2]):
            assert_array_equal(m, m_before)
        self.assertEqual(state.t, before[3])

    def test_missing_gradient_names_parameter(self):
        """Test that a missing gradient names the parameter"""
        p = Tensor(np.zeros(2), requires_grad=True, name='owd.mlp.0.bias')
        with self.assertRaisesMessage(OptimizerError, 'owd.mlp.0.bias'):
            adam_step([p], AdamState(), 1e-3)

    def test_non_positive_lr_rejected(self):
        """Test that a non-positive learning rate is refused"""
        p = Tensor(np.zeros(2), requires_grad=True)
        p.grad = np.zeros(2, dtype=p.dtype)
        with self.assertRaises(OptimizerError):
            adam_step([p], AdamState(), 0.0)


class GradCheckTestCase(SimpleTestCase):

    def test_wrong_backward_is_caught(self):
        """A deliberately wrong gradient must fail the checker."""
        from owslr.numerics.tensor import make_result

        def bad_square(a):
            return make_result('bad_square', a.data * a.data, (a,), lambda g: (g * a.data,))

        with precision(np.float64):
            a = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
            result = check_gradients('bad', lambda: sum_all(bad_square(a)), [a])
        self.assertFalse(result.passed)

    def test_relu_kink_is_skipped(self):
        """Test that entries on the relu kink are skipped, not failed"""
        with precision(np.float64):
            a = Tensor(np.array([0.0, 1.0, -1.0]), requires_grad=True)
            result = check_gradients('relu', lambda: sum_all(relu(a)), [a])
        self.assertTrue(result.passed)
        self.assertEqual(result.skipped, 1)
