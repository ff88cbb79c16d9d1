import itertools

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from owslr.network import (
    CellGeometry, ConfigurationError, DecoderConfig, FeatureMap, MLPWeights, SemiLocalRegion,
    decode, extract_regions, init_decoder, run_windows, select_final_window, shrink_step,
    window_parameter_count,
)
from owslr.network.owdecoder import CORNERS, WindowWeights, final_window_origin
from owslr.numerics import Tensor, full, precision


def constant_region(M, D, value, rel=(0.0, 0.0), batch=None):
    shape = (M, M, D) if batch is None else (batch, M, M, D)
    rel = np.asarray(rel, dtype=np.float64)
    if batch is not None:
        rel = np.tile(rel, (batch, 1))
    idx = np.zeros(shape[:-1], dtype=np.int64)
    return SemiLocalRegion(Tensor(np.full(shape, value)), CellGeometry(0.1, 0.1, rel), idx, idx)


class DecoderConfigTestCase(SimpleTestCase):

    def test_window_sizes(self):
        """Test that window sizes run from M-1 down to M/2"""
        self.assertEqual(DecoderConfig(M=6, D=16).window_sizes, [5, 4, 3])
        self.assertEqual(DecoderConfig(M=4, D=8).window_sizes, [3, 2])

    def test_four_weights_per_size(self):
        """Test that every size gets four corner weights initialised to 1/4"""
        windows, _ = init_decoder(DecoderConfig(M=6, D=16, mlp_hidden=(8,)), seed=0)
        self.assertEqual(windows.sizes, [5, 4, 3])
        for k in (5, 4, 3):
            self.assertEqual([w.shape for w in windows.by_size[k]], [(k, k, 16)] * 4)
            assert_array_equal(windows.by_size[k][0].data, 0.25)

    def test_window_parameter_count(self):
        """Test the closed-form window parameter count"""
        cfg = DecoderConfig(M=6, D=16, mlp_hidden=(8,))
        windows, _ = init_decoder(cfg, seed=0)
        total = sum(t.size for t in windows.named_parameters().values())
        self.assertEqual(total, window_parameter_count(6, 16))
        self.assertEqual(total, 4 * 16 * (25 + 16 + 9))

    def test_odd_or_small_m_rejected(self):
        """Test that odd M and M below four are rejected"""
        with self.assertRaises(ConfigurationError):
            DecoderConfig(M=5)
        with self.assertRaises(ConfigurationError):
            DecoderConfig(M=2)

    def test_mlp_input_width(self):
        """Test that the relative offset adds two MLP inputs"""
        self.assertEqual(DecoderConfig(D=16).mlp_in_features, 64)
        self.assertEqual(DecoderConfig(D=16, use_rel_offset=True).mlp_in_features, 66)


class ShrinkStepTestCase(SimpleTestCase):

    def quarter(self, k, D=1):
        return [full((k, k, D), 0.25) for _ in range(4)]

    def test_hand_evaluated_two_by_two(self):
        """Test one shrink step against a hand-computed value"""
        grid = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(2, 2, 1))
        assert_allclose(shrink_step(grid, self.quarter(1)).data.ravel(), [2.5])

    def test_constant_is_preserved(self):
        """Test that quarter weights keep a constant grid constant"""
        grid = Tensor(np.full((5, 5, 3), 0.7))
        out = shrink_step(grid, self.quarter(4, 3))
        self.assertEqual(out.shape, (4, 4, 3))
        assert_allclose(out.data, 0.7, rtol=1e-6)

    def test_indicator_weight_selects_top_left(self):
        """Test that a one-hot top-left weight returns the top-left window"""
        grid = Tensor(np.arange(9.0).reshape(3, 3, 1))
        weights = [full((2, 2, 1), 1.0)] + [full((2, 2, 1), 0.0) for _ in range(3)]
        assert_array_equal(shrink_step(grid, weights).data, grid.data[:2, :2])

    def test_indicator_weight_selects_bottom_right(self):
        """Test that a one-hot bottom-right weight returns the bottom-right window"""
        grid = Tensor(np.arange(9.0).reshape(3, 3, 1))
        weights = [full((2, 2, 1), 0.0) for _ in range(3)] + [full((2, 2, 1), 1.0)]
        assert_array_equal(shrink_step(grid, weights).data, grid.data[1:, 1:])


class RunWindowsTestCase(SimpleTestCase):

    def test_six_shrinks_to_three(self):
        """Test that M=6 shrinks 6, 5, 4, 3 and keeps constants at init"""
        cfg = DecoderConfig(M=6, D=2, mlp_hidden=(4,))
        windows, _ = init_decoder(cfg, seed=0)
        out = run_windows(constant_region(6, 2, 0.4), windows)
        self.assertEqual(out.shape, (3, 3, 2))
        assert_allclose(out.data, 0.4, rtol=1e-6)

    def test_four_shrinks_to_two(self):
        """Test that M=4 ends on a 2x2 grid"""
        windows, _ = init_decoder(DecoderConfig(M=4, D=2, mlp_hidden=(4,)), seed=0)
        self.assertEqual(run_windows(constant_region(4, 2, 0.4), windows).shape, (2, 2, 2))

    def test_indicator_chain_equals_direct_slice(self):
        """One-hot corner weights at every size reduce the chain to a single slice."""
        M, D = 6, 2
        grid = Tensor(np.random.default_rng(6).integers(-50, 50, size=(M, M, D)).astype(np.float64))
        region = SemiLocalRegion(grid, CellGeometry(0.1, 0.1, np.zeros(2)), None, None)
        shifts = {'tl': (0, 0), 'tr': (0, 1), 'bl': (1, 0), 'br': (1, 1)}
        sizes = DecoderConfig(M=M, D=D).window_sizes
        for picks in itertools.product(CORNERS, repeat=len(sizes)):
            windows = WindowWeights({
                k: tuple(full((k, k, D), 1.0 if corner == pick else 0.0) for corner in CORNERS)
                for k, pick in zip(sizes, picks)
            })
            top = sum(shifts[p][0] for p in picks)
            left = sum(shifts[p][1] for p in picks)
            assert_array_equal(
                run_windows(region, windows).data, grid.data[top:top + M // 2, left:left + M // 2], str(picks),
            )

    def test_batched_run(self):
        """Test that a leading query axis is carried through"""
        windows, _ = init_decoder(DecoderConfig(M=4, D=2, mlp_hidden=(4,)), seed=0)
        out = run_windows(constant_region(4, 2, 0.4, batch=3), windows)
        self.assertEqual(out.shape, (3, 2, 2, 2))


class FinalWindowTestCase(SimpleTestCase):

    def test_two_by_two_is_identity(self):
        """Test that a 2x2 grid needs no selection"""
        grid = Tensor(np.arange(8.0).reshape(2, 2, 2))
        self.assertIs(select_final_window(grid, np.array([0.4, -0.4])), grid)

    def test_positive_offset_picks_bottom_right(self):
        """Test that positive offsets select the bottom-right window"""
        grid = Tensor(np.arange(9.0).reshape(3, 3, 1))
        out = select_final_window(grid, np.array([0.3, 0.3]))
        assert_array_equal(out.data, grid.data[1:3, 1:3])

    def test_zero_offset_ties_to_top_left(self):
        """Test that a centred query ties to the top-left window"""
        assert_array_equal(final_window_origin(3, np.array([0.0, 0.0])), [0, 0])

    def test_mixed_offset_uses_row_for_y(self):
        """rel_offset is (dx, dy); dy picks the rows."""
        assert_array_equal(final_window_origin(3, np.array([0.3, -0.2])), [0, 1])

    def test_batched_selection(self):
        """Test that each query in a batch selects its own window"""
        grid = Tensor(np.arange(18.0).reshape(2, 3, 3, 1))
        rel = np.array([[0.3, 0.3], [-0.3, -0.3]])
        out = select_final_window(grid, rel)
        assert_array_equal(out.data[0], grid.data[0, 1:3, 1:3])
        assert_array_equal(out.data[1], grid.data[1, 0:2, 0:2])


class DecodeTestCase(SimpleTestCase):

    def averaging_mlp(self, D, C):
        return MLPWeights([(Tensor(np.full((4 * D, C), 1.0 / (4 * D))), Tensor(np.zeros(C)))])

    def test_constant_region_decodes_to_constant(self):
        """Test that an averaging MLP returns the constant of a constant region"""
        for M in (4, 6):
            D, C = 3, 3
            windows, _ = init_decoder(DecoderConfig(M=M, D=D, mlp_hidden=(4,)), seed=0)
            out = decode(constant_region(M, D, 0.6, rel=(0.2, -0.1)), windows, self.averaging_mlp(D, C))
            self.assertEqual(out.shape, (C,))
            assert_allclose(out.data, 0.6, rtol=1e-6)

    def test_output_shape_for_configs(self):
        """Test output width across M, D and channel counts"""
        for M, D, C in ((4, 2, 1), (6, 5, 3), (8, 3, 3)):
            cfg = DecoderConfig(M=M, D=D, mlp_hidden=(6, 6), out_channels=C, use_rel_offset=M == 6)
            windows, mlp = init_decoder(cfg, seed=1)
            region = constant_region(M, D, 0.5, rel=(0.1, 0.1))
            self.assertEqual(decode(region, windows, mlp, cfg.use_rel_offset).shape, (C,))

    def test_batched_decode_matches_single(self):
        """Test that batched decoding equals decoding one query at a time"""
        cfg = DecoderConfig(M=6, D=2, mlp_hidden=(5,), use_rel_offset=True)
        windows, mlp = init_decoder(cfg, seed=4)
        psi = FeatureMap(Tensor(np.random.default_rng(4).standard_normal((6, 6, 2))))
        xs, ys = np.array([0.2, 0.71, 0.5]), np.array([0.33, 0.9, 0.05])
        batch = decode(extract_regions(xs, ys, 6, psi), windows, mlp, True)
        self.assertEqual(batch.shape, (3, 3))
        for i in range(3):
            single = decode(extract_regions(xs[i:i + 1], ys[i:i + 1], 6, psi), windows, mlp, True)
            assert_allclose(batch.data[i], single.data[0], rtol=1e-12)

    def test_end_to_end_gradients(self):
        """Test decode gradients against finite differences in float64"""
        from owslr.services.diagnostics import decode_case
        from owslr.numerics import check_gradients

        with precision(np.float64):
            _, (fn, params) = decode_case(seed=3, M=4)
            result = check_gradients('decode', fn, params, tolerance=1e-6, max_entries=5,
                                     rng=np.random.default_rng(3))
        self.assertTrue(result.passed, result)
