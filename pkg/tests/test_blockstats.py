import numpy as np
import pytest

from logsal.blockstats import block_variance, mae_vargrids, mae_maps


def loop_block_variance(g, block):
    """Scalar-loop oracle: population variance per (partial) block."""
    h, w = g.shape
    rows = -(-h // block)
    cols = -(-w // block)
    out = np.empty((rows, cols))
    for i in range(rows):
        for j in range(cols):
            vals = []
            for y in range(i * block, min((i + 1) * block, h)):
                for x in range(j * block, min((j + 1) * block, w)):
                    vals.append(g[y, x])
            mean = sum(vals) / len(vals)
            out[i, j] = sum((v - mean) ** 2 for v in vals) / len(vals)
    return out


class TestBlockVariance:
    def test_constant_grid(self):
        v = block_variance(np.full((16, 24), 3.0))
        assert v.variances.shape == (2, 3)
        np.testing.assert_array_equal(v.variances, 0.0)

    def test_checkerboard(self):
        g = np.indices((8, 8)).sum(axis=0) % 2
        v = block_variance(g.astype(float))
        assert v.variances[0, 0] == pytest.approx(0.25)

    def test_partial_blocks_match_loop_oracle(self):
        g = np.random.default_rng(20).random((20, 20))
        v = block_variance(g, 8)
        assert v.variances.shape == (3, 3)
        np.testing.assert_allclose(v.variances, loop_block_variance(g, 8),
                                   rtol=1e-12)

    def test_full_tiling_matches_loop_oracle(self):
        g = np.random.default_rng(21).random((16, 32))
        np.testing.assert_allclose(block_variance(g, 8).variances,
                                   loop_block_variance(g, 8), rtol=1e-12)

    def test_shift_invariance_and_quadratic_scaling(self):
        g = np.random.default_rng(22).random((17, 13))
        base = block_variance(g).variances
        np.testing.assert_allclose(block_variance(g + 5.0).variances, base,
                                   rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(block_variance(3.0 * g).variances,
                                   9.0 * base, rtol=1e-12)

    def test_single_pixel_blocks(self):
        g = np.random.default_rng(23).random((4, 4))
        np.testing.assert_array_equal(block_variance(g, 1).variances,
                                      np.zeros((4, 4)))


class TestMaeVargrids:
    def test_identical_zero(self):
        v = block_variance(np.random.default_rng(24).random((16, 16)))
        assert mae_vargrids(v, v) == 0.0

    def test_constant_offset(self):
        g = np.random.default_rng(25).random((16, 16))
        a = block_variance(g)
        b = block_variance(g)
        shifted = type(b)(variances=b.variances + 0.75, block=b.block)
        assert mae_vargrids(a, shifted) == pytest.approx(0.75)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(26)
        a = block_variance(rng.random((20, 28)))
        b = block_variance(rng.random((20, 28)))
        expect = 0.0
        for i in range(a.rows):
            for j in range(a.cols):
                expect += abs(a.variances[i, j] - b.variances[i, j])
        expect /= a.rows * a.cols
        assert mae_vargrids(a, b) == pytest.approx(expect, rel=1e-12)

    def test_layout_mismatch(self):
        a = block_variance(np.ones((16, 16)))
        b = block_variance(np.ones((24, 16)))
        with pytest.raises(ValueError, match="resize"):
            mae_vargrids(a, b)

    def test_metric_properties(self):
        rng = np.random.default_rng(27)
        grids_ = [block_variance(rng.random((16, 16))) for _ in range(3)]
        a, b, c = grids_
        assert mae_vargrids(a, b) == mae_vargrids(b, a)
        assert mae_vargrids(a, b) >= 0
        assert mae_vargrids(a, c) <= mae_vargrids(a, b) + mae_vargrids(b, c) + 1e-12


class TestMaeMaps:
    def test_equal_is_zero(self):
        g = np.random.default_rng(28).random((9, 9))
        assert mae_maps(g, g) == 0.0

    def test_constant_shift(self):
        g = np.random.default_rng(29).random((9, 9))
        assert mae_maps(g, g + 2.0) == pytest.approx(2.0)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(30)
        a, b = rng.random((7, 11)), rng.random((7, 11))
        expect = sum(abs(a[i, j] - b[i, j]) for i in range(7)
                     for j in range(11)) / 77
        assert mae_maps(a, b) == pytest.approx(expect, rel=1e-12)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            mae_maps(np.ones((4, 4)), np.ones((4, 5)))
