import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrfamp.errors import InvalidOffsetError, InvalidWindowError, ShapeError
from mrfamp.lattice import (
    LatticeShape,
    WindowSpec,
    devectorize,
    extract_window,
    partition_indices,
    shift_fill_matrix,
    shift_window_fill,
    vectorize,
    window_patches,
)
from oracles import brute_force_partition


class TestShapes:
    def test_size(self):
        assert LatticeShape(2, 128).size == 128**2
        assert LatticeShape(3, 4).array_shape == (4, 4, 4)

    @pytest.mark.parametrize("dim, side", [(0, 4), (4, 4), (2, 0)])
    def test_invalid(self, dim, side):
        with pytest.raises(ShapeError):
            LatticeShape(dim, side)

    def test_window_size(self):
        w = WindowSpec(2)
        assert w.width == 5 and w.size(2) == 25 and w.center_flat(2) == 12

    def test_mask_must_include_centre(self):
        mask = np.ones((3, 3), bool)
        mask[1, 1] = False
        with pytest.raises(InvalidWindowError):
            WindowSpec(1, mask)

    def test_mask_shape(self):
        with pytest.raises(InvalidWindowError):
            WindowSpec(1, np.ones((3, 4), bool))

    def test_negative_half_width(self):
        with pytest.raises(InvalidWindowError):
            WindowSpec(-1)


class TestPartition:
    def test_mid_count_128(self):
        mid, edge = partition_indices(LatticeShape(2, 128), WindowSpec(1))
        assert mid.size == 126**2 == 15876
        assert mid.size + edge.size == 128**2

    def test_k0_has_no_edge(self):
        mid, edge = partition_indices(LatticeShape(1, 5), WindowSpec(0))
        np.testing.assert_array_equal(mid, np.arange(5))
        assert edge.size == 0

    def test_1d_n7_k2(self):
        # 1-based {3,4,5} / {1,2,6,7}
        mid, edge = partition_indices(LatticeShape(1, 7), WindowSpec(2))
        np.testing.assert_array_equal(mid, [2, 3, 4])
        np.testing.assert_array_equal(edge, [0, 1, 5, 6])

    @pytest.mark.parametrize("dim, side, k", [(1, 9, 3), (2, 7, 1), (2, 8, 2), (3, 5, 1)])
    def test_matches_brute_force(self, dim, side, k):
        mid, edge = partition_indices(LatticeShape(dim, side), WindowSpec(k))
        bmid, bedge = brute_force_partition(dim, side, k)
        np.testing.assert_array_equal(mid, bmid)
        np.testing.assert_array_equal(edge, bedge)
        assert mid.size == (side - 2 * k) ** dim

    def test_window_too_large(self):
        with pytest.raises(InvalidWindowError):
            partition_indices(LatticeShape(2, 4), WindowSpec(2))


class TestExtractWindow:
    def test_1d_i3_k5(self):
        # centre 3 (1-based) with k = 5 on 8 sites: three fills then v1..v8
        v = np.arange(1.0, 9.0)
        patch = extract_window(v, 2, WindowSpec(5))
        vbar = v.sum() / 8
        assert vbar == 4.5
        expected = np.array([vbar] * 3 + list(v))
        np.testing.assert_array_equal(patch, expected)

    def test_2d_corner_n4_k1(self):
        v = np.arange(16.0).reshape(4, 4) * 3 + 1
        patch = extract_window(v, (0, 0), WindowSpec(1))
        vbar = (v[0, 0] + v[0, 1] + v[1, 0] + v[1, 1]) / 4
        expected = np.array([[vbar, vbar, vbar], [vbar, v[0, 0], v[0, 1]], [vbar, v[1, 0], v[1, 1]]])
        np.testing.assert_array_equal(patch, expected)
        assert np.sum(patch == vbar) == 5

    def test_mid_is_raw(self, rng):
        v = rng.normal(size=(9, 9))
        np.testing.assert_array_equal(extract_window(v, (4, 5), WindowSpec(2)), v[2:7, 3:8])

    def test_fill_never_overwrites_and_is_constant(self, rng):
        v = rng.normal(size=(6, 6))
        k = 2
        for i in range(6):
            for j in range(6):
                patch = extract_window(v, (i, j), WindowSpec(k))
                rows = np.arange(i - k, i + k + 1)
                cols = np.arange(j - k, j + k + 1)
                inside = ((rows >= 0) & (rows < 6))[:, None] & ((cols >= 0) & (cols < 6))[None, :]
                raw = v[np.clip(rows, 0, 5)][:, np.clip(cols, 0, 5)]
                np.testing.assert_array_equal(patch[inside], raw[inside])
                if not inside.all():
                    fills = patch[~inside]
                    mean = raw[inside].mean()
                    # relative to the size of the averaged entries (the mean itself may be ~0)
                    scale = np.abs(raw[inside]).max()
                    np.testing.assert_allclose(fills, mean, rtol=0, atol=1e-15 * scale)
                    assert np.all(fills == fills[0])

    def test_bad_centre(self):
        with pytest.raises(ShapeError):
            extract_window(np.zeros((4, 4)), (4, 0), WindowSpec(1))

    @pytest.mark.parametrize("dim, side, k", [(1, 7, 2), (2, 6, 1), (2, 5, 2), (3, 4, 1)])
    def test_patches_match_extract(self, dim, side, k, rng):
        v = rng.normal(size=(side,) * dim)
        patches = window_patches(v, WindowSpec(k))
        for flat in range(side**dim):
            centre = np.unravel_index(flat, v.shape)
            np.testing.assert_array_equal(patches[flat], extract_window(v, centre, WindowSpec(k)).ravel())

    def test_window_energy_bound(self, rng):
        # sum over mid sites of ||a_window||^2 <= 2 d ||a||^2
        a = rng.normal(size=(12, 12))
        w = WindowSpec(1)
        mid, _ = partition_indices(LatticeShape(2, 12), w)
        total = np.sum(window_patches(a, w)[mid] ** 2)
        assert total <= 2 * w.size(2) * np.sum(a**2)


class TestShift:
    def test_plus_one(self):
        out = shift_window_fill(np.array([1.0, 2.0, 4.0]), [1])
        np.testing.assert_array_equal(out, [2.0, 4.0, 3.0])

    def test_zero_is_identity(self, rng):
        patch = rng.normal(size=(3, 3))
        np.testing.assert_array_equal(shift_window_fill(patch, (0, 0)), patch)

    def test_minus_two(self):
        a, b, c, d, e = 1.0, 2.0, 6.0, 7.0, 9.0
        m = (a + b + c) / 3
        out = shift_window_fill(np.array([a, b, c, d, e]), [-2])
        np.testing.assert_array_equal(out, [m, m, a, b, c])

    def test_offset_too_large(self):
        with pytest.raises(InvalidOffsetError):
            shift_window_fill(np.zeros(3), [2])
        with pytest.raises(InvalidOffsetError):
            shift_fill_matrix(2, 1, (0, -2))

    def test_matrix_matches(self, rng):
        patch = rng.normal(size=(5, 5))
        for off in [(0, 0), (1, -2), (-2, -2), (2, 0)]:
            F = shift_fill_matrix(2, 2, off)
            np.testing.assert_allclose(F @ patch.ravel(), shift_window_fill(patch, off).ravel(),
                                       rtol=0, atol=1e-15 * np.abs(patch).max())

    def test_shift_matches_edge_window(self, rng):
        # a full window shifted by l is the window of the site l cells from the corner
        v = rng.normal(size=(8, 8))
        full = v[0:3, 0:3]
        np.testing.assert_allclose(shift_window_fill(full, (-1, -1)), extract_window(v, (0, 0), WindowSpec(1)),
                                   rtol=1e-15)
        np.testing.assert_allclose(shift_window_fill(full, (-1, 0)), extract_window(v, (0, 1), WindowSpec(1)),
                                   rtol=1e-15)


class TestVectorize:
    def test_row_major(self):
        np.testing.assert_array_equal(vectorize(np.array([[1, 2], [3, 4]])), [1, 2, 3, 4])

    def test_1d_identity(self, rng):
        v = rng.normal(size=7)
        np.testing.assert_array_equal(vectorize(v), v)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 2), st.integers(1, 6), st.integers(0, 2**31 - 1))
    def test_round_trip(self, dim, side, seed):
        v = np.random.default_rng(seed).normal(size=(side,) * dim)
        np.testing.assert_array_equal(devectorize(vectorize(v), LatticeShape(dim, side)), v)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            devectorize(np.zeros(5), LatticeShape(2, 2))
