import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghostedge.image import (ShiftMode, as_image, directional_gradient,
                             gradient_offset, normalize_map, read_pgm, shift,
                             sobel_edges, write_pgm)

from conftest import diff_loop_oracle, sobel_loop_oracle


class TestShift:
    def test_zero_shift_is_identity(self, rng):
        img = rng.random((5, 7))
        assert np.array_equal(shift(img, 0, 0), img)

    def test_row_rotation_by_one(self):
        img = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(shift(img, 1, 0), [[3.0, 4.0], [1.0, 2.0]])

    def test_semantics_pointwise(self, rng):
        img = rng.random((6, 5))
        out = shift(img, 1, -1)
        for a in range(6):
            for b in range(5):
                assert out[a, b] == img[(a + 1) % 6, (b - 1) % 5]

    @settings(deadline=None, max_examples=50)
    @given(dx=st.integers(-3, 3), dy=st.integers(-3, 3),
           seed=st.integers(0, 1000))
    def test_inverse_composition_exact(self, dx, dy, seed):
        img = np.random.default_rng(seed).random((4, 6))
        back = shift(shift(img, dx, dy), -dx, -dy)
        assert np.array_equal(back, img)

    def test_master_crop_requires_canvas(self, rng):
        with pytest.raises(ValueError, match="no master canvas"):
            shift(rng.random((4, 4)), 1, 1, ShiftMode.MASTER_CROP)

    def test_master_crop_reads_window(self, rng):
        master = rng.random((6, 6))
        img = master[1:5, 1:5]
        out = shift(img, 1, -1, ShiftMode.MASTER_CROP, master=master)
        assert np.array_equal(out, master[2:6, 0:4])

    def test_master_crop_limits(self, rng):
        master = rng.random((6, 6))
        img = master[1:5, 1:5]
        with pytest.raises(ValueError, match="one pixel"):
            shift(img, 2, 0, ShiftMode.MASTER_CROP, master=master)
        with pytest.raises(ValueError, match="master canvas must be"):
            shift(img, 1, 0, ShiftMode.MASTER_CROP, master=rng.random((7, 6)))


class TestSobel:
    def test_constant_image_gives_zero(self):
        h, v, mag = sobel_edges(np.full((5, 5), 0.7))
        assert np.all(h == 0) and np.all(v == 0) and np.all(mag == 0)

    def test_vertical_step_frozen_values(self):
        # Rows 0,0,1,1 down the first axis: the horizontal channel is
        # 4 * (row[x-1] - row[x+1]) and the vertical channel cancels.
        img = np.repeat(np.array([[0.0], [0.0], [1.0], [1.0]]), 4, axis=1)
        h, v, mag = sobel_edges(img)
        expected_h = np.repeat(np.array([[4.0], [-4.0], [-4.0], [4.0]]), 4, axis=1)
        assert np.array_equal(h, expected_h)
        assert np.all(v == 0)
        assert np.array_equal(mag, np.abs(expected_h))

    def test_matches_dense_convolution_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            img = rng.random((8, 8))
            h, v, mag = sobel_edges(img)
            h_ref, v_ref, mag_ref = sobel_loop_oracle(img)
            assert np.abs(h - h_ref).max() < 1e-12
            assert np.abs(v - v_ref).max() < 1e-12
            assert np.abs(mag - mag_ref).max() < 1e-12

    def test_impulse_stamps_flipped_kernel(self):
        img = np.zeros((7, 7))
        img[3, 3] = 1.0
        h, _, _ = sobel_edges(img)
        h_ref, _, _ = sobel_loop_oracle(img)
        assert np.array_equal(h, h_ref)
        # The impulse response is the stencil flipped around the impulse.
        assert h[2, 2] == -1.0 and h[2, 3] == -2.0 and h[2, 4] == -1.0
        assert h[4, 2] == 1.0 and h[4, 3] == 2.0 and h[4, 4] == 1.0

    def test_magnitude_nonnegative_and_zero_only_with_channels(self, rng):
        img = rng.random((6, 6))
        h, v, mag = sobel_edges(img)
        assert np.all(mag >= 0)
        both_zero = (h == 0) & (v == 0)
        assert np.array_equal(mag == 0, both_zero)

    def test_rejects_tiny_images(self):
        with pytest.raises(ValueError):
            sobel_edges(np.zeros((2, 5)))


class TestDirectionalGradient:
    def test_offsets(self):
        assert gradient_offset(0) == (1, 0)
        assert gradient_offset(45) == (1, 1)
        assert gradient_offset(90) == (0, 1)
        assert gradient_offset(135) == (-1, 1)
        assert gradient_offset(180) == (-1, 0)
        assert gradient_offset(225) == (-1, -1)

    def test_unsupported_angle(self):
        with pytest.raises(ValueError, match="unsupported angle"):
            gradient_offset(30)

    def test_constant_image_gives_zero(self):
        out = directional_gradient(np.full((4, 4), 0.3), 45)
        assert np.all(out == 0)

    def test_matches_differencing_oracle(self, rng):
        for phi in (0, 45, 90, 135):
            img = rng.random((5, 7))
            dx, dy = gradient_offset(phi)
            assert np.array_equal(directional_gradient(img, phi),
                                  diff_loop_oracle(img, dx, dy))

    def test_telescoping_sum_is_zero(self, rng):
        img = rng.random((6, 6))
        for phi in (0, 45, 90, 135):
            assert abs(directional_gradient(img, phi).sum()) < 1e-10

    def test_opposite_angles_negate_after_shift(self, rng):
        img = rng.random((6, 5))
        for phi in (0, 45, 90, 135):
            dx, dy = gradient_offset(phi)
            fwd = directional_gradient(img, phi)
            bwd = directional_gradient(img, phi + 180)
            assert np.allclose(bwd, -shift(fwd, -dx, -dy), atol=1e-15)


class TestNormalize:
    def test_midpoint(self):
        out = normalize_map(np.array([[2.0, 4.0], [6.0, 4.0]]))
        assert out[0, 1] == 0.5 and out[1, 1] == 0.5
        assert out[0, 0] == 0.0 and out[1, 0] == 1.0

    def test_constant_maps_to_zeros(self):
        assert np.all(normalize_map(np.full((3, 3), 5.0)) == 0)

    def test_unit_range_unchanged(self, rng):
        img = rng.random((4, 4))
        img[0, 0], img[1, 1] = 0.0, 1.0
        assert np.array_equal(normalize_map(img), img)


class TestImageValidation:
    def test_rejects_small_and_out_of_range(self):
        with pytest.raises(ValueError, match="at least 3x3"):
            as_image(np.zeros((2, 4)))
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            as_image(np.full((4, 4), 1.5))
        with pytest.raises(ValueError, match="non-finite"):
            as_image(np.full((4, 4), np.nan))


class TestPgm:
    def test_round_trip_within_quantization(self, rng, tmp_path):
        img = rng.random((9, 13))
        path = tmp_path / "img.pgm"
        write_pgm(path, img)
        back = read_pgm(path)
        assert back.shape == img.shape
        assert np.abs(back - img).max() <= 0.5 / 255 + 1e-12

    def test_written_values_round_trip_exactly(self, tmp_path):
        img = np.linspace(0, 1, 16).reshape(4, 4)
        path = tmp_path / "img.pgm"
        write_pgm(path, img)
        write_pgm(tmp_path / "again.pgm", read_pgm(path))
        assert (tmp_path / "img.pgm").read_bytes() == \
            (tmp_path / "again.pgm").read_bytes()

    def test_comment_headers(self, tmp_path):
        path = tmp_path / "c.pgm"
        pixels = bytes(range(6))
        path.write_bytes(b"P5\n# a comment\n3 2\n# more\n255\n" + pixels)
        img = read_pgm(path)
        assert img.shape == (2, 3)
        assert img[1, 2] == 5 / 255

    def test_rejects_other_formats(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P2\n2 2\n255\n0 0 0 0\n")
        with pytest.raises(ValueError, match="P5"):
            read_pgm(path)

    def test_rejects_truncated(self, tmp_path):
        path = tmp_path / "short.pgm"
        path.write_bytes(b"P5\n4 4\n255\n\x00\x01")
        with pytest.raises(ValueError, match="truncated"):
            read_pgm(path)
