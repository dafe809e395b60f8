import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from facepointer.errors import DegeneratePatch, InvalidInput
from facepointer.images import (
    GrayImage,
    Rect,
    extract_patch,
    integral_image,
    normalize_patch,
    read_pgm,
    rect_sum,
    resample_nearest,
    to_grayscale,
    write_pgm,
)


def naive_integral(pixels: np.ndarray) -> np.ndarray:
    """Brute-force double summation, one slice-sum per output pixel."""
    h, w = pixels.shape
    out = np.zeros((h, w), dtype=np.int64)
    for y in range(h):
        for x in range(w):
            out[y, x] = int(pixels[: y + 1, : x + 1].sum())
    return out


def naive_rect_sum(pixels: np.ndarray, r: Rect) -> int:
    total = 0
    for y in range(r.y, r.y2):
        for x in range(r.x, r.x2):
            total += int(pixels[y, x])
    return total


def random_image(rng, max_side=64) -> GrayImage:
    w = int(rng.integers(1, max_side + 1))
    h = int(rng.integers(1, max_side + 1))
    return GrayImage(rng.integers(0, 256, size=(h, w), dtype=np.uint8))


class TestGrayscale:
    def test_white(self):
        img = to_grayscale(bytes([255, 255, 255]), 1, 1)
        assert img.pixels[0, 0] == 255

    def test_black(self):
        img = to_grayscale(bytes([0, 0, 0]), 1, 1)
        assert img.pixels[0, 0] == 0

    def test_pure_red(self):
        # round(0.299 * 255) = 76
        img = to_grayscale(bytes([255, 0, 0]), 1, 1)
        assert img.pixels[0, 0] == 76

    def test_length_mismatch(self):
        with pytest.raises(InvalidInput):
            to_grayscale(bytes([1, 2, 3, 4]), 2, 1)

    def test_matches_weighted_sum(self):
        rng = np.random.default_rng(7)
        buf = rng.integers(0, 256, size=5 * 4 * 3, dtype=np.uint8)
        img = to_grayscale(buf.tobytes(), 5, 4)
        ref = buf.reshape(4, 5, 3).astype(float)
        expect = np.round(0.299 * ref[:, :, 0] + 0.587 * ref[:, :, 1] + 0.114 * ref[:, :, 2])
        assert np.array_equal(img.pixels, expect.astype(np.uint8))


class TestIntegralImage:
    def test_two_by_two(self):
        img = GrayImage(np.array([[1, 2], [3, 4]], dtype=np.uint8))
        ii = integral_image(img)
        assert np.array_equal(ii.values, [[1, 3], [4, 10]])

    def test_all_zero(self):
        ii = integral_image(GrayImage(np.zeros((8, 8), dtype=np.uint8)))
        assert not ii.values.any()

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1234)
        for _ in range(100):
            img = random_image(rng)
            ii = integral_image(img)
            assert np.array_equal(ii.values, naive_integral(img.pixels))

    def test_total_in_corner(self):
        rng = np.random.default_rng(5)
        img = random_image(rng)
        ii = integral_image(img)
        assert ii.values[-1, -1] == int(img.pixels.sum())

    def test_monotone_in_source(self):
        rng = np.random.default_rng(6)
        pix = rng.integers(0, 200, size=(12, 9), dtype=np.uint8)
        base = integral_image(GrayImage(pix)).values
        bumped = pix.copy()
        bumped[4, 3] += 50
        after = integral_image(GrayImage(bumped)).values
        assert (after >= base).all()
        assert after[4, 3] == base[4, 3] + 50


class TestRectSum:
    def test_full_image(self):
        ii = integral_image(GrayImage(np.array([[1, 2], [3, 4]], dtype=np.uint8)))
        assert rect_sum(ii, Rect(0, 0, 2, 2)) == 10

    def test_single_pixel(self):
        ii = integral_image(GrayImage(np.array([[1, 2], [3, 4]], dtype=np.uint8)))
        assert rect_sum(ii, Rect(1, 1, 1, 1)) == 4

    def test_out_of_bounds(self):
        ii = integral_image(GrayImage(np.zeros((4, 4), dtype=np.uint8)))
        with pytest.raises(InvalidInput):
            rect_sum(ii, Rect(2, 2, 3, 1))

    def test_matches_naive_loop(self):
        rng = np.random.default_rng(99)
        for _ in range(25):
            img = random_image(rng, max_side=32)
            ii = integral_image(img)
            for _ in range(40):
                w = int(rng.integers(1, img.width + 1))
                h = int(rng.integers(1, img.height + 1))
                x = int(rng.integers(0, img.width - w + 1))
                y = int(rng.integers(0, img.height - h + 1))
                r = Rect(x, y, w, h)
                assert rect_sum(ii, r) == naive_rect_sum(img.pixels, r)

    @given(st.data())
    @settings(max_examples=60, deadline=None)
    def test_rect_sum_property(self, data):
        w = data.draw(st.integers(1, 20))
        h = data.draw(st.integers(1, 20))
        pix = np.array(
            data.draw(st.lists(st.integers(0, 255), min_size=w * h, max_size=w * h)),
            dtype=np.uint8,
        ).reshape(h, w)
        rw = data.draw(st.integers(1, w))
        rh = data.draw(st.integers(1, h))
        rx = data.draw(st.integers(0, w - rw))
        ry = data.draw(st.integers(0, h - rh))
        r = Rect(rx, ry, rw, rh)
        ii = integral_image(GrayImage(pix))
        assert rect_sum(ii, r) == int(pix[ry:ry + rh, rx:rx + rw].sum())


class TestNormalizePatch:
    def test_two_pixel_patch(self):
        out = normalize_patch(np.array([[0.0, 255.0]]))
        assert np.allclose(out.data, [[64.0, 192.0]])

    def test_invariants(self):
        rng = np.random.default_rng(3)
        out = normalize_patch(rng.integers(0, 256, size=(8, 8)).astype(float))
        assert abs(out.data.mean() - 128.0) < 1e-6
        assert abs(out.data.std() - 64.0) < 1e-6

    def test_idempotent(self):
        rng = np.random.default_rng(4)
        once = normalize_patch(rng.integers(0, 256, size=(6, 7)).astype(float))
        twice = normalize_patch(once.data)
        assert np.allclose(once.data, twice.data, atol=1e-9)

    def test_zero_variance(self):
        with pytest.raises(DegeneratePatch):
            normalize_patch(np.full((2, 2), 50.0))

    def test_too_small(self):
        with pytest.raises(InvalidInput):
            normalize_patch(np.array([[5.0]]))


class TestPatchOps:
    def test_extract_patch(self):
        img = GrayImage(np.arange(20, dtype=np.uint8).reshape(4, 5))
        patch = extract_patch(img, Rect(1, 2, 3, 2))
        assert np.array_equal(patch, [[11, 12, 13], [16, 17, 18]])

    def test_resample_identity(self):
        rng = np.random.default_rng(8)
        pix = rng.integers(0, 256, size=(10, 14), dtype=np.uint8)
        assert np.array_equal(resample_nearest(pix, 14, 10), pix)

    def test_resample_downscale_2x(self):
        pix = np.repeat(np.repeat(np.arange(6, dtype=np.uint8).reshape(2, 3), 2, axis=0), 2, axis=1)
        assert np.array_equal(resample_nearest(pix, 3, 2), np.arange(6, dtype=np.uint8).reshape(2, 3))


class TestPgmIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(11)
        img = random_image(rng)
        path = tmp_path / "frame.pgm"
        write_pgm(img, path)
        back = read_pgm(path)
        assert np.array_equal(back.pixels, img.pixels)

    def test_comment_in_header(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# made by hand\n2 1\n255\n\x07\x09")
        img = read_pgm(path)
        assert np.array_equal(img.pixels, [[7, 9]])

    def test_rejects_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P2\n1 1\n255\n0")
        with pytest.raises(InvalidInput):
            read_pgm(path)
