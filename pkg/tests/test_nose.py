import numpy as np
import pytest

from facepointer.errors import InvalidInput
from facepointer.images import GrayImage, Rect
from facepointer.nose import (
    NoseRoi,
    NoseTemplate,
    analyze_roi,
    build_roi,
    horizontal_profile,
    locate_nose_tip,
    make_nose_template,
    nose_bridge_points,
    track_nose,
    vertical_profile,
)


def roi_image(pixels: np.ndarray, off_x=0, off_y=0, canvas=None):
    """Wrap ROI-sized pixel content into a frame at an offset."""
    h, w = pixels.shape
    if canvas is None:
        canvas = np.full((h + off_y + 10, w + off_x + 10), 0, dtype=np.uint8)
    canvas[off_y:off_y + h, off_x:off_x + w] = pixels
    roi = NoseRoi(Rect(off_x, off_y, w, h), (off_x, off_y), (off_x + w, off_y))
    return GrayImage(canvas), roi


def synthetic_nose_roi(side=48):
    """Bright bridge, graded tip blob at (24, 30), dark nostril band below."""
    pix = np.full((side, side), 150, dtype=np.uint8)
    pix[:, 22:27] = 200                       # bridge
    for r in range(26, 35):                   # tip: peak brightness at row 30
        pix[r, 21:28] = 250 - 10 * abs(r - 30)
    for r in range(36, 40):                   # nostril band: darkest at row 37
        pix[r, 18:31] = 30 + 15 * abs(r - 37)
    return pix, (24, 30)


class TestBuildRoi:
    def test_plain_square(self):
        roi = build_roi((100, 100), (160, 100), 320, 240)
        assert roi.rect == Rect(100, 100, 60, 60)

    def test_fits_near_border(self):
        roi = build_roi((10, 10), (20, 10), 64, 64)
        assert roi.rect == Rect(10, 10, 10, 10)

    def test_shrinks_to_fit(self):
        # side is capped by the image so the area stays maximal
        roi = build_roi((0, 0), (200, 0), 128, 128)
        assert roi.rect == Rect(0, 0, 128, 128)

    def test_degenerate_pair(self):
        with pytest.raises(InvalidInput):
            build_roi((50, 50), (50, 50), 100, 100)

    def test_too_close(self):
        with pytest.raises(InvalidInput):
            build_roi((50, 50), (55, 50), 100, 100)

    def test_swapped_eyes(self):
        with pytest.raises(InvalidInput):
            build_roi((60, 50), (40, 50), 100, 100)


class TestProfiles:
    def test_single_bright_column(self):
        pix = np.full((20, 20), 10, dtype=np.uint8)
        pix[:, 7] = 250
        img, roi = roi_image(pix)
        assert horizontal_profile(img, roi).argmax == 7

    def test_gaussian_blob_argmax(self):
        side = 30
        yy, xx = np.mgrid[0:side, 0:side]
        blob = 40 + 200 * np.exp(-((xx - 11) ** 2 + (yy - 17) ** 2) / 18.0)
        img, roi = roi_image(blob.astype(np.uint8))
        assert abs(horizontal_profile(img, roi).argmax - 11) <= 1
        assert abs(vertical_profile(img, roi).argmax - 17) <= 1

    def test_uniform_ties_to_smallest_index(self):
        img, roi = roi_image(np.full((12, 12), 99, dtype=np.uint8))
        assert horizontal_profile(img, roi).argmax == 0
        assert vertical_profile(img, roi).argmax == 0

    def test_matches_two_loop_oracle(self):
        rng = np.random.default_rng(5)
        pix = rng.integers(0, 256, size=(15, 13), dtype=np.uint8)
        img, roi = roi_image(pix, off_x=3, off_y=2)
        hp = horizontal_profile(img, roi)
        vp = vertical_profile(img, roi)
        for c in range(13):
            assert hp.values[c] == sum(int(pix[r, c]) for r in range(15))
        for r in range(15):
            assert vp.values[r] == sum(int(pix[r, c]) for c in range(13))

    def test_argmax_invariant_under_offset(self):
        rng = np.random.default_rng(6)
        pix = rng.integers(0, 180, size=(20, 20), dtype=np.uint8)
        img_a, roi = roi_image(pix.copy())
        img_b, _ = roi_image(pix + 70)
        assert horizontal_profile(img_a, roi).argmax == horizontal_profile(img_b, roi).argmax
        assert vertical_profile(img_a, roi).argmax == vertical_profile(img_b, roi).argmax


class TestNoseBridgePoints:
    def test_bright_stripe(self):
        pix = np.full((30, 40), 20, dtype=np.uint8)
        pix[:, 20:26] = 240
        img, roi = roi_image(pix)
        nbps = nose_bridge_points(img, roi, s2_width=4)
        assert len(nbps) == 30
        assert all(20 <= col <= 25 for _, col, _ in nbps)

    def test_tilted_stripe_monotone(self):
        pix = np.full((32, 40), 20, dtype=np.uint8)
        for r in range(32):
            c = 8 + r // 4
            pix[r, c:c + 5] = 240
        img, roi = roi_image(pix)
        cols = [col for _, col, _ in nose_bridge_points(img, roi, s2_width=5)]
        assert all(b >= a for a, b in zip(cols, cols[1:]))

    def test_single_row(self):
        pix = np.full((1, 10), 50, dtype=np.uint8)
        pix[0, 6] = 200
        img, roi = roi_image(pix)
        nbps = nose_bridge_points(img, roi, s2_width=3)
        assert len(nbps) == 1

    def test_matches_per_row_recompute_oracle(self):
        rng = np.random.default_rng(8)
        pix = rng.integers(0, 256, size=(18, 22), dtype=np.uint8)
        img, roi = roi_image(pix)
        s2 = 5
        nbps = nose_bridge_points(img, roi, s2_width=s2)
        acc = np.cumsum(pix.astype(np.int64), axis=0)
        for r, col, total in nbps:
            best_start, best_sum = 0, -1
            for start in range(22 - s2 + 1):
                s = int(acc[r, start:start + s2].sum())
                if s > best_sum:
                    best_start, best_sum = start, s
            assert col == best_start + s2 // 2
            assert total == best_sum

    def test_sector_width_bounds(self):
        img, roi = roi_image(np.zeros((10, 10), dtype=np.uint8))
        with pytest.raises(InvalidInput):
            nose_bridge_points(img, roi, s2_width=10)


class TestLocateNoseTip:
    def test_synthetic_fixture(self):
        pix, truth = synthetic_nose_roi()
        img, roi = roi_image(pix, off_x=12, off_y=7)
        tip = locate_nose_tip(img, roi, s2_width=6)
        assert abs(tip.x - (12 + truth[0])) <= 2
        assert abs(tip.y - (7 + truth[1])) <= 2
        assert tip.confidence > 0.5

    def test_analysis_reports_nostril_row(self):
        pix, _ = synthetic_nose_roi()
        img, roi = roi_image(pix)
        res = analyze_roi(img, roi, s2_width=6)
        assert res.fallback is False
        assert res.nostril_row is not None
        assert abs(res.nostril_row - 37) <= 2

    def test_flat_roi_falls_back(self):
        img, roi = roi_image(np.full((20, 20), 128, dtype=np.uint8))
        tip = locate_nose_tip(img, roi, s2_width=3)
        assert tip.confidence == 0.5
        assert (tip.x, tip.y) == (0, 0)  # profile argmax tie-break

    def test_all_dark_roi_falls_back(self):
        img, roi = roi_image(np.zeros((20, 20), dtype=np.uint8))
        tip = locate_nose_tip(img, roi, s2_width=3)
        assert tip.confidence == 0.5

    def test_translation_equivariant(self):
        pix, _ = synthetic_nose_roi()
        img_a, roi_a = roi_image(pix, off_x=0, off_y=0)
        img_b, roi_b = roi_image(pix, off_x=9, off_y=4)
        a = locate_nose_tip(img_a, roi_a, s2_width=6)
        b = locate_nose_tip(img_b, roi_b, s2_width=6)
        assert (b.x - a.x, b.y - a.y) == (9, 4)
        assert a.confidence == b.confidence

    def test_tiny_roi_rejected(self):
        img, roi = roi_image(np.zeros((3, 12), dtype=np.uint8))
        with pytest.raises(InvalidInput):
            locate_nose_tip(img, roi, s2_width=3)


class TestTrackNose:
    def frame_with_feature(self, at, seed=3):
        rng = np.random.default_rng(seed)
        pix = np.full((120, 160), 100, dtype=np.uint8)
        feature = rng.integers(0, 256, size=(15, 15), dtype=np.uint8)
        x, y = at
        pix[y - 7:y + 8, x - 7:x + 8] = feature
        return GrayImage(pix), feature

    def test_identity_frame(self):
        img, _ = self.frame_with_feature((60, 50))
        tmpl = make_nose_template(img, (60, 50), 15, frame_index=0)
        got = track_nose(img, tmpl, (60, 50))
        assert (got.x, got.y) == (60, 50)
        assert got.confidence == pytest.approx(1.0, abs=1e-9)

    def test_translated_frame(self):
        img_a, _ = self.frame_with_feature((60, 50))
        img_b, _ = self.frame_with_feature((63, 52))
        tmpl = make_nose_template(img_a, (60, 50), 15, frame_index=0)
        got = track_nose(img_b, tmpl, (60, 50))
        assert (got.x, got.y) == (63, 52)
        assert got.confidence == pytest.approx(1.0, abs=1e-6)

    def test_noise_frame_low_confidence(self):
        img_a, _ = self.frame_with_feature((60, 50))
        tmpl = make_nose_template(img_a, (60, 50), 15, frame_index=0)
        rng = np.random.default_rng(9)
        noise = GrayImage(rng.integers(0, 256, size=(120, 160), dtype=np.uint8))
        got = track_nose(noise, tmpl, (60, 50))
        assert got.confidence < 0.8  # ncc well below 0.6

    def test_search_region_too_small(self):
        img, _ = self.frame_with_feature((60, 50))
        tmpl = NoseTemplate(np.zeros((21, 21), dtype=np.uint8), 0)
        tiny = GrayImage(np.zeros((12, 12), dtype=np.uint8))
        with pytest.raises(InvalidInput):
            track_nose(tiny, tmpl, (6, 6))

    def test_template_must_be_odd(self):
        with pytest.raises(InvalidInput):
            NoseTemplate(np.zeros((14, 14), dtype=np.uint8), 0)

    def test_template_near_border_is_none(self):
        img, _ = self.frame_with_feature((60, 50))
        assert make_nose_template(img, (2, 2), 15, frame_index=0) is None
