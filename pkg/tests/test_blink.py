import numpy as np
import pytest

from facepointer.blink import (
    BlinkEvent,
    Debouncer,
    EyeTemplate,
    EyeTrackState,
    FrameRing,
    MotionRegion,
    acquire_template,
    classify_voluntary,
    correlation_track,
    debounce,
    detect_blink,
    motion_pixel_count,
    update_eye_motion,
)
from facepointer.errors import InvalidInput, NotReady
from facepointer.images import GrayImage, Rect

PERIOD = 1000.0 / 30.0


def window_walk_oracle(signals, window):
    """Walk the blink-length rule directly: open, absorb, close, repeat."""
    events = []
    i = 0
    n = len(signals)
    while i < n:
        if signals[i]:
            end = i
            for j in range(i + 1, min(i + window, n)):
                if signals[j]:
                    end = j
            events.append((i, end))
            i = i + window
        else:
            i += 1
    return events


def signals_from_frames(true_frames, length):
    out = [False] * length
    for f in true_frames:
        out[f] = True
    return out


def still_state(frames_still=10, position=(0, 0)):
    return EyeTrackState(position, 1.0, False, frames_still)


class TestMotionPixelCount:
    def region(self, x=0, y=0, w=8, h=8, threshold=15):
        return MotionRegion(Rect(x, y, w, h), threshold)

    def test_identical_frames(self):
        img = GrayImage(np.full((8, 8), 77, dtype=np.uint8))
        assert motion_pixel_count(img, img, self.region()) == 0

    def test_single_pixel_over_threshold(self):
        a = np.full((8, 8), 100, dtype=np.uint8)
        b = a.copy()
        b[3, 4] = 100 + 16  # threshold 15, delta 16
        assert motion_pixel_count(GrayImage(b), GrayImage(a), self.region()) == 1

    def test_exact_threshold_not_counted(self):
        a = np.full((8, 8), 100, dtype=np.uint8)
        b = a.copy()
        b[3, 4] = 115
        assert motion_pixel_count(GrayImage(b), GrayImage(a), self.region()) == 0

    def test_matches_naive_loop(self):
        rng = np.random.default_rng(14)
        for _ in range(30):
            h, w = int(rng.integers(4, 33)), int(rng.integers(4, 33))
            a = rng.integers(0, 256, size=(h, w), dtype=np.uint8)
            b = rng.integers(0, 256, size=(h, w), dtype=np.uint8)
            rw, rh = int(rng.integers(1, w + 1)), int(rng.integers(1, h + 1))
            rx, ry = int(rng.integers(0, w - rw + 1)), int(rng.integers(0, h - rh + 1))
            region = MotionRegion(Rect(rx, ry, rw, rh), 15)
            expect = 0
            for y in range(ry, ry + rh):
                for x in range(rx, rx + rw):
                    if abs(int(a[y, x]) - int(b[y, x])) > 15:
                        expect += 1
            assert motion_pixel_count(GrayImage(a), GrayImage(b), region) == expect

    def test_dimension_mismatch(self):
        a = GrayImage(np.zeros((8, 8), dtype=np.uint8))
        b = GrayImage(np.zeros((8, 9), dtype=np.uint8))
        with pytest.raises(InvalidInput):
            motion_pixel_count(a, b, self.region())


class TestEyeMotion:
    def test_still_frames_accumulate(self):
        state = EyeTrackState((0, 0), 1.0, False, 0)
        for _ in range(5):
            state = update_eye_motion(state, (0, 0), 1.5)
        assert state.frames_still == 5
        assert not state.moving

    def test_movement_resets(self):
        state = update_eye_motion(still_state(7), (3, 0), 1.5)
        assert state.moving
        assert state.frames_still == 0

    def test_alternating_never_exceeds_one(self):
        state = EyeTrackState((0, 0), 1.0, False, 0)
        peak = 0
        for i in range(10):
            disp = (3, 0) if i % 2 == 0 else (0, 0)
            state = update_eye_motion(state, disp, 1.5)
            peak = max(peak, state.frames_still)
        assert peak == 1


class TestDetectBlink:
    def test_fires_when_still(self):
        assert detect_blink(50, still_state(10), 40, 3) is True

    def test_blocked_while_moving(self):
        moving = EyeTrackState((0, 0), 1.0, True, 0)
        assert detect_blink(50, moving, 40, 3) is False

    def test_strict_count_threshold(self):
        assert detect_blink(40, still_state(10), 40, 3) is False

    def test_needs_minimum_stillness(self):
        assert detect_blink(50, still_state(2), 40, 3) is False


class TestDebounce:
    def events(self, true_frames, window, length=40):
        evs = debounce(signals_from_frames(true_frames, length), window)
        return [(e.start_frame, e.end_frame) for e in evs]

    def test_absorbs_within_window(self):
        assert self.events([10, 12], 5) == [(10, 12)]

    def test_separate_windows(self):
        assert self.events([10, 20], 5) == [(10, 10), (20, 20)]

    def test_dense_run_splits_at_window(self):
        assert self.events([10, 11, 12, 13, 14, 15], 5) == [(10, 14), (15, 15)]

    def test_duration_from_frame_period(self):
        (event,) = debounce(signals_from_frames([3, 5], 10), 5, frame_period_ms=PERIOD)
        assert event.duration_ms == pytest.approx(3 * PERIOD)

    def test_matches_window_walk_oracle(self):
        rng = np.random.default_rng(71)
        for _ in range(300):
            n = int(rng.integers(1, 80))
            window = int(rng.integers(1, 12))
            signals = (rng.random(n) < 0.3).tolist()
            got = [(e.start_frame, e.end_frame) for e in debounce(signals, window)]
            assert got == window_walk_oracle(signals, window)

    def test_every_true_frame_in_exactly_one_window(self):
        rng = np.random.default_rng(72)
        for _ in range(100):
            n = int(rng.integers(1, 60))
            window = int(rng.integers(1, 10))
            signals = (rng.random(n) < 0.4).tolist()
            events = debounce(signals, window)
            spans = [(e.start_frame, e.start_frame + window - 1) for e in events]
            for f in range(n):
                if signals[f]:
                    assert sum(lo <= f <= hi for lo, hi in spans) == 1
            # events never overlap and stay ordered
            for (a, b), (c, d) in zip(spans, spans[1:]):
                assert c > b

    def test_streaming_matches_batch(self):
        rng = np.random.default_rng(73)
        signals = (rng.random(50) < 0.35).tolist()
        deb = Debouncer(6)
        spans = []
        for frame, s in enumerate(signals):
            done = deb.push(frame, s)
            if done:
                spans.append(done)
        tail = deb.flush()
        if tail:
            spans.append(tail)
        assert spans == [(e.start_frame, e.end_frame) for e in debounce(signals, 6)]


class TestClassifyVoluntary:
    def event(self, duration_ms):
        frames = max(1, round(duration_ms / PERIOD))
        return BlinkEvent("left", 10, 10 + frames - 1, duration_ms, False)

    def test_long_blink_voluntary(self):
        assert classify_voluntary(self.event(400.0), 250.0).voluntary

    def test_short_blink_involuntary(self):
        assert not classify_voluntary(self.event(100.0), 250.0).voluntary

    def test_boundary_is_voluntary(self):
        assert classify_voluntary(self.event(250.0), 250.0).voluntary

    def test_monotone_in_duration(self):
        durations = [PERIOD * k for k in range(1, 20)]
        flags = [classify_voluntary(self.event(d), 250.0).voluntary for d in durations]
        assert flags == sorted(flags)


def frame_of(value, pattern=None, at=None, size=(48, 64)):
    pix = np.full(size, value, dtype=np.uint8)
    if pattern is not None:
        h, w = pattern.shape
        x, y = at
        pix[y - h // 2:y - h // 2 + h, x - w // 2:x - w // 2 + w] = pattern
    return GrayImage(pix)


class TestAcquireTemplate:
    def test_scripted_sequence(self):
        rng = np.random.default_rng(80)
        open_eye = rng.integers(0, 256, size=(9, 9), dtype=np.uint8)
        ring = FrameRing(16)
        for idx in range(12):
            if idx <= 5:
                ring.push(idx, frame_of(60))          # blink frames
            else:
                ring.push(idx, frame_of(60, open_eye, (20, 20)))
        event = BlinkEvent("left", 3, 5, 3 * PERIOD, False)
        tmpl = acquire_template(ring, event, (20, 20), 9, margin_frames=3)
        assert np.array_equal(tmpl.patch, open_eye)
        assert tmpl.frame_index == 8
        assert (tmpl.variance == 1.0).all()  # identical post frames, floored

    def test_variance_across_post_frames(self):
        ring = FrameRing(16)
        for idx, v in enumerate([50, 50, 50, 80, 120, 80]):
            ring.push(idx, frame_of(v))
        event = BlinkEvent("left", 1, 2, 2 * PERIOD, False)
        tmpl = acquire_template(ring, event, (20, 20), 5, margin_frames=3)
        expect = np.var([80.0, 120.0, 80.0])
        assert tmpl.variance[0, 0] == pytest.approx(expect)

    def test_not_ready_without_post_frames(self):
        ring = FrameRing(16)
        for idx in range(6):
            ring.push(idx, frame_of(60))
        event = BlinkEvent("left", 3, 5, 3 * PERIOD, False)
        with pytest.raises(NotReady):
            acquire_template(ring, event, (20, 20), 9, margin_frames=3)

    def test_evicted_frames_not_ready(self):
        ring = FrameRing(4)
        for idx in range(12):
            ring.push(idx, frame_of(60))
        event = BlinkEvent("left", 1, 2, 2 * PERIOD, False)
        with pytest.raises(NotReady):
            acquire_template(ring, event, (20, 20), 5, margin_frames=3)


class TestCorrelationTrack:
    def make_template(self, seed=81):
        rng = np.random.default_rng(seed)
        patch = rng.integers(0, 256, size=(11, 11), dtype=np.uint8)
        return patch, EyeTemplate(patch, np.ones((11, 11)), 0)

    def test_acquisition_frame_scores_one(self):
        patch, tmpl = self.make_template()
        frame = frame_of(90, patch, (30, 25))
        prev = EyeTrackState((30, 25), 1.0, False, 4)
        state = correlation_track(frame, tmpl, prev, search_radius=11)
        assert state.position == (30, 25)
        assert state.correlation == pytest.approx(1.0, abs=1e-6)
        assert not state.moving
        assert state.frames_still == 5

    def test_translated_eye(self):
        patch, tmpl = self.make_template()
        frame = frame_of(90, patch, (32, 26))
        prev = EyeTrackState((30, 25), 1.0, False, 4)
        state = correlation_track(frame, tmpl, prev, search_radius=11)
        assert state.position == (32, 26)
        assert state.correlation == pytest.approx(1.0, abs=1e-6)
        assert state.moving
        assert state.frames_still == 0

    def test_noise_frame_scores_low(self):
        _, tmpl = self.make_template()
        rng = np.random.default_rng(82)
        noise = GrayImage(rng.integers(0, 256, size=(48, 64), dtype=np.uint8))
        prev = EyeTrackState((30, 25), 1.0, False, 4)
        state = correlation_track(noise, tmpl, prev, search_radius=11)
        assert state.correlation < 0.4

    def test_window_too_small(self):
        _, tmpl = self.make_template()
        tiny = GrayImage(np.zeros((8, 8), dtype=np.uint8))
        prev = EyeTrackState((4, 4), 1.0, False, 0)
        with pytest.raises(InvalidInput):
            correlation_track(tiny, tmpl, prev, search_radius=3)


class TestTemplateInvariants:
    def test_even_patch_rejected(self):
        with pytest.raises(InvalidInput):
            EyeTemplate(np.zeros((8, 8), dtype=np.uint8), np.ones((8, 8)), 0)

    def test_unfloored_variance_rejected(self):
        with pytest.raises(InvalidInput):
            EyeTemplate(np.zeros((9, 9), dtype=np.uint8), np.full((9, 9), 0.5), 0)
