"""Per-frame orchestration: detect or track, blink, point, emit events.

The session alternates between UNLOCKED (multi-scale face scan) and
LOCKED (nose template tracking plus per-eye motion/blink machinery).
Re-initialization returns to UNLOCKED when the eye correlation collapses
or the nose confidence stays low. Blink detection runs before eye
tracking each frame, and tracking pauses while a blink window is open:
a closing lid always decorrelates from the open-eye template, so the
score is only meaningful between blinks.

Given identical frames and config the event stream is byte-identical;
the metrics clock is injectable and defaults to the frame counter, so
wall-clock noise stays out of the log unless explicitly requested.
"""

from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .blink import (
    BlinkEvent,
    Debouncer,
    EyeTrackState,
    FrameRing,
    MotionRegion,
    acquire_template,
    classify_voluntary,
    correlation_track,
    detect_blink,
    motion_pixel_count,
    update_eye_motion,
)
from .config import PipelineConfig
from .errors import InvalidInput, NotReady
from .events import EventRecord
from .hough import eyebrow_line, eyebrow_region, hough_lines, sobel_edges
from .images import GrayImage, Rect, read_image
from .nose import analyze_roi, build_roi, make_nose_template, track_nose
from .pointer import NoseSmoother, blink_to_click, calibrate, initial_pointer, update_pointer
from .ssr import BteDetection, load_template, multiscale_scan

log = logging.getLogger(__name__)


class FpsMeter:
    """Frames per second over a rolling window of frame intervals."""

    def __init__(self, window: int = 60):
        self._times: deque[float] = deque(maxlen=window + 1)

    def record(self, timestamp: float) -> None:
        self._times.append(timestamp)

    def fps(self) -> float:
        if len(self._times) < 2:
            raise NotReady("need at least two frame timestamps")
        elapsed = self._times[-1] - self._times[0]
        if elapsed <= 0:
            raise NotReady("clock did not advance")
        return (len(self._times) - 1) / elapsed


def _odd(n: int) -> int:
    return n if n % 2 else n + 1


class _EyeChannel:
    """Tracking, blink windowing, and template state for one eye."""

    def __init__(self, side: str, position: tuple[int, int], cfg: PipelineConfig):
        self.side = side
        self.cfg = cfg
        self.position = position
        self.anchor = position  # detection-time position, for nose-anchored tracking
        self.state = EyeTrackState(position, 1.0, False, 0)
        self.template = None
        self.debouncer = Debouncer(cfg.motion.blink_window_frames)
        self.signal_frames: deque[int] = deque(maxlen=64)
        self.pending_acquisition: BlinkEvent | None = None
        self.low_correlation_run = 0

    def box(self, frame_w: int, frame_h: int, iod: float) -> Rect:
        side = _odd(max(9, round(iod * self.cfg.motion.eye_box_scale)))
        half = side // 2
        x0 = min(max(self.position[0] - half, 0), max(frame_w - side, 0))
        y0 = min(max(self.position[1] - half, 0), max(frame_h - side, 0))
        return Rect(x0, y0, min(side, frame_w), min(side, frame_h))

    def window_open(self) -> bool:
        return self.debouncer.open_start is not None

    def overlaps_signal(self, start: int, end: int) -> bool:
        if any(start <= f <= end for f in self.signal_frames):
            return True
        open_start = self.debouncer.open_start
        return open_start is not None and open_start <= end


@dataclass
class _FaceLock:
    detection: BteDetection
    tip: tuple[int, int]
    initial_tip: tuple[int, int]
    nose_template: object
    nose_confidence: float
    low_confidence_run: int
    eyebrows: list  # [(theta, rho) or None] per eye
    nose_still_frames: int = 0


@dataclass(frozen=True)
class RunSummary:
    frames: int
    skipped: int
    events: int
    elapsed_s: float

    @property
    def wall_fps(self) -> float:
        return self.frames / self.elapsed_s if self.elapsed_s > 0 else 0.0


class PipelineSession:
    """One user session: feed frames in order, collect events per frame."""

    def __init__(
        self,
        cfg: PipelineConfig,
        clock: Callable[[], float] | None = None,
        debug: bool = False,
    ):
        self.cfg = cfg
        self.clock = clock
        self.debug = debug
        if cfg.ssr.template_path:
            self.template = load_template(cfg.ssr.template_path)
        else:
            from .fixtures import default_bte_template

            self.template = default_bte_template()
        self.reset()

    def reset(self) -> None:
        self.frame_index = 0
        self.lock: _FaceLock | None = None
        self.channels: dict[str, _EyeChannel] = {}
        self.calibration = None
        self.pointer = None
        self.smoother = NoseSmoother(self.cfg.pointer.smoothing_alpha)
        self.ring = FrameRing(self.cfg.motion.ring_frames)
        self.prev_frame: GrayImage | None = None
        self.meter = FpsMeter()
        self.last_events: list[EventRecord] = []
        self.debug_state: dict = {}

    def update_config(self, cfg: PipelineConfig) -> None:
        """Swap tunables mid-session; tracking state carries over."""
        self.cfg = cfg
        self.smoother.alpha = cfg.pointer.smoothing_alpha
        if self.pointer is not None:
            self.pointer = replace(
                self.pointer,
                gain=cfg.pointer.gain,
                mode=cfg.pointer.mode,
                mirror_x=cfg.pointer.mirror_x,
                dead_zone_px=cfg.pointer.dead_zone_px,
            )
        for channel in self.channels.values():
            channel.cfg = cfg

    @property
    def calibrated(self) -> bool:
        return self.calibration is not None

    def eye_templates(self) -> dict[str, bool]:
        return {side: ch.template is not None for side, ch in self.channels.items()}

    # -- per-frame processing ------------------------------------------------

    def process(self, frame: GrayImage) -> list[EventRecord]:
        idx = self.frame_index
        self.frame_index += 1
        self.ring.push(idx, frame)
        events: list[EventRecord] = []

        if self.lock is None:
            self._detect(frame, idx, events)
        else:
            self._track(frame, idx, events)

        if self.pointer is not None and self.lock is not None:
            events.append(EventRecord(idx, "pointer", {"x": self.pointer.x, "y": self.pointer.y}))

        if self.clock is not None:
            self.meter.record(self.clock())
        else:
            self.meter.record(idx / self.cfg.frame_rate)
        if idx % 30 == 29:
            try:
                events.append(EventRecord(idx, "metrics", {"fps": round(self.meter.fps(), 3)}))
            except NotReady:
                pass

        self.prev_frame = frame
        self.last_events = events
        return events

    def _detect(self, frame: GrayImage, idx: int, events: list[EventRecord]) -> None:
        det = multiscale_scan(
            frame, self.cfg.ssr.geometries(), self.template, self.cfg.ssr.accept_threshold
        )
        if det is None:
            return
        try:
            roi = build_roi(det.left_eye, det.right_eye, frame.width, frame.height)
            analysis = analyze_roi(frame, roi, self.cfg.nose.s2_width)
        except InvalidInput:
            return
        tip = (analysis.tip.x, analysis.tip.y)
        nose_tmpl = make_nose_template(frame, tip, self.cfg.nose.template_size, idx)
        if nose_tmpl is None:
            return

        eyebrows = self._eyebrows(frame, det)
        self.lock = _FaceLock(det, tip, tip, nose_tmpl, analysis.tip.confidence, 0, eyebrows)
        image_left, image_right = det.left_eye, det.right_eye
        if self.cfg.motion.mirror_sides:
            sides = {"left": image_right, "right": image_left}
        else:
            sides = {"left": image_left, "right": image_right}
        self.channels = {
            side: _EyeChannel(side, pos, self.cfg) for side, pos in sides.items()
        }
        if self.calibration is None:
            self.calibration = calibrate(tip, self.cfg.pointer.screen_width, self.cfg.pointer.screen_height)
            self.pointer = initial_pointer(
                self.calibration,
                self.cfg.pointer.screen_width,
                self.cfg.pointer.screen_height,
                self.cfg.pointer.gain,
                self.cfg.pointer.mode,
                self.cfg.pointer.mirror_x,
                self.cfg.pointer.dead_zone_px,
            )
        self.smoother.reset()

        events.append(EventRecord(idx, "face", {
            "bte": [det.bte[0], det.bte[1]],
            "left_eye": list(det.left_eye),
            "right_eye": list(det.right_eye),
            "score": round(det.score, 3),
            "filter_w": det.scale.w,
            "filter_h": det.scale.h,
        }))
        events.append(EventRecord(idx, "nose", {
            "tip": [tip[0], tip[1]],
            "confidence": round(analysis.tip.confidence, 4),
        }))
        self._update_pointer_from_tip(tip)
        if self.debug:
            from .images import integral_image
            from .ssr import scan_candidates

            mask = scan_candidates(integral_image(frame), det.scale)
            ys, xs = np.nonzero(mask.bits)
            self.debug_state = {
                "roi": roi.rect,
                "nbp_cols": analysis.nbp_cols.tolist(),
                "nostril_row": analysis.nostril_row,
                "candidates": list(zip(xs[:4000].tolist(), ys[:4000].tolist())),
            }

    def _eyebrows(self, frame: GrayImage, det: BteDetection) -> list:
        iod = float(np.hypot(det.right_eye[0] - det.left_eye[0], det.right_eye[1] - det.left_eye[1]))
        lines = []
        for eye in (det.left_eye, det.right_eye):
            region = eyebrow_region(eye, iod, frame.width, frame.height)
            if region is None:
                lines.append(None)
                continue
            try:
                edges = sobel_edges(frame, region, magnitude_threshold=160)
                found = hough_lines(edges)
                lines.append(eyebrow_line(found) if found else None)
            except InvalidInput:
                lines.append(None)
        return lines

    def _unlock(self, idx: int, reason: str, events: list[EventRecord]) -> None:
        events.append(EventRecord(idx, "reinit", {"reason": reason}))
        self.lock = None
        self.channels = {}

    def _track(self, frame: GrayImage, idx: int, events: list[EventRecord]) -> None:
        lock = self.lock
        nose = track_nose(frame, lock.nose_template, lock.tip)
        tip_delta = (nose.x - lock.tip[0], nose.y - lock.tip[1])
        if np.hypot(*tip_delta) > self.cfg.motion.move_eps:
            lock.nose_still_frames = 0
        else:
            lock.nose_still_frames += 1
        lock.tip = (nose.x, nose.y)
        lock.nose_confidence = nose.confidence
        if nose.confidence < self.cfg.nose.min_confidence:
            lock.low_confidence_run += 1
        else:
            lock.low_confidence_run = 0
        if lock.low_confidence_run >= self.cfg.nose.lost_frames:
            self._unlock(idx, "nose-confidence", events)
            return

        events.append(EventRecord(idx, "nose", {
            "tip": [nose.x, nose.y],
            "confidence": round(nose.confidence, 4),
        }))

        det = lock.detection
        iod = float(np.hypot(det.right_eye[0] - det.left_eye[0], det.right_eye[1] - det.left_eye[1]))
        completed: list[tuple[BlinkEvent, _EyeChannel]] = []
        reinit = False
        for side in sorted(self.channels):
            channel = self.channels[side]
            # 1) blink detection at the last known eye location
            count = 0
            if self.prev_frame is not None:
                region = MotionRegion(
                    channel.box(frame.width, frame.height, iod),
                    self.cfg.motion.pixel_threshold,
                )
                count = motion_pixel_count(frame, self.prev_frame, region)
                count_threshold = int(region.region.w * region.region.h * self.cfg.motion.count_fraction)
                # a click gesture is move, stop, then blink: the nose is the
                # authority on face stillness and, unlike the per-eye state,
                # is already up to date for this frame
                face_still = lock.nose_still_frames >= self.cfg.motion.min_still_frames
                signal = face_still and detect_blink(
                    count, channel.state, count_threshold, self.cfg.motion.min_still_frames
                )
            else:
                signal = False
            if signal:
                channel.signal_frames.append(idx)
            done = channel.debouncer.push(idx, signal)
            if done:
                start, end = done
                duration = (end - start + 1) * self.cfg.frame_period_ms
                event = classify_voluntary(
                    BlinkEvent(side, start, end, duration, False),
                    self.cfg.motion.voluntary_min_ms,
                )
                completed.append((event, channel))

            # 2) eye relocation, paused while a blink window is open
            if channel.window_open():
                channel.state = update_eye_motion(channel.state, (0.0, 0.0), self.cfg.motion.move_eps)
            elif channel.template is not None:
                radius = self.cfg.motion.search_radius or self.cfg.motion.eye_template_size
                try:
                    channel.state = correlation_track(
                        frame, channel.template, channel.state, radius, self.cfg.motion.move_eps
                    )
                    channel.position = channel.state.position
                except InvalidInput:
                    channel.state = replace(channel.state, correlation=-1.0)
                # an unguarded blink dips the score for its own length;
                # only a sustained collapse means the eye is lost
                if channel.state.correlation < self.cfg.motion.reinit_threshold:
                    channel.low_correlation_run += 1
                else:
                    channel.low_correlation_run = 0
                if channel.low_correlation_run >= self.cfg.motion.reinit_patience_frames:
                    reinit = True
            else:
                moved = (
                    lock.tip[0] - lock.initial_tip[0] + channel.anchor[0] - channel.position[0],
                    lock.tip[1] - lock.initial_tip[1] + channel.anchor[1] - channel.position[1],
                )
                channel.position = (channel.position[0] + moved[0], channel.position[1] + moved[1])
                channel.state = update_eye_motion(
                    replace(channel.state, position=channel.position), moved, self.cfg.motion.move_eps
                )

        # 3) classify completed blinks, fire clicks, schedule acquisition
        for event, channel in sorted(completed, key=lambda pair: (pair[0].start_frame, pair[0].side)):
            other = next(ch for s, ch in self.channels.items() if ch is not channel)
            paired = other.overlaps_signal(event.start_frame, event.end_frame)
            if paired:
                event = replace(event, voluntary=False)
            events.append(EventRecord(idx, "blink", {
                "side": event.side,
                "start": event.start_frame,
                "end": event.end_frame,
                "duration_ms": round(event.duration_ms, 3),
                "voluntary": event.voluntary,
                "paired": paired,
            }))
            if event.voluntary:
                click = blink_to_click(event, idx)
                if click is not None:
                    events.append(EventRecord(idx, "click", {"button": click.button}))
            else:
                channel.pending_acquisition = event

        # 4) template acquisition once the post-blink frames exist
        for side in sorted(self.channels):
            channel = self.channels[side]
            event = channel.pending_acquisition
            if event is None:
                continue
            if idx < event.end_frame + self.cfg.motion.template_margin_frames:
                continue
            try:
                channel.template = acquire_template(
                    self.ring, event, channel.position,
                    self.cfg.motion.eye_template_size,
                    self.cfg.motion.template_margin_frames,
                )
                channel.state = EyeTrackState(channel.position, 1.0, False, channel.state.frames_still)
            except (NotReady, InvalidInput):
                pass
            channel.pending_acquisition = None

        if reinit:
            self._unlock(idx, "eye-correlation", events)
            return

        self._update_pointer_from_tip(lock.tip)

    def _update_pointer_from_tip(self, tip: tuple[int, int]) -> None:
        if self.calibration is None or self.pointer is None:
            return
        smoothed = self.smoother.push(tip)
        self.pointer = update_pointer(self.pointer, self.calibration, smoothed)

    # -- state for the live service and overlay -------------------------------

    def snapshot(self) -> dict:
        """JSON-ready state mirror of the latest processed frame."""
        frame_events = [
            {"kind": e.kind, "frame": e.frame, **e.payload} for e in self.last_events
        ]
        state = {
            "v": 1,
            "frame": self.frame_index - 1,
            "calibrated": self.calibrated,
            "locked": self.lock is not None,
            "templates": self.eye_templates(),
            "face": None,
            "nose": None,
            "pointer": None,
            "fps": None,
            "events": [e for e in frame_events if e["kind"] in ("blink", "click", "reinit")],
            "frame_events": frame_events,
        }
        if self.lock is not None:
            det = self.lock.detection
            state["face"] = {
                "bte": [det.bte[0], det.bte[1]],
                "left_eye": list(det.left_eye),
                "right_eye": list(det.right_eye),
            }
            state["nose"] = {
                "tip": [self.lock.tip[0], self.lock.tip[1]],
                "confidence": round(self.lock.nose_confidence, 4),
            }
        if self.pointer is not None and self.lock is not None:
            state["pointer"] = {
                "x": self.pointer.x,
                "y": self.pointer.y,
                "screen_w": self.pointer.screen_w,
                "screen_h": self.pointer.screen_h,
            }
        try:
            state["fps"] = round(self.meter.fps(), 3)
        except NotReady:
            pass
        return state


def iter_frame_files(frames_dir: str | Path) -> list[Path]:
    """Frame files in lexicographic byte order of their names."""
    root = Path(frames_dir)
    files = [p for p in root.iterdir() if p.suffix.lower() in (".pgm", ".png")]
    return sorted(files, key=lambda p: p.name.encode())


def run_pipeline(
    source: Iterable[GrayImage] | str | Path,
    cfg: PipelineConfig,
    sinks: list[Callable[[EventRecord], None]] | None = None,
    clock: Callable[[], float] | None = None,
    overlay_dir: str | Path | None = None,
    session: PipelineSession | None = None,
) -> RunSummary:
    """Drive a session over recorded frames; deterministic by default."""
    if session is None:
        session = PipelineSession(cfg, clock=clock, debug=overlay_dir is not None)
    sinks = sinks or []
    frames = 0
    skipped = 0
    emitted = 0
    started = time.perf_counter()

    if isinstance(source, (str, Path)):
        frame_iter = _directory_frames(source)
    else:
        frame_iter = ((None, f) for f in source)

    overlay = None
    if overlay_dir is not None:
        from .overlay import render_overlay

        Path(overlay_dir).mkdir(parents=True, exist_ok=True)
        overlay = render_overlay

    for name, frame in frame_iter:
        if frame is None:
            skipped += 1
            continue
        events = session.process(frame)
        frames += 1
        for record in events:
            emitted += 1
            for sink in sinks:
                sink(record)
        if overlay is not None:
            image = overlay(frame, session)
            image.save(Path(overlay_dir) / f"frame_{session.frame_index - 1:06d}.png")
    return RunSummary(frames, skipped, emitted, time.perf_counter() - started)


def _directory_frames(frames_dir: str | Path):
    for path in iter_frame_files(frames_dir):
        try:
            yield path.name, read_image(path)
        except (InvalidInput, OSError) as exc:
            log.warning("skipping unreadable frame %s: %s", path, exc)
            yield path.name, None
