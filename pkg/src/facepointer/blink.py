"""Motion-difference blink detection and online eye templates.

A blink is motion inside a still eye's region: the per-pixel frame
difference count crosses a threshold while the tracked eye itself is not
moving. Raw signals are debounced over the user-set blink length,
classified voluntary by duration, and involuntary blinks feed template
acquisition (the open-eye patch a few frames after the lid settles, plus
its per-pixel variance). Correlation against that template tracks the eye
and triggers re-initialization when the score collapses.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .errors import InvalidInput, NotReady
from .images import GrayImage, Rect, extract_patch
from .matching import best_match


@dataclass(frozen=True)
class MotionRegion:
    region: Rect
    pixel_threshold: int

    def __post_init__(self):
        if not 1 <= self.pixel_threshold <= 255:
            raise InvalidInput(f"pixel threshold must be in [1, 255], got {self.pixel_threshold}")


@dataclass(frozen=True)
class BlinkEvent:
    side: str                 # "left" | "right"
    start_frame: int
    end_frame: int
    duration_ms: float
    voluntary: bool

    def __post_init__(self):
        if self.end_frame < self.start_frame:
            raise InvalidInput("blink event ends before it starts")


@dataclass(frozen=True)
class EyeTemplate:
    patch: np.ndarray     # open-eye appearance
    variance: np.ndarray  # per-pixel, floored at 1
    frame_index: int

    def __post_init__(self):
        h, w = self.patch.shape
        if h % 2 == 0 or w % 2 == 0:
            raise InvalidInput(f"eye template must have odd sides, got {w}x{h}")
        if self.variance.shape != self.patch.shape:
            raise InvalidInput("variance map must match the patch shape")
        if (self.variance < 1).any():
            raise InvalidInput("variance entries must be floored at 1")


@dataclass(frozen=True)
class EyeTrackState:
    position: tuple[int, int]
    correlation: float
    moving: bool
    frames_still: int


def motion_pixel_count(cur: GrayImage, prev: GrayImage, region: MotionRegion) -> int:
    """Pixels in the region whose absolute change exceeds the threshold."""
    if cur.pixels.shape != prev.pixels.shape:
        raise InvalidInput("frames must have identical dimensions")
    r = region.region
    if not r.inside(cur.width, cur.height):
        raise InvalidInput(f"motion region {r} outside the frame")
    a = cur.pixels[r.y:r.y2, r.x:r.x2].astype(np.int16)
    b = prev.pixels[r.y:r.y2, r.x:r.x2].astype(np.int16)
    return int((np.abs(a - b) > region.pixel_threshold).sum())


def update_eye_motion(state: EyeTrackState, displacement: tuple[float, float], move_eps: float) -> EyeTrackState:
    """Stillness bookkeeping: the frame counter resets whenever the eye moves."""
    moving = math.hypot(*displacement) > move_eps
    return replace(state, moving=moving, frames_still=0 if moving else state.frames_still + 1)


def detect_blink(count: int, state: EyeTrackState, count_threshold: int, min_still_frames: int) -> bool:
    """Raw per-frame blink signal, gated on the eye having settled."""
    return count > count_threshold and not state.moving and state.frames_still >= min_still_frames


class Debouncer:
    """Streaming blink-window merge.

    The first signal opens a window of `window` frames; signals inside it
    extend the event's end; the next event may open only after the window
    closes. A completed (start, end) pair is returned by the first push at
    or past the window boundary.
    """

    def __init__(self, window: int):
        if window < 1:
            raise InvalidInput(f"blink window must be >= 1, got {window}")
        self.window = window
        self._start: int | None = None
        self._last_true = 0

    def push(self, frame: int, signal: bool) -> tuple[int, int] | None:
        completed = None
        if self._start is not None and frame >= self._start + self.window:
            completed = (self._start, self._last_true)
            self._start = None
        if signal:
            if self._start is None:
                self._start = frame
            self._last_true = frame
        return completed

    def flush(self) -> tuple[int, int] | None:
        if self._start is None:
            return None
        completed = (self._start, self._last_true)
        self._start = None
        return completed

    @property
    def open_start(self) -> int | None:
        return self._start


def debounce(
    signals: Iterable[bool],
    blink_length_frames: int,
    side: str = "left",
    frame_period_ms: float = 1000.0 / 30.0,
) -> list[BlinkEvent]:
    """Merge a raw signal stream into blink events (voluntary unclassified)."""
    deb = Debouncer(blink_length_frames)
    spans = []
    frame = -1
    for frame, signal in enumerate(signals):
        done = deb.push(frame, signal)
        if done:
            spans.append(done)
    tail = deb.flush()
    if tail:
        spans.append(tail)
    return [
        BlinkEvent(side, start, end, (end - start + 1) * frame_period_ms, False)
        for start, end in spans
    ]


def classify_voluntary(event: BlinkEvent, voluntary_min_ms: float) -> BlinkEvent:
    """A blink held at least the configured duration counts as intentional."""
    return replace(event, voluntary=event.duration_ms >= voluntary_min_ms)


class FrameRing:
    """Last-n frames keyed by frame index."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise InvalidInput("ring buffer needs capacity >= 1")
        self.capacity = capacity
        self._frames: OrderedDict[int, GrayImage] = OrderedDict()

    def push(self, frame_index: int, frame: GrayImage) -> None:
        self._frames[frame_index] = frame
        while len(self._frames) > self.capacity:
            self._frames.popitem(last=False)

    def get(self, frame_index: int) -> GrayImage | None:
        return self._frames.get(frame_index)

    def __len__(self) -> int:
        return len(self._frames)


def _clamped_patch_rect(frame: GrayImage, center: tuple[int, int], size: int) -> Rect:
    half = size // 2
    x0 = min(max(center[0] - half, 0), max(frame.width - size, 0))
    y0 = min(max(center[1] - half, 0), max(frame.height - size, 0))
    return Rect(x0, y0, size, size)


def acquire_template(
    frames: FrameRing,
    event: BlinkEvent,
    eye_position: tuple[int, int],
    patch_size: int,
    margin_frames: int,
) -> EyeTemplate:
    """Open-eye template from the frames just after a blink ends.

    The patch comes from the frame `margin_frames` past end_frame (the lid
    has settled); the variance map is the per-pixel variance across those
    post-blink frames, floored at 1 so the mismatch division stays sane.
    """
    if patch_size % 2 == 0:
        raise InvalidInput(f"template size must be odd, got {patch_size}")
    if margin_frames < 1:
        raise InvalidInput("need at least one post-blink frame")
    needed = range(event.end_frame + 1, event.end_frame + margin_frames + 1)
    stack = []
    rect = None
    for idx in needed:
        frame = frames.get(idx)
        if frame is None:
            raise NotReady(f"frame {idx} not buffered yet")
        if frame.width < patch_size or frame.height < patch_size:
            raise InvalidInput("frame smaller than the eye template")
        if rect is None:
            rect = _clamped_patch_rect(frame, eye_position, patch_size)
        stack.append(extract_patch(frame, rect).astype(np.float64))
    pile = np.stack(stack)
    variance = np.maximum(pile.var(axis=0), 1.0)
    return EyeTemplate(stack[-1].astype(np.uint8), variance, event.end_frame + margin_frames)


def correlation_track(
    cur: GrayImage,
    tmpl: EyeTemplate,
    prev: EyeTrackState,
    search_radius: int,
    move_eps: float = 1.5,
) -> EyeTrackState:
    """Best correlation placement within the search radius of the last position.

    The caller re-initializes (back to blink-driven template acquisition)
    when the returned correlation falls below its threshold.
    """
    size = tmpl.patch.shape[0]
    half = size // 2
    x0 = min(max(prev.position[0] - half - search_radius, 0), max(cur.width - size, 0))
    y0 = min(max(prev.position[1] - half - search_radius, 0), max(cur.height - size, 0))
    x1 = min(prev.position[0] + half + search_radius + 1, cur.width)
    y1 = min(prev.position[1] + half + search_radius + 1, cur.height)
    if x1 - x0 < size or y1 - y0 < size:
        raise InvalidInput("search window smaller than the eye template")
    region = extract_patch(cur, Rect(x0, y0, x1 - x0, y1 - y0))
    dx, dy, score = best_match(region, tmpl.patch.astype(np.float64))
    position = (x0 + dx + half, y0 + dy + half)
    displacement = (position[0] - prev.position[0], position[1] - prev.position[1])
    moved = update_eye_motion(prev, displacement, move_eps)
    return EyeTrackState(position, score, moved.moving, moved.frames_still)
