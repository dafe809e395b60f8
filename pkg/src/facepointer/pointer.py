"""Virtual pointer: nose displacement in, cursor coordinates and clicks out.

Nothing here touches a real OS cursor; consumers read the emitted state.
Absolute mode maps displacement from the calibration origin through a
gain onto the virtual screen; relative mode integrates per-frame deltas.
A small dead zone suppresses single-pixel tracker jitter around the
origin, and an optional exponential smoother conditions the raw tip
stream before mapping.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import InvalidInput, NotCalibrated


@dataclass(frozen=True)
class Calibration:
    origin: tuple[float, float]        # nose position at calibration
    screen_center: tuple[float, float]


@dataclass(frozen=True)
class PointerState:
    x: float
    y: float
    screen_w: int
    screen_h: int
    gain: float
    mode: str                      # "absolute" | "relative"
    mirror_x: bool = False
    dead_zone_px: float = 2.0
    last_nose: tuple[float, float] | None = None

    def __post_init__(self):
        if self.mode not in ("absolute", "relative"):
            raise InvalidInput(f"unknown pointer mode {self.mode!r}")
        if self.gain <= 0:
            raise InvalidInput("gain must be positive")


@dataclass(frozen=True)
class ClickEvent:
    button: str  # "left" | "right"
    frame: int


def calibrate(nose: tuple[float, float], screen_w: int, screen_h: int) -> Calibration:
    """Pin the current nose position as origin; pointer resets to center."""
    return Calibration(tuple(nose), (screen_w / 2.0, screen_h / 2.0))


def initial_pointer(cal: Calibration, screen_w: int, screen_h: int, gain: float,
                    mode: str = "absolute", mirror_x: bool = False,
                    dead_zone_px: float = 2.0) -> PointerState:
    return PointerState(
        cal.screen_center[0], cal.screen_center[1],
        screen_w, screen_h, gain, mode, mirror_x, dead_zone_px,
    )


def _clamp(v: float, hi: int) -> float:
    return min(max(v, 0.0), hi - 1.0)


def _dead_zone(delta: float, zone: float) -> float:
    return 0.0 if abs(delta) <= zone else delta


def update_pointer(state: PointerState, cal: Calibration | None, nose: tuple[float, float]) -> PointerState:
    """Map the nose point onto the virtual screen, clamped to its bounds."""
    if cal is None:
        raise NotCalibrated("pointer updated before calibration")
    if state.mode == "absolute":
        dx = _dead_zone(nose[0] - cal.origin[0], state.dead_zone_px)
        dy = _dead_zone(nose[1] - cal.origin[1], state.dead_zone_px)
        if state.mirror_x:
            dx = -dx
        x = cal.screen_center[0] + state.gain * dx
        y = cal.screen_center[1] + state.gain * dy
    else:
        prev = state.last_nose if state.last_nose is not None else cal.origin
        dx = nose[0] - prev[0]
        dy = nose[1] - prev[1]
        if state.mirror_x:
            dx = -dx
        x = state.x + state.gain * dx
        y = state.y + state.gain * dy
    return replace(
        state,
        x=_clamp(x, state.screen_w),
        y=_clamp(y, state.screen_h),
        last_nose=tuple(nose),
    )


def blink_to_click(event, frame: int) -> ClickEvent | None:
    """Voluntary single-eye blinks fire the matching button; the rest do not."""
    if not event.voluntary:
        return None
    if event.side not in ("left", "right"):
        return None  # paired both-eye closures never click
    return ClickEvent(event.side, frame)


class NoseSmoother:
    """Exponential smoothing on the raw tip stream; alpha 1 disables it."""

    def __init__(self, alpha: float):
        if not 0.0 < alpha <= 1.0:
            raise InvalidInput(f"smoothing factor must be in (0, 1], got {alpha}")
        self.alpha = alpha
        self._value: tuple[float, float] | None = None

    def push(self, point: tuple[float, float]) -> tuple[float, float]:
        if self._value is None:
            self._value = (float(point[0]), float(point[1]))
        else:
            a = self.alpha
            self._value = (
                a * point[0] + (1 - a) * self._value[0],
                a * point[1] + (1 - a) * self._value[1],
            )
        return self._value

    def reset(self) -> None:
        self._value = None
