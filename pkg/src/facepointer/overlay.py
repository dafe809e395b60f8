"""Debug overlay rendering: detection state drawn over the frame."""

from __future__ import annotations

import math

import numpy as np
from PIL import Image, ImageDraw

BTE_COLOR = (255, 220, 0)
EYE_COLOR = (0, 200, 255)
ROI_COLOR = (80, 120, 255)
TIP_COLOR = (255, 60, 60)
BROW_COLOR = (90, 220, 90)
CANDIDATE_COLOR = (255, 255, 255)
BLINK_COLOR = (255, 140, 0)
POINTER_COLOR = (230, 90, 230)


def _cross(draw: ImageDraw.ImageDraw, x: float, y: float, size: int, color) -> None:
    draw.line([(x - size, y), (x + size, y)], fill=color)
    draw.line([(x, y - size), (x, y + size)], fill=color)


def _clip_line(theta: float, rho: float, bounds) -> tuple | None:
    """Segment of x cos(t) + y sin(t) = rho inside a rect (x0, y0, x1, y1)."""
    x0, y0, x1, y1 = bounds
    c, s = math.cos(theta), math.sin(theta)
    points = []
    if abs(s) > 1e-9:
        for x in (x0, x1):
            y = (rho - x * c) / s
            if y0 - 1e-6 <= y <= y1 + 1e-6:
                points.append((x, y))
    if abs(c) > 1e-9:
        for y in (y0, y1):
            x = (rho - y * s) / c
            if x0 - 1e-6 <= x <= x1 + 1e-6:
                points.append((x, y))
    if len(points) < 2:
        return None
    return points[0], points[-1]


def render_overlay(frame, session) -> Image.Image:
    """Markers for everything the session knows about this frame.

    A frame with no face lock comes back as a plain color copy. Output is
    a pure function of the frame and session state.
    """
    image = Image.fromarray(np.stack([frame.pixels] * 3, axis=-1), "RGB")
    lock = getattr(session, "lock", None)
    draw = ImageDraw.Draw(image)

    debug = getattr(session, "debug_state", {})
    for x, y in debug.get("candidates", []):
        draw.point((x, y), fill=CANDIDATE_COLOR)

    if lock is None:
        return image

    det = lock.detection
    _cross(draw, det.bte[0], det.bte[1], 4, BTE_COLOR)

    iod = math.hypot(det.right_eye[0] - det.left_eye[0], det.right_eye[1] - det.left_eye[1])
    half = max(4, int(round(iod * 0.22)))
    for channel in getattr(session, "channels", {}).values():
        ex, ey = channel.position
        draw.rectangle([ex - half, ey - half, ex + half, ey + half], outline=EYE_COLOR)
        if channel.window_open():
            draw.ellipse([ex - half, ey - half, ex + half, ey + half], outline=BLINK_COLOR, width=2)

    roi = debug.get("roi")
    if roi is not None:
        draw.rectangle([roi.x, roi.y, roi.x2 - 1, roi.y2 - 1], outline=ROI_COLOR)
    _cross(draw, lock.tip[0], lock.tip[1], 5, TIP_COLOR)

    for line, eye in zip(lock.eyebrows, (det.left_eye, det.right_eye)):
        if line is None:
            continue
        span = iod * 0.35
        bounds = (eye[0] - span, eye[1] - span, eye[0] + span, eye[1] + 2)
        seg = _clip_line(line.theta, line.rho, bounds)
        if seg is not None:
            draw.line([seg[0], seg[1]], fill=BROW_COLOR)

    pointer = getattr(session, "pointer", None)
    if pointer is not None:
        px = pointer.x / pointer.screen_w * frame.width
        py = pointer.y / pointer.screen_h * frame.height
        _cross(draw, px, py, 3, POINTER_COLOR)

    return image
