"""Nose-tip localization and tracking inside the eye-anchored square ROI.

The square hangs below the eye line with side equal to the inter-ocular
distance. Accumulated intensity profiles find the bridge; per-row
brightest-sector points (NBPs) trace it; the dark nostril band shows up
as a local minimum in the first difference of the accumulated sums and
the tip as the largest local maximum above it. Frame-to-frame the tip is
followed by template matching.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .images import GrayImage, Rect, extract_patch
from .matching import best_match


@dataclass(frozen=True)
class NoseRoi:
    rect: Rect
    left_eye: tuple[int, int]
    right_eye: tuple[int, int]


@dataclass(frozen=True)
class Profile:
    values: np.ndarray
    axis: str  # "horizontal" (per column) or "vertical" (per row)

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.values))  # ties go to the smallest index


@dataclass(frozen=True)
class NosePoint:
    x: int
    y: int
    confidence: float


@dataclass(frozen=True)
class NoseTemplate:
    patch: np.ndarray
    frame_index: int

    def __post_init__(self):
        h, w = self.patch.shape
        if h % 2 == 0 or w % 2 == 0:
            raise InvalidInput(f"nose template must have odd sides, got {w}x{h}")


@dataclass(frozen=True)
class RoiAnalysis:
    """Everything the tip search derives from the ROI; feeds the overlay."""

    nbp_rows: np.ndarray      # ROI-relative row per NBP
    nbp_cols: np.ndarray      # ROI-relative column (sector center) per NBP
    nbp_sums: np.ndarray      # accumulated best-sector sum per row
    nostril_row: int | None   # ROI-relative, None when no structure
    tip: NosePoint            # full-image coordinates
    fallback: bool


def build_roi(left_eye: tuple[int, int], right_eye: tuple[int, int], width: int, height: int) -> NoseRoi:
    """Square below the eye line, side = inter-ocular distance, shrunk to fit."""
    if left_eye == right_eye:
        raise InvalidInput("eye points must be distinct")
    if right_eye[0] <= left_eye[0]:
        raise InvalidInput("left eye must be left of right eye in image coordinates")
    iod = math.hypot(right_eye[0] - left_eye[0], right_eye[1] - left_eye[1])
    if iod < 8:
        raise InvalidInput(f"inter-ocular distance {iod:.1f} below minimum 8")
    x0 = int(round(left_eye[0]))
    y0 = int(round((left_eye[1] + right_eye[1]) / 2))
    side = min(int(round(iod)), width - x0, height - y0)
    if side < 1:
        raise InvalidInput("eye line leaves no room for the ROI")
    return NoseRoi(Rect(x0, y0, side, side), tuple(left_eye), tuple(right_eye))


def horizontal_profile(gray: GrayImage, roi: NoseRoi) -> Profile:
    """Per-column accumulation over all ROI rows; argmax is the bridge x."""
    region = extract_patch(gray, roi.rect).astype(np.int64)
    acc = np.cumsum(region, axis=0)
    return Profile(acc[-1].astype(np.float64), "horizontal")


def vertical_profile(gray: GrayImage, roi: NoseRoi) -> Profile:
    """Per-row accumulation over all ROI columns; argmax is the tip y."""
    region = extract_patch(gray, roi.rect).astype(np.int64)
    acc = np.cumsum(region, axis=1)
    return Profile(acc[:, -1].astype(np.float64), "vertical")


def default_sector_width(roi_side: int) -> int:
    return max(1, math.ceil(roi_side / 8))


def nose_bridge_points(gray: GrayImage, roi: NoseRoi, s2_width: int | None = None) -> list[tuple[int, int, float]]:
    """One (row, column, accumulated sum) per ROI row.

    The column is the center of the width-s2 window whose vertically
    accumulated sum (down to that row) is largest; ties go to the leftmost
    window.
    """
    rows, width = roi.rect.h, roi.rect.w
    s2 = default_sector_width(width) if s2_width is None else s2_width
    if not 1 <= s2 < width:
        raise InvalidInput(f"sector width {s2} must be in [1, roi width {width})")
    region = extract_patch(gray, roi.rect).astype(np.float64)
    acc = np.cumsum(region, axis=0)
    col_cum = np.zeros((rows, width + 1))
    np.cumsum(acc, axis=1, out=col_cum[:, 1:])
    window_sums = col_cum[:, s2:] - col_cum[:, :-s2]  # (rows, width - s2 + 1)
    starts = np.argmax(window_sums, axis=1)
    sums = window_sums[np.arange(rows), starts]
    cols = starts + s2 // 2
    return [(int(r), int(c), float(s)) for r, c, s in zip(range(rows), cols, sums)]


def _box3(values: np.ndarray) -> np.ndarray:
    """3-tap box smoothing with edge replication."""
    if len(values) < 3:
        return values.copy()
    padded = np.concatenate(([values[0]], values, [values[-1]]))
    return (padded[:-2] + padded[1:-1] + padded[2:]) / 3.0


def _strict_extrema(values: np.ndarray) -> tuple[list[int], list[int]]:
    minima, maxima = [], []
    for k in range(1, len(values) - 1):
        if values[k] < values[k - 1] and values[k] < values[k + 1]:
            minima.append(k)
        elif values[k] > values[k - 1] and values[k] > values[k + 1]:
            maxima.append(k)
    return minima, maxima


def analyze_roi(gray: GrayImage, roi: NoseRoi, s2_width: int | None = None) -> RoiAnalysis:
    """Full tip search: NBPs, nostril minimum, tip maximum, fallback chain."""
    if roi.rect.h < 5:
        raise InvalidInput(f"roi must span at least 5 rows, got {roi.rect.h}")
    nbps = nose_bridge_points(gray, roi, s2_width)
    rows = np.array([n[0] for n in nbps])
    cols = np.array([n[1] for n in nbps])
    sums = np.array([n[2] for n in nbps])

    diffs = np.diff(sums)  # diffs[k] is row k+1's contribution
    smooth = _box3(diffs)
    minima, maxima = _strict_extrema(smooth)

    nostril_k = None
    tip_k = None
    if minima:
        nostril_k = min(minima, key=lambda k: (smooth[k], k))
        above = [k for k in maxima if k < nostril_k]
        if above:
            tip_k = max(above, key=lambda k: (smooth[k], -k))

    if tip_k is None:
        hx = horizontal_profile(gray, roi).argmax
        vy = vertical_profile(gray, roi).argmax
        tip = NosePoint(roi.rect.x + hx, roi.rect.y + vy, 0.5)
        return RoiAnalysis(rows, cols, sums, None, tip, True)

    span = float(smooth.max() - smooth.min())
    prominence = float(smooth[tip_k] - smooth[nostril_k]) / span if span > 0 else 0.0
    tip_row = tip_k + 1
    tip = NosePoint(
        roi.rect.x + int(cols[tip_row]),
        roi.rect.y + int(tip_row),
        min(max(prominence, 0.0), 1.0),
    )
    return RoiAnalysis(rows, cols, sums, nostril_k + 1, tip, False)


def locate_nose_tip(gray: GrayImage, roi: NoseRoi, s2_width: int | None = None) -> NosePoint:
    return analyze_roi(gray, roi, s2_width).tip


def make_nose_template(gray: GrayImage, tip: tuple[int, int], size: int, frame_index: int) -> NoseTemplate | None:
    """Odd-sided patch centered on the tip; None when it would leave the frame."""
    if size % 2 == 0:
        raise InvalidInput(f"template size must be odd, got {size}")
    half = size // 2
    r = Rect(tip[0] - half, tip[1] - half, size, size)
    if not r.inside(gray.width, gray.height):
        return None
    return NoseTemplate(extract_patch(gray, r), frame_index)


def track_nose(gray: GrayImage, tmpl: NoseTemplate, prev: tuple[int, int]) -> NosePoint:
    """Best NCC placement in a square window of twice the template side.

    The window centers on the previous tip and clamps to the frame;
    confidence maps the peak correlation from [-1, 1] onto [0, 1].
    """
    size = tmpl.patch.shape[0]
    span = 2 * size
    x0 = min(max(prev[0] - span // 2, 0), max(gray.width - span, 0))
    y0 = min(max(prev[1] - span // 2, 0), max(gray.height - span, 0))
    w = min(span, gray.width - x0)
    h = min(span, gray.height - y0)
    if w < size or h < size:
        raise InvalidInput("search region smaller than the nose template")
    region = extract_patch(gray, Rect(x0, y0, w, h))
    dx, dy, score = best_match(region, tmpl.patch)
    half = size // 2
    return NosePoint(x0 + dx + half, y0 + dy + half, (score + 1.0) / 2.0)
