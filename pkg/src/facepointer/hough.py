"""Line recovery over edge points for the eyebrow overlay channel.

Sobel magnitude thresholding produces the edge points; a classical
normal-form (theta, rho) accumulator with theta in [0, pi) and signed rho
finds candidate lines; nearby candidates merge into the final eyebrow
line by support-weighted averaging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, NoLine
from .images import GrayImage, Rect, extract_patch

DEFAULT_THETA_BINS = 180
DEFAULT_RHO_BIN = 1.0
DEFAULT_TOP_K = 8
MERGE_THETA_DEG = 10.0
MERGE_RHO_PX = 5.0

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.int64)
_SOBEL_Y = _SOBEL_X.T


@dataclass(frozen=True)
class EdgeMap:
    points: np.ndarray  # (n, 2) int (x, y), unique
    width: int
    height: int


@dataclass(frozen=True)
class HoughAccumulator:
    counts: np.ndarray  # (theta_bins, rho_bins) int
    rho_bin_size: float
    rho_offset: int     # index of rho == 0

    @property
    def theta_bins(self) -> int:
        return self.counts.shape[0]

    def theta_of(self, t_idx: int) -> float:
        return t_idx * math.pi / self.theta_bins

    def rho_of(self, r_idx: int) -> float:
        return (r_idx - self.rho_offset) * self.rho_bin_size


@dataclass(frozen=True)
class Line:
    theta: float
    rho: float
    support: int


def sobel_edges(gray: GrayImage, region: Rect, magnitude_threshold: float) -> EdgeMap:
    """Points where |Gx| + |Gy| exceeds the threshold, region border excluded."""
    if region.w < 3 or region.h < 3:
        raise InvalidInput(f"sobel region must be at least 3x3, got {region.w}x{region.h}")
    patch = extract_patch(gray, region).astype(np.int64)
    wins = np.lib.stride_tricks.sliding_window_view(patch, (3, 3))
    gx = np.einsum("yxhw,hw->yx", wins, _SOBEL_X)
    gy = np.einsum("yxhw,hw->yx", wins, _SOBEL_Y)
    mag = np.abs(gx) + np.abs(gy)
    ys, xs = np.nonzero(mag > magnitude_threshold)
    points = np.stack([xs + region.x + 1, ys + region.y + 1], axis=1)
    return EdgeMap(points, gray.width, gray.height)


def hough_accumulate(edges: EdgeMap, theta_bins: int, rho_bin_size: float) -> HoughAccumulator:
    """Every point votes once per theta bin at rho = x cos(theta) + y sin(theta)."""
    if theta_bins < 2:
        raise InvalidInput(f"need at least 2 theta bins, got {theta_bins}")
    diag = math.hypot(edges.width, edges.height)
    offset = math.ceil(diag / rho_bin_size)
    n_rho = 2 * offset + 1
    counts = np.zeros((theta_bins, n_rho), dtype=np.int64)
    if len(edges.points):
        thetas = np.arange(theta_bins) * math.pi / theta_bins
        xs = edges.points[:, 0].astype(np.float64)
        ys = edges.points[:, 1].astype(np.float64)
        rho = np.cos(thetas)[:, None] * xs[None, :] + np.sin(thetas)[:, None] * ys[None, :]
        idx = np.rint(rho / rho_bin_size).astype(np.int64) + offset
        t_idx = np.repeat(np.arange(theta_bins), len(xs))
        np.add.at(counts, (t_idx, idx.ravel()), 1)
    return HoughAccumulator(counts, rho_bin_size, offset)


def _peak_cells(counts: np.ndarray) -> list[tuple[int, int]]:
    """Cells >= all 8 neighbors (3x3 non-maximum suppression), votes > 0."""
    padded = np.zeros((counts.shape[0] + 2, counts.shape[1] + 2), dtype=counts.dtype)
    padded[1:-1, 1:-1] = counts
    neighborhood = counts.copy()
    h, w = counts.shape
    for dy in (0, 1, 2):
        for dx in (0, 1, 2):
            if dy == 1 and dx == 1:
                continue
            np.maximum(neighborhood, padded[dy:dy + h, dx:dx + w], out=neighborhood)
    is_peak = (counts > 0) & (counts >= neighborhood)
    return [(int(t), int(r)) for t, r in np.argwhere(is_peak)]


def _collapse_tied_peaks(
    cells: list[tuple[int, int]],
    acc: HoughAccumulator,
    theta_window: float,
    rho_window: float,
) -> list[tuple[int, int]]:
    """Collapse equal-support peaks that describe the same line.

    A short quantized segment holds its full support across several theta
    bins, so suppression alone still reports one line repeatedly; exact
    ties within the merge window (wrap-aware: theta + pi flips rho's sign)
    reduce to the median-theta member. Peaks with different support are
    left alone for the downstream line merge.
    """
    counts = acc.counts
    span = acc.theta_bins
    ordered = sorted(cells, key=lambda cell: (-counts[cell], cell))
    # sparse accumulators make every stray vote a "peak"; only the strongest
    # can reach the top-k output, so cap the quadratic collapse work
    ordered = ordered[:128]
    claimed: set[tuple[int, int]] = set()
    kept = []
    for seed in ordered:
        if seed in claimed:
            continue
        seed_theta, seed_rho = acc.theta_of(seed[0]), acc.rho_of(seed[1])
        group = []
        for other in ordered:
            if other in claimed or counts[other] != counts[seed]:
                continue
            theta, rho = acc.theta_of(other[0]), acc.rho_of(other[1])
            d_theta = abs(theta - seed_theta)
            unwrapped = other[0]
            same = d_theta <= theta_window and abs(rho - seed_rho) <= rho_window
            if not same and math.pi - d_theta <= theta_window and abs(rho + seed_rho) <= rho_window:
                same = True
                unwrapped = other[0] - span if other[0] > seed[0] else other[0] + span
            if same:
                group.append((unwrapped, other))
        group.sort()
        rep = group[(len(group) - 1) // 2][1]
        claimed.update(cell for _, cell in group)
        kept.append(rep)
    return kept


def _refine_peak(edges: EdgeMap, theta: float, rho: float, tol: float) -> tuple[float, float] | None:
    """Orthogonal least-squares fit of the points voting near a peak.

    Bin centers quantize the line parameters; refitting the peak's inliers
    recovers them to sub-bin precision. Two passes let the inlier gate
    re-center on the first fit. Integer moment sums keep the result
    independent of point order. Returns None when the fit is degenerate.
    """
    xs = edges.points[:, 0].astype(np.float64)
    ys = edges.points[:, 1].astype(np.float64)
    for _ in range(2):
        keep = np.abs(xs * math.cos(theta) + ys * math.sin(theta) - rho) <= tol
        if keep.sum() < 2:
            return None
        px = edges.points[keep, 0]
        py = edges.points[keep, 1]
        n = len(px)
        sx, sy = int(px.sum()), int(py.sum())
        sxx = int((px * px).sum())
        syy = int((py * py).sum())
        sxy = int((px * py).sum())
        cov_xx = sxx - sx * sx / n
        cov_yy = syy - sy * sy / n
        cov_xy = sxy - sx * sy / n
        if cov_xx == 0 and cov_yy == 0 and cov_xy == 0:
            return None
        direction = 0.5 * math.atan2(2.0 * cov_xy, cov_xx - cov_yy)
        normal = math.fmod(direction + math.pi / 2, math.pi)
        if normal < 0:
            normal += math.pi
        theta = normal
        rho = (sx / n) * math.cos(normal) + (sy / n) * math.sin(normal)
    return theta, rho


def hough_lines(
    edges: EdgeMap,
    theta_bins: int = DEFAULT_THETA_BINS,
    rho_bin_size: float = DEFAULT_RHO_BIN,
    top_k: int = DEFAULT_TOP_K,
) -> list[Line]:
    """Strongest accumulator peaks, support descending, (theta, rho) tie-break.

    Each peak's parameters are refined by fitting its inlier points;
    support stays the raw accumulator count.
    """
    if len(edges.points) == 0:
        return []
    acc = hough_accumulate(edges, theta_bins, rho_bin_size)
    cells = _collapse_tied_peaks(
        _peak_cells(acc.counts), acc, math.radians(MERGE_THETA_DEG), MERGE_RHO_PX
    )
    lines = []
    tol = max(2.0 * rho_bin_size, 2.0)
    for t, r in cells:
        theta, rho = acc.theta_of(t), acc.rho_of(r)
        refined = _refine_peak(edges, theta, rho, tol)
        if refined is not None:
            theta, rho = refined
        lines.append(Line(theta, rho, int(acc.counts[t, r])))
    lines.sort(key=lambda l: (-l.support, l.theta, l.rho))
    return lines[:top_k]


def eyebrow_line(
    lines: list[Line],
    theta_window_deg: float = MERGE_THETA_DEG,
    rho_window_px: float = MERGE_RHO_PX,
) -> Line:
    """Support-weighted merge of lines near the strongest one."""
    if not lines:
        raise NoLine("no candidate lines to merge")
    top = max(lines, key=lambda l: (l.support, -l.theta, -l.rho))
    window = math.radians(theta_window_deg)
    near = [
        l for l in lines
        if abs(l.theta - top.theta) <= window and abs(l.rho - top.rho) <= rho_window_px
    ]
    total = sum(l.support for l in near)
    theta = sum(l.theta * l.support for l in near) / total
    rho = sum(l.rho * l.support for l in near) / total
    return Line(theta, rho, total)


def eyebrow_region(eye: tuple[int, int], iod: float, width: int, height: int) -> Rect | None:
    """Search rect above one eye: 1.2x the half inter-ocular distance wide."""
    w = max(3, int(round(1.2 * iod / 2)))
    h = max(3, int(round(0.4 * w)))
    x0 = min(max(eye[0] - w // 2, 0), max(width - w, 0))
    y0 = min(max(eye[1] - h, 0), max(height - h, 0))
    if w > width or h > height:
        return None
    return Rect(x0, y0, w, h)
