"""Between-the-eyes detection with the six-segmented rectangle filter.

A w x h rectangle split into a 3x2 grid of segments B1..B6 is scanned over
the integral image; centers whose segment sums satisfy the bright-dark
relations (nose column brighter than either eye column, eye row darker
than cheek row) become candidates. Candidates are clustered, each cluster
is scored against a reference template by variance-weighted mismatch, and
the best area-weighted positive score wins.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInput, InvalidTemplate
from .images import (
    GrayImage,
    IntegralImage,
    Rect,
    extract_patch,
    normalize_patch,
    rect_sum,
    resample_nearest,
)

# Candidate patches are always compared at this size: 32 wide x 16 tall,
# split into 16x16 halves. (Width-major reading of the m=0..31 pattern;
# the transposed orientation would need only PATCH_W/PATCH_H swapped.)
PATCH_W = 32
PATCH_H = 16
HALF_W = PATCH_W // 2

# Extraction window around a cluster centroid: filter width plus a margin
# that scales with it (one segment width, = 8 px at the default 24-wide
# filter), height at the same 2:1 aspect as the comparison patch. The
# margin must scale or patches would not be comparable across scales.
def _window_width(filter_w: int) -> int:
    return filter_w + filter_w // 3

_TEMPLATE_MAGIC = b"SSRT"
_TEMPLATE_VERSION = 1


@dataclass(frozen=True)
class SsrGeometry:
    """Filter extent; segments tile it as a 3-wide x 2-tall grid."""

    w: int
    h: int

    def __post_init__(self):
        if self.w < 6 or self.w % 3:
            raise InvalidInput(f"filter width must be >= 6 and divisible by 3, got {self.w}")
        if self.h < 4 or self.h % 2:
            raise InvalidInput(f"filter height must be >= 4 and divisible by 2, got {self.h}")

    @property
    def seg_w(self) -> int:
        return self.w // 3

    @property
    def seg_h(self) -> int:
        return self.h // 2

    def rect_at(self, cx: int, cy: int) -> Rect:
        """Whole filter rectangle for center (cx, cy)."""
        return Rect(cx - self.w // 2, cy - self.h // 2, self.w, self.h)

    def segment_at(self, cx: int, cy: int, index: int) -> Rect:
        """Segment B1..B6 (row-major: B1 B2 B3 / B4 B5 B6) in image coords."""
        if not 1 <= index <= 6:
            raise InvalidInput(f"segment index must be 1..6, got {index}")
        col = (index - 1) % 3
        row = (index - 1) // 3
        base = self.rect_at(cx, cy)
        return Rect(base.x + col * self.seg_w, base.y + row * self.seg_h, self.seg_w, self.seg_h)

    def center_bounds(self, width: int, height: int) -> tuple[int, int, int, int]:
        """Inclusive (cx_min, cx_max, cy_min, cy_max) where the filter fits."""
        return (
            self.w // 2,
            width - self.w + self.w // 2,
            self.h // 2,
            height - self.h + self.h // 2,
        )


@dataclass(frozen=True)
class CandidateMask:
    """Per-pixel pass/fail of the filter conditions, false where it cannot fit."""

    bits: np.ndarray

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]


@dataclass(frozen=True)
class Cluster:
    """8-connected component of candidate pixels."""

    pixels: np.ndarray  # (n, 2) int (x, y)
    centroid: tuple[float, float]

    @property
    def area(self) -> int:
        return len(self.pixels)


@dataclass(frozen=True)
class MismatchScore:
    d_left: float
    d_right: float

    @property
    def total(self) -> float:
        return self.d_left + self.d_right


@dataclass(frozen=True)
class EyeTemplatePair:
    """Reference halves t and per-pixel variances v for the mismatch score.

    Halves are stored already normalized to mean 128 / std 64 (float32 so
    the file container round-trips bit-exactly); variances are floored
    above zero by the acquisition path.
    """

    t_left: np.ndarray
    t_right: np.ndarray
    v_left: np.ndarray
    v_right: np.ndarray

    def __post_init__(self):
        for name in ("t_left", "t_right", "v_left", "v_right"):
            arr = getattr(self, name)
            if arr.shape != (PATCH_H, HALF_W):
                raise InvalidTemplate(f"{name} must be {PATCH_H}x{HALF_W}, got {arr.shape}")
        if (self.v_left <= 0).any() or (self.v_right <= 0).any():
            raise InvalidTemplate("variance entries must be positive")


@dataclass(frozen=True)
class BteDetection:
    bte: tuple[float, float]    # midpoint of the located eyes
    left_eye: tuple[int, int]   # image-left (the user's right eye)
    right_eye: tuple[int, int]  # image-right
    score: float
    scale: SsrGeometry
    anchor: tuple[float, float] = (0.0, 0.0)  # winning cluster centroid


def _segment_sums(ii: IntegralImage, cx: int, cy: int, geom: SsrGeometry) -> list[int]:
    return [rect_sum(ii, geom.segment_at(cx, cy, k)) for k in range(1, 7)]


def ssr_passes(ii: IntegralImage, center: tuple[int, int], geom: SsrGeometry) -> bool:
    """Test the three strict bright-dark relations at one filter center."""
    cx, cy = center
    if not geom.rect_at(cx, cy).inside(ii.width, ii.height):
        raise InvalidInput(f"filter at {center} does not fit {ii.width}x{ii.height} image")
    b1, b2, b3, b4, b5, b6 = _segment_sums(ii, cx, cy, geom)
    s_n = b2 + b5
    s_er = b1 + b4
    s_el = b3 + b6
    s_e = b1 + b2 + b3
    s_c = b4 + b5 + b6
    return s_n > s_er and s_n > s_el and s_e < s_c


def _grid_rect_sums(padded: np.ndarray, x0: int, y0: int, sw: int, sh: int, nx: int, ny: int) -> np.ndarray:
    """Sums of sw x sh rects whose top-left corners span an nx x ny grid."""
    a = padded[y0 + sh:y0 + sh + ny, x0 + sw:x0 + sw + nx]
    b = padded[y0:y0 + ny, x0 + sw:x0 + sw + nx]
    c = padded[y0 + sh:y0 + sh + ny, x0:x0 + nx]
    d = padded[y0:y0 + ny, x0:x0 + nx]
    return a - b - c + d


def scan_candidates(ii: IntegralImage, geom: SsrGeometry) -> CandidateMask:
    """Evaluate the filter at every feasible center in one vectorized pass."""
    if ii.width < geom.w or ii.height < geom.h:
        raise InvalidInput(
            f"image {ii.width}x{ii.height} smaller than filter {geom.w}x{geom.h}"
        )
    cx_min, cx_max, cy_min, cy_max = geom.center_bounds(ii.width, ii.height)
    nx = cx_max - cx_min + 1
    ny = cy_max - cy_min + 1
    sw, sh = geom.seg_w, geom.seg_h

    # Segment top-left for the first feasible center is at image (0, 0).
    seg = {}
    for k in range(6):
        ox = (k % 3) * sw
        oy = (k // 3) * sh
        seg[k + 1] = _grid_rect_sums(ii.padded, ox, oy, sw, sh, nx, ny)

    s_n = seg[2] + seg[5]
    s_er = seg[1] + seg[4]
    s_el = seg[3] + seg[6]
    s_e = seg[1] + seg[2] + seg[3]
    s_c = seg[4] + seg[5] + seg[6]
    passes = (s_n > s_er) & (s_n > s_el) & (s_e < s_c)

    bits = np.zeros((ii.height, ii.width), dtype=bool)
    bits[cy_min:cy_max + 1, cx_min:cx_max + 1] = passes
    return CandidateMask(bits)


def label_clusters(mask: CandidateMask) -> list[Cluster]:
    """Partition true pixels into 8-connected components.

    Components are ordered by (min y, then min x) over their members so
    downstream selection is deterministic.
    """
    # set-based flood fill: candidate masks are sparse and per-element
    # numpy indexing would dominate the scan time
    remaining = {(int(y), int(x)) for y, x in np.argwhere(mask.bits)}
    seeds = sorted(remaining)
    clusters = []
    for seed in seeds:
        if seed not in remaining:
            continue
        remaining.discard(seed)
        stack = [seed]
        members = []
        while stack:
            y, x = stack.pop()
            members.append((x, y))
            for ny in (y - 1, y, y + 1):
                for nx in (x - 1, x, x + 1):
                    if (ny, nx) in remaining:
                        remaining.discard((ny, nx))
                        stack.append((ny, nx))
        pts = np.array(members, dtype=np.int64)
        clusters.append(Cluster(pts, (float(pts[:, 0].mean()), float(pts[:, 1].mean()))))
    clusters.sort(key=lambda c: (int(c.pixels[:, 1].min()), int(c.pixels[:, 0].min())))
    return clusters


def make_template(patch: np.ndarray, v_left: np.ndarray | None = None, v_right: np.ndarray | None = None) -> EyeTemplatePair:
    """Build a template pair from a raw 16x32 patch; halves get normalized."""
    patch = np.asarray(patch, dtype=np.float64)
    if patch.shape != (PATCH_H, PATCH_W):
        raise InvalidInput(f"template patch must be {PATCH_H}x{PATCH_W}, got {patch.shape}")
    t_l = normalize_patch(patch[:, :HALF_W]).data.astype(np.float32)
    t_r = normalize_patch(patch[:, HALF_W:]).data.astype(np.float32)
    ones = np.ones((PATCH_H, HALF_W), dtype=np.float32)
    v_l = ones if v_left is None else np.asarray(v_left, dtype=np.float32)
    v_r = ones if v_right is None else np.asarray(v_right, dtype=np.float32)
    return EyeTemplatePair(t_l, t_r, v_l, v_r)


def template_mismatch(patch: np.ndarray, tmpl: EyeTemplatePair) -> MismatchScore:
    """Variance-weighted squared difference of the normalized patch halves.

    Each half is re-normalized to mean 128 / std 64 on its own before the
    comparison, so any positive affine remap of the raw patch scores the
    same.
    """
    patch = np.asarray(patch, dtype=np.float64)
    if patch.shape != (PATCH_H, PATCH_W):
        raise InvalidInput(f"patch must be {PATCH_H}x{PATCH_W}, got {patch.shape}")
    # Quantize to the template's float32 precision so an exact normalized
    # match is exactly zero.
    left = normalize_patch(patch[:, :HALF_W]).data.astype(np.float32).astype(np.float64)
    right = normalize_patch(patch[:, HALF_W:]).data.astype(np.float32).astype(np.float64)
    d_l = float(((left - tmpl.t_left) ** 2 / tmpl.v_left).sum())
    d_r = float(((right - tmpl.t_right) ** 2 / tmpl.v_right).sum())
    return MismatchScore(d_l, d_r)


def _batch_mismatch(patches: np.ndarray, tmpl: EyeTemplatePair) -> np.ndarray:
    """Mismatch totals for a (n, 16, 32) patch stack; NaN for flat halves.

    Same math as template_mismatch, vectorized over candidates.
    """
    totals = np.zeros(len(patches))
    valid = np.ones(len(patches), dtype=bool)
    for sl, t, v in ((np.s_[:, :, :HALF_W], tmpl.t_left, tmpl.v_left),
                     (np.s_[:, :, HALF_W:], tmpl.t_right, tmpl.v_right)):
        halves = patches[sl]
        means = halves.mean(axis=(1, 2), keepdims=True)
        stds = halves.std(axis=(1, 2))
        valid &= stds > 0
        safe = np.where(stds > 0, stds, 1.0)
        norm = (halves - means) * (64.0 / safe[:, None, None]) + 128.0
        norm = norm.astype(np.float32).astype(np.float64)
        totals += ((norm - t) ** 2 / v).sum(axis=(1, 2))
    return np.where(valid, totals, np.nan)


def extract_candidate_patch(gray: GrayImage, center: tuple[float, float], geom: SsrGeometry) -> np.ndarray | None:
    """Window around a candidate center, resampled to the comparison size.

    Returns None when the window cannot fit the image even after shifting.
    """
    win_w = _window_width(geom.w)
    win_h = win_w // 2
    if win_w > gray.width or win_h > gray.height:
        return None
    x0 = int(round(center[0])) - win_w // 2
    y0 = int(round(center[1])) - win_h // 2
    x0 = min(max(x0, 0), gray.width - win_w)
    y0 = min(max(y0, 0), gray.height - win_h)
    window = extract_patch(gray, Rect(x0, y0, win_w, win_h))
    return resample_nearest(window, PATCH_W, PATCH_H)


def locate_eyes(gray: GrayImage, bte: tuple[int, int], geom: SsrGeometry) -> tuple[tuple[int, int], tuple[int, int]]:
    """Darkest 3x3-mean neighborhood inside segments B1 and B3.

    Ties resolve toward the segment center, then smallest x, smallest y.
    Quality control is select_bte's job; this simply reports the darkest
    spot whatever the segment contains.
    """
    cx, cy = int(round(bte[0])), int(round(bte[1]))
    if not geom.rect_at(cx, cy).inside(gray.width, gray.height):
        raise InvalidInput(f"filter at {bte} does not fit the image")

    def darkest(seg: Rect) -> tuple[int, int]:
        # 3x3 windows centered on segment pixels; edge pixels replicate.
        padded = np.pad(gray.pixels.astype(np.float64), 1, mode="edge")
        region = padded[seg.y:seg.y2 + 2, seg.x:seg.x2 + 2]
        wins = np.lib.stride_tricks.sliding_window_view(region, (3, 3))
        means = wins.mean(axis=(2, 3))
        best = means.min()
        ys, xs = np.nonzero(means == best)
        cx0 = seg.x + (seg.w - 1) / 2.0
        cy0 = seg.y + (seg.h - 1) / 2.0
        cands = sorted(
            ((seg.x + int(x), seg.y + int(y)) for y, x in zip(ys, xs)),
            key=lambda p: ((p[0] - cx0) ** 2 + (p[1] - cy0) ** 2, p[0], p[1]),
        )
        return cands[0]

    return darkest(geom.segment_at(cx, cy, 1)), darkest(geom.segment_at(cx, cy, 3))


def select_bte(
    clusters: list[Cluster],
    gray: GrayImage,
    geom: SsrGeometry,
    tmpl: EyeTemplatePair,
    accept_threshold: float,
) -> BteDetection | None:
    """Pick the best cluster by area-weighted positive classification score.

    score = accept_threshold - (d_left + d_right); positive means face-like
    (threshold classifier standing in for a trained margin), weighted by
    cluster area, argmax wins. Returns None when nothing scores positive.
    """
    candidates = []
    patches = []
    for cluster in clusters:
        patch = extract_candidate_patch(gray, cluster.centroid, geom)
        if patch is not None:
            candidates.append(cluster)
            patches.append(patch)
    best = None
    best_key = None
    if candidates:
        totals = _batch_mismatch(np.stack(patches).astype(np.float64), tmpl)
        for cluster, total in zip(candidates, totals):
            if not np.isfinite(total):
                continue  # flat half-window: not a face
            score = accept_threshold - float(total)
            if score <= 0:
                continue
            weighted = score * cluster.area
            if best_key is None or weighted > best_key:
                best_key = weighted
                best = cluster, weighted
    if best is None:
        return None
    cluster, weighted = best
    left_eye, right_eye = locate_eyes(gray, cluster.centroid, geom)
    # The cluster center sits a little below the pupils (the eyes fill the
    # filter's upper segments); the eye midpoint is the true between-the-
    # eyes point.
    bte = ((left_eye[0] + right_eye[0]) / 2.0, (left_eye[1] + right_eye[1]) / 2.0)
    return BteDetection(bte, left_eye, right_eye, weighted, geom, cluster.centroid)


def multiscale_scan(
    gray: GrayImage,
    scales: list[SsrGeometry],
    tmpl: EyeTemplatePair,
    accept_threshold: float,
) -> BteDetection | None:
    """Run scan -> label -> select at each geometry; best score wins.

    Monocular stand-in for ranging the face: candidate windows at every
    scale are resampled to the common comparison size. Ties break toward
    the smaller filter.
    """
    if not scales:
        raise InvalidInput("need at least one filter geometry")
    ii = None
    best = None
    for geom in sorted(scales, key=lambda g: (g.w, g.h)):
        if gray.width < geom.w or gray.height < geom.h:
            continue
        if ii is None:
            from .images import integral_image

            ii = integral_image(gray)
        mask = scan_candidates(ii, geom)
        if not mask.bits.any():
            continue
        det = select_bte(label_clusters(mask), gray, geom, tmpl, accept_threshold)
        if det is not None and (best is None or det.score > best.score):
            best = det
    return best


def save_template(tmpl: EyeTemplatePair, path: str | Path) -> None:
    """Write the SSRT container: magic, version, dims, t then v, left then right."""
    blob = _TEMPLATE_MAGIC + struct.pack("<BHH", _TEMPLATE_VERSION, PATCH_W, PATCH_H)
    for arr in (tmpl.t_left, tmpl.t_right, tmpl.v_left, tmpl.v_right):
        blob += arr.astype("<f4").tobytes()
    Path(path).write_bytes(blob)


def load_template(path: str | Path) -> EyeTemplatePair:
    raw = Path(path).read_bytes()
    if raw[:4] != _TEMPLATE_MAGIC:
        raise InvalidTemplate(f"{path}: bad magic")
    version, width, height = struct.unpack("<BHH", raw[4:9])
    if version != _TEMPLATE_VERSION:
        raise InvalidTemplate(f"{path}: unsupported version {version}")
    if width != PATCH_W or height != PATCH_H:
        raise InvalidTemplate(f"{path}: unsupported patch size {width}x{height}")
    half = height * (width // 2)
    need = 9 + 4 * half * 4
    if len(raw) != need:
        raise InvalidTemplate(f"{path}: expected {need} bytes, got {len(raw)}")
    arrays = []
    pos = 9
    for _ in range(4):
        arr = np.frombuffer(raw, dtype="<f4", count=half, offset=pos).reshape(height, width // 2)
        arrays.append(arr.copy())
        pos += half * 4
    return EyeTemplatePair(*arrays)
