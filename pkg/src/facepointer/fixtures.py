"""Synthetic face renderer and scripted sessions with known ground truth.

The parametric face keeps the bright-dark structure the detectors rely
on: dark eyes and eyebrows flanking a bright between-the-eyes area, a
bright nose bridge ending in a peaked tip blob, a dark nostril band
below it, bright cheeks. All proportions scale with the inter-ocular
distance, so one model drives every filter scale. Renders carry their
ground truth; scripted sessions add head motion and eyelid state per
frame, giving the blink pipeline a replayable oracle.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .images import GrayImage, write_pgm
from .ssr import EyeTemplatePair, SsrGeometry, extract_candidate_patch, make_template

BACKGROUND = 120.0
SKIN = 185.0
EYE_DARK = 35.0
BROW_DARK = 70.0
BRIDGE_BRIGHT = 215.0
TIP_BRIGHT = 240.0
NOSTRIL_DARK = 40.0
CHEEK_BOOST = 25.0
MOUTH_DARK = 90.0

# Illumination ramp over the whole scene. A flat field plus sensor noise
# makes the strict segment inequalities a coin flip, peppering the mask
# with speckle; any real scene is shaded. The linear ramp makes exactly
# one of the eye-column comparisons fail wherever there is no true
# structure, while face contrast dwarfs it.
ILLUM_GX = 0.08
ILLUM_GY = 0.05
DEFAULT_NOISE = 1.5

TIP_DROP = 0.62        # tip sits this fraction of the iod below the eye line
NOSTRIL_DROP = 0.78
EYE_RADIUS = 0.14
BROW_RAISE = 0.22
DEFAULT_IOD = 32.0


@dataclass(frozen=True)
class FaceTruth:
    bte: tuple[float, float]
    left_eye: tuple[int, int]     # image-left
    right_eye: tuple[int, int]
    nose_tip: tuple[int, int]
    nostril_y: int
    iod: float

    def to_dict(self) -> dict:
        return {
            "bte": list(self.bte),
            "left_eye": list(self.left_eye),
            "right_eye": list(self.right_eye),
            "nose_tip": list(self.nose_tip),
            "nostril_y": self.nostril_y,
            "iod": self.iod,
        }


def _disk(canvas, cx, cy, radius, value):
    h, w = canvas.shape
    x0, x1 = max(int(cx - radius - 1), 0), min(int(cx + radius + 2), w)
    y0, y1 = max(int(cy - radius - 1), 0), min(int(cy + radius + 2), h)
    if x0 >= x1 or y0 >= y1:
        return
    yy, xx = np.mgrid[y0:y1, x0:x1]
    inside = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2
    canvas[y0:y1, x0:x1][inside] = value


def _gaussian_blob(canvas, cx, cy, sigma, peak, base=None):
    """Blend toward `peak` with Gaussian weight (smooth, single-row extrema)."""
    h, w = canvas.shape
    reach = int(3 * sigma) + 1
    x0, x1 = max(int(cx) - reach, 0), min(int(cx) + reach + 1, w)
    y0, y1 = max(int(cy) - reach, 0), min(int(cy) + reach + 1, h)
    if x0 >= x1 or y0 >= y1:
        return
    yy, xx = np.mgrid[y0:y1, x0:x1]
    weight = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma * sigma))
    region = canvas[y0:y1, x0:x1]
    region += weight * (peak - region)


def render_face(
    width: int,
    height: int,
    bte: tuple[float, float],
    iod: float = DEFAULT_IOD,
    *,
    left_closed: bool = False,
    right_closed: bool = False,
    rng: np.random.Generator | None = None,
    noise_sigma: float = DEFAULT_NOISE,
) -> tuple[GrayImage, FaceTruth]:
    """One face frame plus its ground truth. Eyes are image-left/right."""
    bx, by = bte
    canvas = np.full((height, width), BACKGROUND, dtype=np.float64)

    # head
    face_cy = by + 0.45 * iod
    yy, xx = np.mgrid[0:height, 0:width]
    head = ((xx - bx) / (1.3 * iod)) ** 2 + ((yy - face_cy) / (1.7 * iod)) ** 2 <= 1.0
    canvas[head] = SKIN

    # cheeks and forehead keep the lower filter row bright
    _gaussian_blob(canvas, bx - 0.45 * iod, by + 0.45 * iod, 0.28 * iod, SKIN + CHEEK_BOOST)
    _gaussian_blob(canvas, bx + 0.45 * iod, by + 0.45 * iod, 0.28 * iod, SKIN + CHEEK_BOOST)
    _gaussian_blob(canvas, bx, by - 0.55 * iod, 0.35 * iod, SKIN + 10)

    left_eye = (int(round(bx - iod / 2)), int(round(by)))
    right_eye = (int(round(bx + iod / 2)), int(round(by)))

    # eyebrows: dark bars above both eyes (also the Hough line target)
    brow_h = max(1, int(round(0.07 * iod)))
    brow_y = int(round(by - BROW_RAISE * iod))
    for ex, _ in (left_eye, right_eye):
        half = int(round(0.22 * iod))
        canvas[brow_y:brow_y + brow_h, max(ex - half, 0):ex + half + 1] = BROW_DARK

    # eyes darken toward their centers so the darkest neighborhood is unique
    for (ex, ey), closed in ((left_eye, left_closed), (right_eye, right_closed)):
        if not closed:
            _gaussian_blob(canvas, ex, ey, 0.09 * iod, EYE_DARK)
            _gaussian_blob(canvas, ex, ey, 0.05 * iod, EYE_DARK - 20)

    # nose bridge: bright soft stripe widening into the tip blob
    tip = (int(round(bx)), int(round(by + TIP_DROP * iod)))
    sigma_x = max(1.2, 0.06 * iod)
    for y in range(int(by + 0.12 * iod), tip[1] + 1):
        span = int(4 * sigma_x)
        x0, x1 = max(tip[0] - span, 0), min(tip[0] + span + 1, width)
        xs = np.arange(x0, x1)
        weight = np.exp(-((xs - bx) ** 2) / (2 * sigma_x * sigma_x))
        canvas[y, x0:x1] += weight * (BRIDGE_BRIGHT - canvas[y, x0:x1])
    _gaussian_blob(canvas, tip[0], tip[1], 0.09 * iod, TIP_BRIGHT)

    # nostril band: dark dip just below the tip
    nostril_y = int(round(by + NOSTRIL_DROP * iod))
    band_half = 0.16 * iod
    sig_y = max(1.0, 0.05 * iod)
    for y in range(int(nostril_y - 3 * sig_y), int(nostril_y + 3 * sig_y) + 1):
        if not 0 <= y < height:
            continue
        wy = math.exp(-((y - nostril_y) ** 2) / (2 * sig_y * sig_y))
        x0 = max(int(bx - band_half), 0)
        x1 = min(int(bx + band_half) + 1, width)
        canvas[y, x0:x1] += wy * (NOSTRIL_DARK - canvas[y, x0:x1])

    # mouth sits below the nose ROI
    mouth_y = int(round(by + 1.08 * iod))
    mouth_half = int(round(0.32 * iod))
    mouth_h = max(1, int(round(0.05 * iod)))
    canvas[mouth_y:mouth_y + mouth_h, max(tip[0] - mouth_half, 0):tip[0] + mouth_half + 1] = MOUTH_DARK

    ramp_y, ramp_x = np.mgrid[0:height, 0:width]
    canvas += ILLUM_GX * (ramp_x - width / 2) + ILLUM_GY * (ramp_y - height / 2)

    if rng is not None and noise_sigma > 0:
        canvas += rng.normal(0.0, noise_sigma, size=canvas.shape)

    frame = GrayImage(np.clip(np.round(canvas), 0, 255).astype(np.uint8))
    truth = FaceTruth((float(bx), float(by)), left_eye, right_eye, tip, nostril_y, iod)
    return frame, truth


def geometry_for_iod(iod: float) -> SsrGeometry:
    """Filter whose outer eye segments center on the pupils: w = 1.5 iod."""
    w = 3 * max(2, round(iod / 2))
    return SsrGeometry(w, w // 2 if (w // 2) % 2 == 0 else w // 2 + 1)


@lru_cache(maxsize=1)
def default_bte_template() -> EyeTemplatePair:
    """Reference template from the canonical noise-free face.

    Extracted at the candidate cluster the filter itself produces, so live
    detections compare patches anchored the same way. Cached: every
    session shares the one canonical template.
    """
    from .images import integral_image
    from .ssr import label_clusters, scan_candidates

    frame, truth = render_face(160, 120, (80.0, 45.0), DEFAULT_IOD, rng=None)
    geom = geometry_for_iod(DEFAULT_IOD)
    clusters = label_clusters(scan_candidates(integral_image(frame), geom))
    anchor = min(
        clusters,
        key=lambda c: (c.centroid[0] - truth.bte[0]) ** 2 + (c.centroid[1] - truth.bte[1]) ** 2,
    )
    patch = extract_candidate_patch(frame, anchor.centroid, geom)
    return make_template(patch.astype(np.float64))


@dataclass(frozen=True)
class BlinkSpec:
    """One scripted eyelid closure, sides in image terms."""

    close_frame: int
    reopen_frame: int          # first frame with the eye open again
    eyes: str                  # "image-left" | "image-right" | "both"


@dataclass(frozen=True)
class SessionScript:
    """Deterministic head-motion and blink schedule for a session."""

    length: int
    width: int = 320
    height: int = 240
    iod: float = DEFAULT_IOD
    start_bte: tuple[float, float] = (160.0, 80.0)
    moves: dict = field(default_factory=dict)    # frame -> (dx, dy) applied that frame
    blinks: tuple[BlinkSpec, ...] = ()
    noise_sigma: float = 2.0
    seed: int = 7

    def bte_at(self, frame: int) -> tuple[float, float]:
        x, y = self.start_bte
        for f in range(frame + 1):
            dx, dy = self.moves.get(f, (0, 0))
            x += dx
            y += dy
        return (x, y)

    def eyelids_at(self, frame: int) -> tuple[bool, bool]:
        """(image_left_closed, image_right_closed)."""
        left = right = False
        for blink in self.blinks:
            if blink.close_frame <= frame < blink.reopen_frame:
                if blink.eyes in ("image-left", "both"):
                    left = True
                if blink.eyes in ("image-right", "both"):
                    right = True
        return left, right

    def render(self, frame: int, rng: np.random.Generator) -> GrayImage:
        left, right = self.eyelids_at(frame)
        img, _ = render_face(
            self.width, self.height, self.bte_at(frame), self.iod,
            left_closed=left, right_closed=right,
            rng=rng, noise_sigma=self.noise_sigma,
        )
        return img

    def frames(self) -> list[GrayImage]:
        rng = np.random.default_rng(self.seed)
        return [self.render(f, rng) for f in range(self.length)]


def acceptance_session() -> tuple[SessionScript, dict]:
    """The 300-frame blink-pipeline script and what it must produce.

    Click sides assume the default mirror convention: a "left" click comes
    from the user's left eye, which is the image-right region. Voluntary
    closures hold 8 frames (300 ms at 30 fps), involuntary both-eye
    closures 3 frames; one closure happens mid-motion and must be
    swallowed by the stillness gate.
    """
    moves = {}
    for f in range(40, 60):
        moves[f] = (2, 0)
    for f in range(100, 110):
        moves[f] = (0, 2)
    for f in range(240, 260):
        moves[f] = (-2, 0)
    script = SessionScript(
        length=300,
        start_bte=(140.0, 80.0),
        moves=moves,
        blinks=(
            BlinkSpec(20, 23, "both"),           # involuntary: template source
            BlinkSpec(80, 88, "image-right"),    # voluntary left click
            BlinkSpec(130, 138, "image-right"),  # voluntary left click
            BlinkSpec(160, 168, "image-left"),   # voluntary right click
            BlinkSpec(190, 198, "image-right"),  # voluntary left click
            BlinkSpec(220, 223, "both"),         # involuntary again
            BlinkSpec(248, 256, "image-right"),  # mid-motion: must not click
        ),
    )
    expected = {
        "clicks": [("left", 90), ("left", 140), ("right", 170), ("left", 200)],
        "involuntary_blinks": 4,   # two physical both-eye blinks, one record per side
        "voluntary_blinks": 4,
        "first_template_by_frame": 35,
    }
    return script, expected


def write_session_fixture(out_dir: str | Path) -> dict:
    """Materialize the acceptance session as PGM frames plus expectations."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    script, expected = acceptance_session()
    for idx, frame in enumerate(script.frames()):
        write_pgm(frame, out / f"frame_{idx:05d}.pgm")
    manifest = {"length": script.length, "expected": expected}
    (out / "expected.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def write_detection_fixtures(out_dir: str | Path, seed: int, renders_per_scale: int = 30,
                             iods: tuple[float, ...] = (24.0, 32.0, 48.0)) -> dict:
    """PGM renders at several scales plus a ground-truth manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    manifest = {"seed": seed, "renders": []}
    for iod in iods:
        for k in range(renders_per_scale):
            margin = 1.9 * iod
            bx = float(rng.uniform(margin, 320 - margin))
            by = float(rng.uniform(0.8 * iod, 240 - 1.4 * iod))
            frame, truth = render_face(320, 240, (bx, by), iod, rng=rng)
            name = f"face_iod{int(iod)}_{k:03d}.pgm"
            write_pgm(frame, out / name)
            manifest["renders"].append({"file": name, **truth.to_dict()})
    (out / "ground_truth.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest
