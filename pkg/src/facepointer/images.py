"""Pixel-buffer primitives shared by all detectors.

Grayscale conversion, integral images with constant-time rectangle sums,
patch normalization, and the PGM/PNG fixture I/O. Coordinates are (x, y)
with x running along image width; buffers are row-major numpy arrays
indexed [y, x].
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegeneratePatch, InvalidInput

# BT.601 luma weights.
_LUMA = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class GrayImage:
    """8-bit luminance buffer, shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 2 or p.size == 0:
            raise InvalidInput(f"gray image must be non-empty 2-D, got shape {p.shape}")
        if p.dtype != np.uint8:
            raise InvalidInput(f"gray image must be uint8, got {p.dtype}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle: top-left (x, y), extent w x h, half-open."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise InvalidInput(f"rect extent must be >= 1, got {self.w}x{self.h}")

    @property
    def x2(self) -> int:
        return self.x + self.w

    @property
    def y2(self) -> int:
        return self.y + self.h

    def inside(self, width: int, height: int) -> bool:
        return self.x >= 0 and self.y >= 0 and self.x2 <= width and self.y2 <= height


@dataclass(frozen=True)
class IntegralImage:
    """Summed-area table of a GrayImage.

    `padded` is (height+1, width+1) int64 with a zero top row and left
    column, so the four-corner rectangle sum never branches on negative
    indices: reads at x<0 or y<0 land on the zero border. int64 holds
    4096x4096 images of 255s with room to spare.
    """

    padded: np.ndarray

    @property
    def width(self) -> int:
        return self.padded.shape[1] - 1

    @property
    def height(self) -> int:
        return self.padded.shape[0] - 1

    @property
    def values(self) -> np.ndarray:
        """The (height, width) cumulative-sum table itself."""
        return self.padded[1:, 1:]


@dataclass(frozen=True)
class NormalizedPatch:
    """Real-valued patch with mean 128 and population std 64."""

    data: np.ndarray

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


def to_grayscale(rgb: np.ndarray | bytes, width: int, height: int) -> GrayImage:
    """Convert a packed 8-bit RGB buffer to luminance (BT.601, rounded)."""
    buf = np.frombuffer(rgb, dtype=np.uint8) if isinstance(rgb, (bytes, bytearray)) else np.asarray(rgb, dtype=np.uint8).ravel()
    if buf.size != 3 * width * height:
        raise InvalidInput(f"rgb buffer has {buf.size} bytes, expected {3 * width * height}")
    rgbw = buf.reshape(height, width, 3).astype(np.float64)
    lum = rgbw[:, :, 0] * _LUMA[0] + rgbw[:, :, 1] * _LUMA[1] + rgbw[:, :, 2] * _LUMA[2]
    return GrayImage(np.clip(np.round(lum), 0, 255).astype(np.uint8))


def integral_image(img: GrayImage) -> IntegralImage:
    """Build the summed-area table ii(x,y) = sum of pixels at x'<=x, y'<=y.

    Equivalent to the row-sum/column-sum recurrence pair computed in one
    pass; here each cumsum axis is one of the two recurrences.
    """
    h, w = img.pixels.shape
    padded = np.zeros((h + 1, w + 1), dtype=np.int64)
    np.cumsum(img.pixels, axis=0, dtype=np.int64, out=padded[1:, 1:])
    np.cumsum(padded[1:, 1:], axis=1, out=padded[1:, 1:])
    return IntegralImage(padded)


def rect_sum(ii: IntegralImage, r: Rect) -> int:
    """Sum of source pixels inside r via four table reads."""
    if not r.inside(ii.width, ii.height):
        raise InvalidInput(f"rect {r} outside {ii.width}x{ii.height} image")
    p = ii.padded
    return int(p[r.y2, r.x2] - p[r.y, r.x2] - p[r.y2, r.x] + p[r.y, r.x])


def normalize_patch(patch: np.ndarray | GrayImage) -> NormalizedPatch:
    """Affinely remap a patch to mean 128 / population std 64."""
    data = patch.pixels if isinstance(patch, GrayImage) else np.asarray(patch)
    if data.size < 2:
        raise InvalidInput("patch needs at least 2 pixels")
    data = data.astype(np.float64)
    std = float(data.std())
    if std == 0.0:
        raise DegeneratePatch("zero-variance patch cannot be normalized")
    return NormalizedPatch((data - data.mean()) * (64.0 / std) + 128.0)


def extract_patch(img: GrayImage, r: Rect) -> np.ndarray:
    """Copy of the pixels inside r, shape (r.h, r.w)."""
    if not r.inside(img.width, img.height):
        raise InvalidInput(f"rect {r} outside {img.width}x{img.height} image")
    return img.pixels[r.y:r.y2, r.x:r.x2].copy()


def resample_nearest(pixels: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Nearest-neighbor resize; the only resampling the multi-scale scan needs."""
    in_h, in_w = pixels.shape
    ys = np.minimum((np.arange(out_h) + 0.5) * in_h / out_h, in_h - 1).astype(np.intp)
    xs = np.minimum((np.arange(out_w) + 0.5) * in_w / out_w, in_w - 1).astype(np.intp)
    return pixels[np.ix_(ys, xs)]


def read_pgm(path: str | Path) -> GrayImage:
    """Read a binary PGM (P5, maxval 255)."""
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P5"):
        raise InvalidInput(f"{path}: not a binary PGM")
    # Header = 4 whitespace-separated tokens, # comments run to end of line.
    tokens, pos = [], 2
    while len(tokens) < 3 and pos < len(raw):
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if pos > start:
            tokens.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise InvalidInput(f"{path}: malformed PGM header") from exc
    if maxval != 255:
        raise InvalidInput(f"{path}: only maxval 255 supported, got {maxval}")
    data = np.frombuffer(raw, dtype=np.uint8, count=width * height, offset=pos)
    if data.size != width * height:
        raise InvalidInput(f"{path}: truncated pixel data")
    return GrayImage(data.reshape(height, width).copy())


def write_pgm(img: GrayImage, path: str | Path) -> None:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.pixels.tobytes())


def read_image(path: str | Path) -> GrayImage:
    """Read a PGM or PNG frame as grayscale."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return read_pgm(path)
    from PIL import Image

    with Image.open(path) as im:
        if im.mode == "L":
            return GrayImage(np.asarray(im, dtype=np.uint8).copy())
        rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
        return to_grayscale(rgb.tobytes(), rgb.shape[1], rgb.shape[0])
