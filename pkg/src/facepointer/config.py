"""Pipeline configuration: every tunable the detectors leave open.

One JSON document, strict parsing (unknown keys are typos and fail fast),
bit-exact serialization round-trip.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidInput
from .ssr import SsrGeometry


@dataclass(frozen=True)
class SsrConfig:
    filter_width: int = 24
    filter_height: int = 12
    scales: tuple[float, ...] = (1.0, 1.5, 2.0, 3.0)
    accept_threshold: float = 1500000.0
    template_path: str | None = None  # None: built-in synthetic default

    def geometries(self) -> list[SsrGeometry]:
        out = []
        for s in self.scales:
            w = 3 * max(2, round(self.filter_width * s / 3))
            h = 2 * max(2, round(self.filter_height * s / 2))
            out.append(SsrGeometry(w, h))
        return out


@dataclass(frozen=True)
class NoseConfig:
    s2_width: int | None = None   # None: ceil(roi_side / 8)
    template_size: int = 15
    min_confidence: float = 0.3
    lost_frames: int = 15


@dataclass(frozen=True)
class MotionConfig:
    pixel_threshold: int = 15
    count_fraction: float = 0.08       # of the eye box's pixels
    min_still_frames: int = 3
    move_eps: float = 1.5
    blink_window_frames: int = 10
    voluntary_min_ms: float = 250.0
    reinit_threshold: float = 0.55
    reinit_patience_frames: int = 10   # ride out correlation dips from unguarded blinks
    eye_box_scale: float = 0.45        # eye box side as a fraction of iod
    eye_template_size: int = 15
    search_radius: int | None = None   # None: template side
    template_margin_frames: int = 3
    ring_frames: int = 32
    mirror_sides: bool = True          # left click = image-right eye (selfie view)


@dataclass(frozen=True)
class PointerConfig:
    screen_width: int = 1280
    screen_height: int = 720
    gain: float = 4.0
    mode: str = "absolute"
    mirror_x: bool = False
    dead_zone_px: float = 2.0
    smoothing_alpha: float = 0.5


@dataclass(frozen=True)
class PipelineConfig:
    frame_rate: float = 30.0
    ssr: SsrConfig = field(default_factory=SsrConfig)
    nose: NoseConfig = field(default_factory=NoseConfig)
    motion: MotionConfig = field(default_factory=MotionConfig)
    pointer: PointerConfig = field(default_factory=PointerConfig)

    def __post_init__(self):
        if self.frame_rate <= 0:
            raise InvalidInput("frame rate must be positive")
        if self.pointer.mode not in ("absolute", "relative"):
            raise InvalidInput(f"unknown pointer mode {self.pointer.mode!r}")
        if not 0.0 < self.pointer.smoothing_alpha <= 1.0:
            raise InvalidInput("smoothing factor must be in (0, 1]")
        if not 1 <= self.motion.pixel_threshold <= 255:
            raise InvalidInput("pixel threshold must be in [1, 255]")
        if self.motion.blink_window_frames < 1:
            raise InvalidInput("blink window must be at least one frame")
        if not 0.0 < self.motion.count_fraction < 1.0:
            raise InvalidInput("motion count fraction must be in (0, 1)")
        if self.nose.template_size % 2 == 0 or self.motion.eye_template_size % 2 == 0:
            raise InvalidInput("template sizes must be odd")
        self.ssr.geometries()  # validates width/height divisibility per scale

    @property
    def frame_period_ms(self) -> float:
        return 1000.0 / self.frame_rate


_SECTIONS = {"ssr": SsrConfig, "nose": NoseConfig, "motion": MotionConfig, "pointer": PointerConfig}


def _build_section(cls, data: dict, context: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise InvalidInput(f"unknown config key(s) in {context}: {sorted(unknown)}")
    kwargs = dict(data)
    if cls is SsrConfig and "scales" in kwargs:
        kwargs["scales"] = tuple(kwargs["scales"])
    return cls(**kwargs)


def config_from_dict(data: dict) -> PipelineConfig:
    if not isinstance(data, dict):
        raise InvalidInput("config must be a JSON object")
    unknown = set(data) - set(_SECTIONS) - {"frame_rate"}
    if unknown:
        raise InvalidInput(f"unknown config key(s): {sorted(unknown)}")
    kwargs = {}
    if "frame_rate" in data:
        kwargs["frame_rate"] = data["frame_rate"]
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _build_section(cls, data[name], name)
    return PipelineConfig(**kwargs)


def config_to_dict(cfg: PipelineConfig) -> dict:
    out = {"frame_rate": cfg.frame_rate}
    for name in _SECTIONS:
        section = dataclasses.asdict(getattr(cfg, name))
        if name == "ssr":
            section["scales"] = list(section["scales"])
        out[name] = section
    return out


def load_config(path: str | Path) -> PipelineConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(data)


def save_config(cfg: PipelineConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n")
