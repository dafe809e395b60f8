"""Event records and the JSON Lines log."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable

from .errors import InvalidInput

SCHEMA_VERSION = 1
EVENT_KINDS = ("face", "nose", "blink", "pointer", "click", "reinit", "metrics")
_RESERVED = {"v", "frame", "kind"}


@dataclass(frozen=True)
class EventRecord:
    frame: int
    kind: str
    payload: dict

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise InvalidInput(f"unknown event kind {self.kind!r}")
        if _RESERVED & set(self.payload):
            raise InvalidInput("payload keys must not shadow the envelope fields")


def to_json_line(record: EventRecord) -> str:
    body = {"v": SCHEMA_VERSION, "frame": record.frame, "kind": record.kind}
    body.update(record.payload)
    return json.dumps(body, sort_keys=True, separators=(",", ":"))


def from_json_line(line: str) -> EventRecord:
    data = json.loads(line)
    if data.get("v") != SCHEMA_VERSION:
        raise InvalidInput(f"unsupported event schema version {data.get('v')!r}")
    frame = data.pop("frame")
    kind = data.pop("kind")
    data.pop("v")
    return EventRecord(frame, kind, data)


class EventLogWriter:
    """Append-only JSON Lines sink."""

    def __init__(self, stream: IO[str]):
        self._stream = stream
        self._last_frame = -1

    def write(self, record: EventRecord) -> None:
        if record.frame < self._last_frame:
            raise InvalidInput("event log frames must be non-decreasing")
        self._last_frame = record.frame
        self._stream.write(to_json_line(record) + "\n")


def write_event_log(records: Iterable[EventRecord], path: str | Path) -> None:
    with open(path, "w") as fh:
        writer = EventLogWriter(fh)
        for record in records:
            writer.write(record)


def read_event_log(path: str | Path) -> list[EventRecord]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            out.append(from_json_line(line))
    return out
