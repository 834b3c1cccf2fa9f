"""Append-only JSON-lines store of detection results."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

log = logging.getLogger(__name__)

_LABELS = ("clean", "infested")


@dataclass(frozen=True)
class DetectionRecord:
    timestamp: str          # ISO-8601, UTC
    device_id: int
    clip_start: int         # first sample index of the clip within the device stream
    clip_length: int        # samples
    label: str              # "clean" | "infested"
    p_infested: float
    checkpoint_id: str

    def __post_init__(self):
        if self.label not in _LABELS:
            raise ValueError(f"label must be one of {_LABELS}, got {self.label!r}")
        if not 0.0 <= self.p_infested <= 1.0:
            raise ValueError(f"p_infested must be in [0, 1], got {self.p_infested}")
        if self.clip_start < 0 or self.clip_length < 1:
            raise ValueError("clip span must be non-negative start and positive length")

    def to_json_line(self) -> str:
        return json.dumps({
            "timestamp": self.timestamp,
            "device_id": self.device_id,
            "clip_start": self.clip_start,
            "clip_length": self.clip_length,
            "label": self.label,
            "p_infested": self.p_infested,
            "checkpoint_id": self.checkpoint_id,
        })

    @classmethod
    def from_dict(cls, d: dict) -> "DetectionRecord":
        return cls(
            timestamp=str(d["timestamp"]),
            device_id=int(d["device_id"]),
            clip_start=int(d["clip_start"]),
            clip_length=int(d["clip_length"]),
            label=str(d["label"]),
            p_infested=float(d["p_infested"]),
            checkpoint_id=str(d["checkpoint_id"]),
        )


def append_records(path: str | Path, records: list[DetectionRecord]) -> None:
    """Append records as JSON lines. Callers must serialize writes themselves."""
    with open(path, "a", encoding="utf-8") as fh:
        for record in records:
            fh.write(record.to_json_line() + "\n")


def load_store(path: str | Path) -> tuple[list[DetectionRecord], int]:
    """All parseable records plus the count of corrupt lines skipped."""
    records: list[DetectionRecord] = []
    corrupt = 0
    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(DetectionRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            corrupt += 1
            log.warning("skipping corrupt store line %d in %s", line_no, path)
    return records, corrupt


def query_store(path: str | Path, device_id: int | None = None, label: str | None = None,
                since: str | None = None, until: str | None = None) -> list[DetectionRecord]:
    """Filtered records in timestamp order. Corrupt lines are skipped with a warning."""
    records, _ = load_store(path)
    out = []
    for record in records:
        if device_id is not None and record.device_id != device_id:
            continue
        if label is not None and record.label != label:
            continue
        if since is not None and record.timestamp < since:
            continue
        if until is not None and record.timestamp > until:
            continue
        out.append(record)
    out.sort(key=lambda r: r.timestamp)
    return out
