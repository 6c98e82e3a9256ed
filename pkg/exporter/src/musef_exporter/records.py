"""Raw corpus records and the JSON-lines reader that produces them.

One record per line: {"id": str, "text": str|null, "image": str|null,
"label": 0|1}. A null text or image marks the modality as absent; at
least one of the two must be present.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import InputError

_FIELDS = ("id", "text", "image", "label")


@dataclass(frozen=True)
class RawRecord:
    id: str
    text: str | None
    image: str | None
    label: int

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise InputError(f"record id must be a non-empty string, got {self.id!r}")
        if self.text is not None and not isinstance(self.text, str):
            raise InputError(f"record {self.id!r}: text must be a string or null")
        if self.image is not None and not isinstance(self.image, str):
            raise InputError(f"record {self.id!r}: image must be a path string or null")
        if self.text is None and self.image is None:
            raise InputError(f"record {self.id!r}: text and image are both null")
        if self.label is True or self.label is False or self.label not in (0, 1):
            raise InputError(f"record {self.id!r}: label must be 0 or 1, got {self.label!r}")


def read_records(path: str) -> list[RawRecord]:
    """Parse a JSON-lines corpus file into validated records.

    Errors carry the 1-based line number. Duplicate ids are rejected
    because MUSEF requires ids to be unique within a file.
    """
    records: list[RawRecord] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                raise InputError(f"line {lineno}: blank line")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise InputError(f"line {lineno}: expected an object, got {type(obj).__name__}")
            missing = [k for k in _FIELDS if k not in obj]
            if missing:
                raise InputError(f"line {lineno}: missing fields {missing}")
            extra = sorted(set(obj) - set(_FIELDS))
            if extra:
                raise InputError(f"line {lineno}: unknown fields {extra}")
            try:
                rec = RawRecord(obj["id"], obj["text"], obj["image"], obj["label"])
            except InputError as exc:
                raise InputError(f"line {lineno}: {exc}") from exc
            if rec.id in seen:
                raise InputError(f"line {lineno}: duplicate record id {rec.id!r}")
            seen.add(rec.id)
            records.append(rec)
    if not records:
        raise InputError(f"{path}: corpus is empty")
    return records
