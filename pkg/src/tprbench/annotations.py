"""JSON-Lines annotation ingestion.

One record per line: {"image_id": str, "person_id": str, "split":
"train"|"test", "captions": [str, ...], "source": str?}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .exceptions import AnnotationFormatError, DuplicateIdError

SPLITS = ("train", "test")


@dataclass(frozen=True)
class AnnotationRecord:
    """One gallery image: its identity, split, and caption queries."""

    image_id: str
    person_id: str
    split: str
    captions: tuple[str, ...]
    source: str | None = None


def _require_str(obj: dict, field: str, line_no: int) -> str:
    value = obj.get(field)
    if not isinstance(value, str) or not value:
        raise AnnotationFormatError(f"line {line_no}: field '{field}' must be a non-empty string")
    return value


def _parse_record(obj: dict, line_no: int) -> AnnotationRecord:
    image_id = _require_str(obj, "image_id", line_no)
    person_id = _require_str(obj, "person_id", line_no)
    split = _require_str(obj, "split", line_no)
    if split not in SPLITS:
        raise AnnotationFormatError(f"line {line_no}: field 'split' must be one of {SPLITS}")
    captions = obj.get("captions")
    if not isinstance(captions, list) or not captions or not all(isinstance(c, str) for c in captions):
        raise AnnotationFormatError(f"line {line_no}: field 'captions' must be a non-empty list of strings")
    source = obj.get("source")
    if source is not None and not isinstance(source, str):
        raise AnnotationFormatError(f"line {line_no}: field 'source' must be a string when present")
    return AnnotationRecord(
        image_id=image_id,
        person_id=person_id,
        split=split,
        captions=tuple(captions),
        source=source,
    )


def load_annotations(path: str | Path) -> list[AnnotationRecord]:
    """Read and validate a JSONL annotation file, preserving file order."""
    records: list[AnnotationRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AnnotationFormatError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise AnnotationFormatError(f"line {line_no}: record must be a JSON object")
            record = _parse_record(obj, line_no)
            if record.image_id in seen:
                raise DuplicateIdError(f"line {line_no}: duplicate image_id '{record.image_id}'")
            seen.add(record.image_id)
            records.append(record)
    return records


def write_annotations(records: Iterable[AnnotationRecord], path: str | Path) -> None:
    """Write records as JSONL, one object per line, stable key order."""
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            obj = {
                "image_id": r.image_id,
                "person_id": r.person_id,
                "split": r.split,
                "captions": list(r.captions),
            }
            if r.source is not None:
                obj["source"] = r.source
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
