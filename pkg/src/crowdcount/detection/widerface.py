"""WIDERFACE ground-truth annotation file parsing and serialization.

Format: an image path line, a face-count line, then per face one line of
ten integers `x y w h blur expression illumination invalid occlusion pose`.
Images with zero faces carry the dataset's conventional single line of
ten zeros.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import IO, Iterable

from ..errors import ParseError
from ..geometry import Box2D

_ZERO_LINE = "0 0 0 0 0 0 0 0 0 0"

# attribute -> (column, max value); x y w h occupy columns 0-3
_FLAG_RANGES = {
    "blur": (4, 2),
    "expression": (5, 1),
    "illumination": (6, 1),
    "invalid": (7, 1),
    "occlusion": (8, 2),
    "pose": (9, 1),
}


class Blur(enum.IntEnum):
    NONE = 0
    NORMAL = 1
    HEAVY = 2


@dataclass(frozen=True)
class Annotation:
    image_id: str
    box: Box2D
    blur: Blur = Blur.NONE
    expression: int = 0
    illumination: int = 0
    invalid: int = 0
    occlusion: int = 0
    pose: int = 0


@dataclass
class WiderfaceParseResult:
    records: list[tuple[str, list[Annotation]]]
    n_dropped_zero_size: int = 0

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def parse_widerface(stream: IO[str] | Iterable[str]) -> WiderfaceParseResult:
    """Parse a ground-truth stream into per-image annotation groups.

    Zero-size boxes (w or h equal to 0) are dropped and counted; malformed
    records raise ParseError with the offending line number.
    """
    lines = [line.rstrip("\n") for line in stream]
    records: list[tuple[str, list[Annotation]]] = []
    dropped = 0
    pos = 0
    while pos < len(lines):
        image_id = lines[pos].strip()
        pos += 1
        if not image_id:
            continue  # tolerate trailing blank lines
        if pos >= len(lines):
            raise ParseError(f"missing face count for {image_id!r}", pos + 1)
        count_text = lines[pos].strip()
        pos += 1
        try:
            count = int(count_text)
        except ValueError:
            raise ParseError(f"malformed face count {count_text!r}", pos) from None
        if count < 0:
            raise ParseError(f"negative face count {count}", pos)
        annotations: list[Annotation] = []
        if count == 0:
            if pos >= len(lines) or lines[pos].strip() != _ZERO_LINE:
                raise ParseError("expected the conventional zero line after count 0", pos + 1)
            pos += 1
        for _ in range(count):
            if pos >= len(lines):
                raise ParseError(f"record for {image_id!r} ends after "
                                 f"{len(annotations)} of {count} faces", pos + 1)
            fields = lines[pos].split()
            pos += 1
            if len(fields) != 10:
                raise ParseError(f"expected 10 fields, got {len(fields)}", pos)
            try:
                values = [int(f) for f in fields]
            except ValueError:
                raise ParseError(f"non-integer attribute field in {lines[pos - 1]!r}", pos) from None
            x, y, w, h = values[:4]
            if w < 0 or h < 0:
                raise ParseError(f"negative box size w={w} h={h}", pos)
            for name, (col, top) in _FLAG_RANGES.items():
                if not 0 <= values[col] <= top:
                    raise ParseError(f"{name} flag {values[col]} outside 0..{top}", pos)
            if w == 0 or h == 0:
                dropped += 1
                continue
            annotations.append(Annotation(
                image_id=image_id,
                box=Box2D(float(x), float(y), float(w), float(h)),
                blur=Blur(values[4]),
                expression=values[5],
                illumination=values[6],
                invalid=values[7],
                occlusion=values[8],
                pose=values[9],
            ))
        records.append((image_id, annotations))
    return WiderfaceParseResult(records, dropped)


def serialize_widerface(records: Iterable[tuple[str, list[Annotation]]]) -> str:
    """Render records in the canonical file layout (round-trips parse output)."""
    out: list[str] = []
    for image_id, annotations in records:
        out.append(image_id)
        out.append(str(len(annotations)))
        if not annotations:
            out.append(_ZERO_LINE)
        for a in annotations:
            out.append(" ".join(str(v) for v in (
                int(a.box.x), int(a.box.y), int(a.box.w), int(a.box.h),
                int(a.blur), a.expression, a.illumination,
                a.invalid, a.occlusion, a.pose,
            )))
    return "\n".join(out) + "\n" if out else ""
