"""Stored detection and embedding files (JSON lines).

Detection line:  {"image": "<id>", "boxes": [{"x":..,"y":..,"w":..,"h":..,"score":..}]}
Embedding line:  {"frame": <int>, "face_id": "<id>", "box": {...}, "vec": [128 floats]}
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from ..errors import ParseError
from ..geometry import Box2D, ScoredBox
from ..matchkit import EMBED_DIM, FaceInstance


def _require(condition: bool, message: str, line_number: int) -> None:
    if not condition:
        raise ParseError(message, line_number)


def _box_from_json(obj, line_number: int) -> Box2D:
    _require(isinstance(obj, dict), "box must be an object", line_number)
    for key in ("x", "y", "w", "h"):
        _require(key in obj, f"box missing field {key!r}", line_number)
        _require(isinstance(obj[key], (int, float)) and not isinstance(obj[key], bool),
                 f"box field {key!r} must be a number", line_number)
        _require(math.isfinite(obj[key]), f"box field {key!r} must be finite", line_number)
    _require(obj["w"] > 0 and obj["h"] > 0,
             f"box sides must be positive, got w={obj['w']} h={obj['h']}", line_number)
    return Box2D(float(obj["x"]), float(obj["y"]), float(obj["w"]), float(obj["h"]))


def box_to_json(box: Box2D) -> dict:
    return {"x": box.x, "y": box.y, "w": box.w, "h": box.h}


def load_detections(path: str | Path) -> dict[str, list[ScoredBox]]:
    """Load a detection JSONL file; duplicate image ids are concatenated."""
    result: dict[str, list[ScoredBox]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None
            _require(isinstance(obj, dict), "expected a JSON object", lineno)
            _require(isinstance(obj.get("image"), str), "missing string field 'image'", lineno)
            _require(isinstance(obj.get("boxes"), list), "missing list field 'boxes'", lineno)
            boxes = []
            for entry in obj["boxes"]:
                box = _box_from_json(entry, lineno)
                _require("score" in entry, "box missing field 'score'", lineno)
                score = entry["score"]
                _require(isinstance(score, (int, float)) and not isinstance(score, bool)
                         and math.isfinite(score), "score must be a finite number", lineno)
                boxes.append(ScoredBox(box, float(score)))
            result.setdefault(obj["image"], []).extend(boxes)
    return result


def write_detections(path: str | Path, detections: Mapping[str, Iterable[ScoredBox]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for image_id, boxes in detections.items():
            entry = {
                "image": image_id,
                "boxes": [dict(box_to_json(b.box), score=b.score) for b in boxes],
            }
            fh.write(json.dumps(entry) + "\n")


def load_embeddings(path: str | Path) -> list[FaceInstance]:
    """Load an embedding JSONL file into face instances (raw, unnormalized)."""
    faces: list[FaceInstance] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None
            _require(isinstance(obj, dict), "expected a JSON object", lineno)
            _require(isinstance(obj.get("frame"), int) and not isinstance(obj.get("frame"), bool)
                     and obj["frame"] >= 0, "missing non-negative int field 'frame'", lineno)
            _require(isinstance(obj.get("face_id"), str), "missing string field 'face_id'", lineno)
            box = _box_from_json(obj.get("box"), lineno)
            vec = obj.get("vec")
            _require(isinstance(vec, list) and len(vec) == EMBED_DIM,
                     f"'vec' must be a list of {EMBED_DIM} numbers", lineno)
            values = np.asarray(vec, dtype=np.float64)
            _require(bool(np.all(np.isfinite(values))), "'vec' entries must be finite", lineno)
            faces.append(FaceInstance(
                frame_index=obj["frame"],
                face_id=obj["face_id"],
                box=box,
                embedding=values,
            ))
    return faces


def write_embeddings(path: str | Path, faces: Iterable[FaceInstance]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for face in faces:
            if face.embedding is None:
                raise ValueError(f"face {face.face_id!r} has no embedding")
            entry = {
                "frame": face.frame_index,
                "face_id": face.face_id,
                "box": box_to_json(face.box),
                "vec": [float(v) for v in face.embedding],
            }
            fh.write(json.dumps(entry) + "\n")
