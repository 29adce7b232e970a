"""Line-delimited JSON server: `detect` and `embed` over stdin/stdout.

Request/response framing mirrors the orchestrator's protocol:

    {"id": 1, "op": "detect", "image_path": "...", "scale": 1.0}
    {"id": 1, "boxes": [...]}
    {"id": 2, "op": "embed", "image_path": "...", "box": {...}}
    {"id": 2, "vec": [...]}

Per-request failures come back as {"id": .., "error": "..."} and the
process stays alive; a model-load failure at startup prints one error line
and exits nonzero.
"""

from __future__ import annotations

import json
import sys

from .detector import CascadeDetector
from .embedder import DctEmbedder
from .imaging import crop_window, load_rgb, to_gray
from .manifest import AdapterManifest


class AdapterService:
    def __init__(self, manifest: AdapterManifest):
        self.manifest = manifest
        self.detector = CascadeDetector(manifest.detector)
        self.embedder = DctEmbedder(manifest.embedder)

    def handle(self, request: dict) -> dict:
        op = request.get("op")
        if op == "detect":
            gray = to_gray(load_rgb(request["image_path"]))
            return {"boxes": self.detector.detect(gray)}
        if op == "embed":
            gray = to_gray(load_rgb(request["image_path"]))
            box = request["box"]
            crop = crop_window(gray, box["x"], box["y"], box["w"], box["h"])
            return {"vec": self.embedder.embed(crop)}
        raise ValueError(f"unknown op {op!r}")


def serve(manifest: AdapterManifest, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    try:
        service = AdapterService(manifest)
    except Exception as exc:  # startup failure: one line, then exit
        print(json.dumps({"error": f"adapter startup failed: {exc}"}),
              file=stdout, flush=True)
        return 2
    for line in stdin:
        if not line.strip():
            continue
        rid = None
        try:
            request = json.loads(line)
            rid = request.get("id")
            response = service.handle(request)
            response["id"] = rid
        except Exception as exc:
            response = {"id": rid, "error": str(exc)}
        print(json.dumps(response), file=stdout, flush=True)
    return 0
