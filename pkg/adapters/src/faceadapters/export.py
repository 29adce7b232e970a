"""Batch export: run the models over an image directory, write JSONL files.

`detections.jsonl` carries one line per readable image; `embeddings.jsonl`
carries one line per detected face (frame index = position of the image in
sorted order). Unreadable images are skipped with a warning and counted in
the returned summary.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from .detector import CascadeDetector
from .embedder import DctEmbedder
from .imaging import crop_window, load_rgb, to_gray
from .manifest import AdapterManifest

IMAGE_SUFFIXES = (".ppm", ".pnm", ".png", ".jpg", ".jpeg")


def export(image_dir: str | Path, out_dir: str | Path,
           manifest: AdapterManifest = AdapterManifest()) -> dict:
    image_dir = Path(image_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    detector = CascadeDetector(manifest.detector)
    embedder = DctEmbedder(manifest.embedder)

    images = sorted(p for p in image_dir.iterdir()
                    if p.suffix.lower() in IMAGE_SUFFIXES)
    if not images:
        raise ValueError(f"no images found in {image_dir}")

    summary = {"images": 0, "skipped": 0, "faces": 0}
    with open(out_dir / "detections.jsonl", "w", encoding="utf-8") as det_out, \
            open(out_dir / "embeddings.jsonl", "w", encoding="utf-8") as emb_out:
        for frame, path in enumerate(images):
            try:
                gray = to_gray(load_rgb(path))
            except Exception as exc:
                print(f"warning: skipping unreadable image {path.name}: {exc}",
                      file=sys.stderr)
                summary["skipped"] += 1
                continue
            boxes = detector.detect(gray)
            det_out.write(json.dumps({"image": path.name, "boxes": boxes}) + "\n")
            summary["images"] += 1
            for k, box in enumerate(boxes):
                crop = crop_window(gray, box["x"], box["y"], box["w"], box["h"])
                emb_out.write(json.dumps({
                    "frame": frame,
                    "face_id": f"{frame}:{k}",
                    "box": {key: box[key] for key in ("x", "y", "w", "h")},
                    "vec": embedder.embed(crop),
                }) + "\n")
                summary["faces"] += 1
    return summary
