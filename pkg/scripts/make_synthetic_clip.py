#!/usr/bin/env python3
"""Write a seeded synthetic clip as CLI-consumable JSONL files.

Produces <out>/embeddings.jsonl, <out>/detections.jsonl and
<out>/truth.json (the true identity count), e.g.:

    python scripts/make_synthetic_clip.py --seed 7 --out /tmp/clip
    crowdcount count --embeddings /tmp/clip/embeddings.jsonl \
        --detections /tmp/clip/detections.jsonl --stride 10 --out /tmp/run
"""

import argparse
import json
from pathlib import Path

from crowdcount.detection.storage import write_detections, write_embeddings
from crowdcount.synthetic import SyntheticClipSpec, make_synthetic_clip


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--identities", type=int, default=20)
    parser.add_argument("--frames", type=int, default=50)
    parser.add_argument("--stride", type=int, default=10)
    parser.add_argument("--out", required=True)
    args = parser.parse_args()

    clip = make_synthetic_clip(SyntheticClipSpec(
        n_identities=args.identities, n_frames=args.frames,
        stride=args.stride, seed=args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_embeddings(out / "embeddings.jsonl", clip.all_faces())
    write_detections(out / "detections.jsonl", clip.detections())
    (out / "truth.json").write_text(json.dumps({
        "n_identities": clip.n_identities,
        "analyzed_frames": clip.analyzed_frames,
        "detected_in_analyzed": clip.detected_in_analyzed(),
        "noise_scale": clip.noise_scale,
    }, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {out}/embeddings.jsonl, detections.jsonl, truth.json "
          f"({clip.n_identities} identities, {args.frames} frames)")


if __name__ == "__main__":
    main()
