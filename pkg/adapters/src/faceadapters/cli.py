"""Entry point: `faceadapter serve|export`."""

from __future__ import annotations

import argparse
import json
import sys

from .export import export
from .manifest import load_manifest
from .serve import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="faceadapter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="speak the detect/embed line protocol on stdio")
    p.add_argument("--manifest", help="JSON manifest; omitted: bundled defaults")

    p = sub.add_parser("export", help="write detection and embedding JSONL files")
    p.add_argument("--images-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")

    args = parser.parse_args(argv)
    manifest = load_manifest(args.manifest)
    if args.command == "serve":
        return serve(manifest)
    summary = export(args.images_dir, args.out, manifest)
    print(json.dumps(summary))
    return 0 if summary["skipped"] == 0 else 3


if __name__ == "__main__":
    sys.exit(main())
