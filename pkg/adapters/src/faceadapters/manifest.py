"""Adapter manifest: which models to serve and how."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

PROTOCOL_VERSION = "1"


@dataclass(frozen=True)
class DetectorSettings:
    cascade_path: str | None = None   # None: the bundled pretrained LBP cascade
    scale_factor: float = 1.2
    step_ratio: float = 1.0
    min_size: int = 24
    max_size: int | None = None       # None: the full image


@dataclass(frozen=True)
class EmbedderSettings:
    crop_size: int = 64
    dimensions: int = 128


@dataclass(frozen=True)
class AdapterManifest:
    name: str = "skimage-lbp-dct"
    protocol_version: str = PROTOCOL_VERSION
    deterministic: bool = True
    detector: DetectorSettings = field(default_factory=DetectorSettings)
    embedder: EmbedderSettings = field(default_factory=EmbedderSettings)

    def __post_init__(self):
        if self.protocol_version != PROTOCOL_VERSION:
            raise ValueError(
                f"manifest protocol version {self.protocol_version!r} does not "
                f"match the served protocol {PROTOCOL_VERSION!r}")


def load_manifest(path: str | Path | None) -> AdapterManifest:
    if path is None:
        return AdapterManifest()
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    detector = DetectorSettings(**raw.get("detector", {}))
    embedder = EmbedderSettings(**raw.get("embedder", {}))
    return AdapterManifest(
        name=raw.get("name", "skimage-lbp-dct"),
        protocol_version=str(raw.get("protocol_version", PROTOCOL_VERSION)),
        deterministic=bool(raw.get("deterministic", True)),
        detector=detector,
        embedder=embedder,
    )
