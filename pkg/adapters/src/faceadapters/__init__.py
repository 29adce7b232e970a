"""Subprocess adapters: pretrained face detection, alignment, 128-d embeddings."""

from .manifest import AdapterManifest, PROTOCOL_VERSION, load_manifest
from .detector import CascadeDetector
from .embedder import DctEmbedder
from .export import export
from .serve import AdapterService, serve

__all__ = [
    "AdapterManifest", "PROTOCOL_VERSION", "load_manifest",
    "CascadeDetector", "DctEmbedder", "AdapterService", "serve", "export",
]
