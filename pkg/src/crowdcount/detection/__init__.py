"""Detection orchestration, annotation/detection/embedding ingestion, backends."""

from .raster import ImageRaster, crop_box, load_image, read_ppm, resize, write_ppm
from .pyramid import DetectorBackend, PyramidConfig, build_scales, detect_multiscale
from .widerface import Annotation, Blur, WiderfaceParseResult, parse_widerface, serialize_widerface
from .storage import (
    box_to_json,
    load_detections,
    load_embeddings,
    write_detections,
    write_embeddings,
)
from .backend import (
    DEFAULT_TIMEOUT_S,
    PROTOCOL_VERSION,
    TIMEOUT_ENV_VAR,
    SubprocessBackend,
    SubprocessDetector,
    SubprocessEmbedder,
    invoke_backend,
)

__all__ = [
    "ImageRaster", "crop_box", "load_image", "read_ppm", "resize", "write_ppm",
    "DetectorBackend", "PyramidConfig", "build_scales", "detect_multiscale",
    "Annotation", "Blur", "WiderfaceParseResult", "parse_widerface", "serialize_widerface",
    "box_to_json", "load_detections", "load_embeddings", "write_detections", "write_embeddings",
    "DEFAULT_TIMEOUT_S", "PROTOCOL_VERSION", "TIMEOUT_ENV_VAR",
    "SubprocessBackend", "SubprocessDetector", "SubprocessEmbedder", "invoke_backend",
]
