"""Multi-scale detection: power-of-two pyramids over a pluggable backend."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

from ..errors import BackendError, ConfigError
from ..geometry import ScoredBox, clamp_box, nms, rescale_box
from .raster import INTERPOLATIONS, ImageRaster, resize


class DetectorBackend(Protocol):
    name: str
    version: str

    def detect(self, image: ImageRaster, scale: float = 1.0) -> list[ScoredBox]: ...


@dataclass(frozen=True)
class PyramidConfig:
    k_min: int = -2
    k_max: int = 1
    max_pixels: int = 25_000_000
    interpolation: str = "bilinear"
    nms_threshold: float = 0.3

    def __post_init__(self):
        if self.k_min > self.k_max:
            raise ConfigError(f"k_min={self.k_min} > k_max={self.k_max}")
        if self.max_pixels < 1:
            raise ConfigError("max_pixels must be >= 1")
        if self.interpolation not in INTERPOLATIONS:
            raise ConfigError(f"unknown interpolation {self.interpolation!r}")
        if not 0.0 <= self.nms_threshold <= 1.0:
            raise ConfigError("nms_threshold must be in [0, 1]")


def build_scales(width: int, height: int, config: PyramidConfig) -> list[float]:
    """Power-of-two scales whose scaled image area stays under the cap, ascending."""
    scales = []
    for k in range(config.k_min, config.k_max + 1):
        s = 2.0 ** k
        if (s * width) * (s * height) <= config.max_pixels:
            scales.append(s)
    if not scales:
        raise ConfigError(
            f"no scale in 2^[{config.k_min}..{config.k_max}] keeps "
            f"{width}x{height} under {config.max_pixels} pixels")
    return scales


def detect_multiscale(image: ImageRaster, backend: DetectorBackend,
                      config: PyramidConfig = PyramidConfig()) -> list[ScoredBox]:
    """Detect on every pyramid level and merge with NMS.

    Each level is resized from the original, handed to the backend, and the
    returned boxes (scaled-frame coordinates) are mapped back, clamped to
    the original bounds (dropping any that collapse), pooled across levels
    and reduced with NMS at the configured threshold. A backend failure at
    any level aborts the whole call; no partial results are returned.
    """
    merged: list[ScoredBox] = []
    for scale in build_scales(image.width, image.height, config):
        level = resize(image, scale, config.interpolation)
        try:
            detections = backend.detect(level, scale=scale)
        except BackendError as exc:
            if exc.scale is None:
                exc.scale = scale
            raise
        except Exception as exc:
            raise BackendError(f"backend {getattr(backend, 'name', '?')} failed "
                               f"at scale {scale}: {exc}", scale=scale) from exc
        for det in detections:
            mapped = rescale_box(det.box, scale)
            clamped = clamp_box(mapped, image.width, image.height)
            if clamped is not None:
                merged.append(ScoredBox(clamped, det.score))
    return nms(merged, config.nms_threshold)
