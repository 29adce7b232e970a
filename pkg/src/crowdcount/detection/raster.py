"""8-bit RGB raster images: PPM/PNG loading, resizing, cropping.

Resampling conventions are pinned so goldens are bit-exact:
nearest-neighbor samples source index floor((i + 0.5) / scale); bilinear
uses center-aligned source coordinates (i + 0.5) / scale - 0.5 and rounds
half up when converting back to 8 bit. Output dimensions are
round-half-up(scale * dims).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ParseError
from ..geometry import Box2D

INTERPOLATIONS = ("nearest", "bilinear")


@dataclass(frozen=True, eq=False)
class ImageRaster:
    pixels: np.ndarray  # (height, width, 3) uint8, row-major

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) pixel array, got shape {p.shape}")
        if p.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got {p.dtype}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("image must be at least 1x1")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def filled(cls, width: int, height: int, rgb=(0, 0, 0)) -> "ImageRaster":
        data = np.empty((height, width, 3), dtype=np.uint8)
        data[:, :] = rgb
        return cls(data)


def read_ppm(path: str | Path) -> ImageRaster:
    """Read a binary (P6) PPM with maxval 255."""
    raw = Path(path).read_bytes()
    fields: list[bytes] = []
    pos = 0
    # header: magic, width, height, maxval; '#' comments allowed
    while len(fields) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError(f"truncated PPM header in {path}")
        fields.append(raw[start:pos])
    if fields[0] != b"P6":
        raise ParseError(f"not a P6 PPM: magic {fields[0]!r} in {path}")
    try:
        width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    except ValueError as exc:
        raise ParseError(f"bad PPM header numbers in {path}") from exc
    if maxval != 255:
        raise ParseError(f"unsupported PPM maxval {maxval} in {path}")
    pos += 1  # single whitespace byte after maxval
    expected = width * height * 3
    data = raw[pos:pos + expected]
    if len(data) != expected:
        raise ParseError(f"PPM pixel data truncated in {path}")
    pixels = np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3)
    return ImageRaster(pixels.copy())


def write_ppm(path: str | Path, image: ImageRaster) -> None:
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + image.pixels.tobytes())


def load_image(path: str | Path) -> ImageRaster:
    """Load a PPM (built-in, bit-exact) or PNG/JPEG (via Pillow)."""
    path = Path(path)
    if path.suffix.lower() in (".ppm", ".pnm"):
        return read_ppm(path)
    from PIL import Image

    with Image.open(path) as img:
        rgb = img.convert("RGB")
        return ImageRaster(np.asarray(rgb, dtype=np.uint8).copy())


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def resize(image: ImageRaster, scale: float, interpolation: str = "bilinear") -> ImageRaster:
    if not (scale > 0 and math.isfinite(scale)):
        raise ValueError(f"scale must be a positive finite real, got {scale!r}")
    if interpolation not in INTERPOLATIONS:
        raise ValueError(f"unknown interpolation {interpolation!r}")
    out_w = _round_half_up(scale * image.width)
    out_h = _round_half_up(scale * image.height)
    if out_w < 1 or out_h < 1:
        raise ValueError(f"degenerate output size {out_w}x{out_h} at scale {scale}")

    src = image.pixels
    if interpolation == "nearest":
        xs = np.floor((np.arange(out_w) + 0.5) / scale).astype(np.int64)
        ys = np.floor((np.arange(out_h) + 0.5) / scale).astype(np.int64)
        xs = np.clip(xs, 0, image.width - 1)
        ys = np.clip(ys, 0, image.height - 1)
        return ImageRaster(src[np.ix_(ys, xs)].copy())

    sx = np.clip((np.arange(out_w) + 0.5) / scale - 0.5, 0.0, image.width - 1.0)
    sy = np.clip((np.arange(out_h) + 0.5) / scale - 0.5, 0.0, image.height - 1.0)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, image.width - 1)
    y1 = np.minimum(y0 + 1, image.height - 1)
    fx = (sx - x0)[np.newaxis, :, np.newaxis]
    fy = (sy - y0)[:, np.newaxis, np.newaxis]
    p = src.astype(np.float64)
    top = p[np.ix_(y0, x0)] * (1.0 - fx) + p[np.ix_(y0, x1)] * fx
    bottom = p[np.ix_(y1, x0)] * (1.0 - fx) + p[np.ix_(y1, x1)] * fx
    values = top * (1.0 - fy) + bottom * fy
    out = np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)
    return ImageRaster(out)


def crop_box(image: ImageRaster, box: Box2D) -> ImageRaster:
    """Extract the pixel window covering `box`, clamped to image bounds.

    The window spans floor(x)..ceil(x+w) by floor(y)..ceil(y+h); raises if
    the clamped window is empty.
    """
    x0 = max(0, int(math.floor(box.x)))
    y0 = max(0, int(math.floor(box.y)))
    x1 = min(image.width, int(math.ceil(box.x2)))
    y1 = min(image.height, int(math.ceil(box.y2)))
    if x1 - x0 < 1 or y1 - y0 < 1:
        raise ValueError(f"box {box} does not overlap the {image.width}x{image.height} image")
    return ImageRaster(image.pixels[y0:y1, x0:x1].copy())
