"""Image loading and grayscale conversion for the adapters."""

from __future__ import annotations

from pathlib import Path

import numpy as np

LUMA = np.array([0.2125, 0.7154, 0.0721])  # ITU-R 709, matches skimage rgb2gray


def read_ppm(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    fields: list[bytes] = []
    pos = 0
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
            raise ValueError(f"truncated PPM header: {path}")
        fields.append(raw[start:pos])
    if fields[0] != b"P6" or int(fields[3]) != 255:
        raise ValueError(f"unsupported PPM variant: {path}")
    width, height = int(fields[1]), int(fields[2])
    pos += 1
    data = raw[pos:pos + width * height * 3]
    if len(data) != width * height * 3:
        raise ValueError(f"truncated PPM data: {path}")
    return np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3).copy()


def load_rgb(path: str | Path) -> np.ndarray:
    """(h, w, 3) uint8 from PPM (native) or PNG/JPEG (Pillow)."""
    path = Path(path)
    if path.suffix.lower() in (".ppm", ".pnm"):
        return read_ppm(path)
    from PIL import Image

    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8).copy()


def to_gray(rgb: np.ndarray) -> np.ndarray:
    """Luminance in [0, 1] as float64."""
    return (rgb.astype(np.float64) / 255.0) @ LUMA


def crop_window(image: np.ndarray, x: float, y: float, w: float, h: float) -> np.ndarray:
    """Integer pixel window covering the box, clamped to the image."""
    height, width = image.shape[:2]
    x0 = max(0, int(np.floor(x)))
    y0 = max(0, int(np.floor(y)))
    x1 = min(width, int(np.ceil(x + w)))
    y1 = min(height, int(np.ceil(y + h)))
    if x1 - x0 < 1 or y1 - y0 < 1:
        raise ValueError(f"box ({x}, {y}, {w}, {h}) lies outside the image")
    return image[y0:y1, x0:x1]
