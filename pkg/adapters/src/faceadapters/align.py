"""Face alignment: level the eye line before embedding.

No pretrained landmark model is shippable offline, so eye centers are
estimated classically: darkness centroids inside the canonical eye bands
of the face crop. The crop is then rotated so the eye line is horizontal,
which is all the downstream embedding needs ("faces always in the same
direction").
"""

from __future__ import annotations

import numpy as np
from skimage.transform import rotate

# eye search windows as fractions of the crop (rows, then left/right columns)
EYE_BAND_TOP, EYE_BAND_BOTTOM = 0.20, 0.55
LEFT_EYE_SPAN = (0.10, 0.45)
RIGHT_EYE_SPAN = (0.55, 0.90)


def _darkness_centroid(window: np.ndarray, x_offset: float, y_offset: float):
    weights = 1.0 - window
    total = float(weights.sum())
    if total <= 0.0:
        h, w = window.shape
        return (x_offset + w / 2.0, y_offset + h / 2.0)
    ys, xs = np.mgrid[0:window.shape[0], 0:window.shape[1]]
    return (x_offset + float((weights * xs).sum()) / total,
            y_offset + float((weights * ys).sum()) / total)


def estimate_eye_centers(gray_crop: np.ndarray):
    height, width = gray_crop.shape
    top = int(EYE_BAND_TOP * height)
    bottom = max(top + 1, int(EYE_BAND_BOTTOM * height))
    centers = []
    for lo, hi in (LEFT_EYE_SPAN, RIGHT_EYE_SPAN):
        x0 = int(lo * width)
        x1 = max(x0 + 1, int(hi * width))
        window = gray_crop[top:bottom, x0:x1]
        centers.append(_darkness_centroid(window, x0, top))
    return tuple(centers)


def align_face(gray_crop: np.ndarray) -> np.ndarray:
    """Rotate the crop so the estimated eye line is horizontal."""
    (lx, ly), (rx, ry) = estimate_eye_centers(gray_crop)
    angle = np.degrees(np.arctan2(ry - ly, rx - lx))
    if angle == 0.0:
        return gray_crop
    return rotate(gray_crop, angle, mode="edge", preserve_range=True)
