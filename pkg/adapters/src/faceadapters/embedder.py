"""128-d face descriptor: low-frequency DCT of the aligned, standardized crop."""

from __future__ import annotations

import numpy as np
import scipy.fft
from skimage.transform import resize

from .align import align_face
from .manifest import EmbedderSettings


def _diagonal_order(size: int):
    """(u, v) frequency pairs by ascending diagonal, DC first."""
    return sorted(((u, v) for u in range(size) for v in range(size)),
                  key=lambda uv: (uv[0] + uv[1], uv[0]))


class DctEmbedder:
    def __init__(self, settings: EmbedderSettings = EmbedderSettings()):
        self.settings = settings
        # skip the DC coefficient: it is 0 after standardization
        self._order = _diagonal_order(settings.crop_size)[1:settings.dimensions + 1]

    def embed(self, gray_crop: np.ndarray) -> list[float]:
        s = self.settings
        aligned = align_face(gray_crop)
        patch = resize(aligned, (s.crop_size, s.crop_size),
                       anti_aliasing=True, mode="edge")
        std = float(patch.std())
        if std < 1e-12:
            vec = np.zeros(s.dimensions)
            vec[0] = 1.0  # flat crop: fixed unit vector keeps the contract
            return [float(v) for v in vec]
        patch = (patch - patch.mean()) / std
        coefficients = scipy.fft.dctn(patch, norm="ortho")
        vec = np.array([coefficients[u, v] for u, v in self._order])
        vec /= np.linalg.norm(vec)
        return [float(v) for v in vec]
