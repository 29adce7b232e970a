"""Face detection with a pretrained OpenCV-format cascade (via scikit-image).

scikit-image bundles the trained LBP frontal-face cascade, which keeps the
adapter usable offline; the manifest can point at any other OpenCV-format
cascade file. Raw model output only: no thresholding, no NMS, no score
calibration.
"""

from __future__ import annotations

import numpy as np

from .manifest import DetectorSettings


class CascadeDetector:
    def __init__(self, settings: DetectorSettings = DetectorSettings()):
        import skimage.data
        from skimage.feature import Cascade

        path = settings.cascade_path or skimage.data.lbp_frontal_face_cascade_filename()
        self.settings = settings
        self.model = Cascade(path)

    def detect(self, gray: np.ndarray) -> list[dict]:
        """Boxes as {"x","y","w","h","score"} dicts; the cascade has no
        confidence output, so every detection carries score 1.0."""
        s = self.settings
        height, width = gray.shape
        max_size = s.max_size or max(height, width)
        min_size = min(s.min_size, height, width)
        found = self.model.detect_multi_scale(
            img=gray,
            scale_factor=s.scale_factor,
            step_ratio=s.step_ratio,
            min_size=(min_size, min_size),
            max_size=(max_size, max_size),
        )
        return [
            {"x": float(d["c"]), "y": float(d["r"]),
             "w": float(d["width"]), "h": float(d["height"]), "score": 1.0}
            for d in found
        ]
