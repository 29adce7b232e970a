import hashlib
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from crowdcount.detection.raster import ImageRaster

# the numba JIT warmup on first SVM call would trip hypothesis' deadline
settings.register_profile(
    "crowdcount", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("crowdcount")

DATA_DIR = Path(__file__).parent / "data"
STUB_BACKEND = Path(__file__).parent / "stub_backend.py"


def stub_backend_cmd(mode: str) -> str:
    return f"{sys.executable} {STUB_BACKEND} {mode}"


class HashEmbedder:
    """Deterministic in-process embedder: pixels -> seeded random unit vector.

    Any change to the pixel content yields an unrelated embedding, which is
    exactly what augmentation/determinism tests need.
    """

    name = "hash-embedder"
    version = "test"

    def embed(self, image: ImageRaster) -> np.ndarray:
        digest = hashlib.blake2b(
            image.pixels.tobytes() + bytes([image.width % 251]), digest_size=8
        ).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "big"))
        vec = rng.normal(size=128)
        return vec / np.linalg.norm(vec)


@pytest.fixture
def hash_embedder():
    return HashEmbedder()


def ramp_image(width: int, height: int) -> ImageRaster:
    """Distinct pixel values everywhere (value = index mod 256)."""
    idx = np.arange(width * height * 3, dtype=np.int64) % 256
    return ImageRaster(idx.reshape(height, width, 3).astype(np.uint8))
