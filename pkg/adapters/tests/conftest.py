import numpy as np
import pytest
from PIL import Image


def synthetic_image(seed: int, size=(120, 160)) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(*size, 3), dtype=np.uint8)


@pytest.fixture
def sample_dir(tmp_path):
    """Three readable images, one of them a real photo with a face."""
    import skimage.data

    root = tmp_path / "images"
    root.mkdir()
    Image.fromarray(skimage.data.astronaut()).save(root / "a_astronaut.png")
    Image.fromarray(synthetic_image(1)).save(root / "b_noise.png")
    Image.fromarray(synthetic_image(2)).save(root / "c_noise.png")
    return root
