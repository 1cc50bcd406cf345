import numpy as np
import pytest
from PIL import Image


def write_png(path, seed: int, side: int = 24) -> None:
    """Deterministic grayscale test image derived from the seed."""
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 255, size=(side, side), dtype=np.uint8)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels, mode="L").save(path)


@pytest.fixture
def image_dir(tmp_path):
    root = tmp_path / "images"
    for name, seed in (("a.png", 1), ("b.png", 2), ("c.png", 3), ("d.png", 4)):
        write_png(root / name, seed)
    return root
