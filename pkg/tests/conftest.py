import numpy as np
import pytest

from exprforge import RasterImage, SelectionMask, load_database, sample_db_path


def random_image(width: int, height: int, seed: int) -> RasterImage:
    rng = np.random.default_rng(seed)
    px = np.empty((height, width, 4), np.uint8)
    px[..., :3] = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    px[..., 3] = 255
    return RasterImage(px)


def box_mask(width: int, height: int, x0: int, y0: int, x1: int, y1: int) -> SelectionMask:
    bits = np.zeros((height, width), bool)
    bits[y0:y1, x0:x1] = True
    return SelectionMask(bits)


def random_mask(width: int, height: int, seed: int) -> SelectionMask:
    """Random blobby mask guaranteed non-empty and non-full."""
    rng = np.random.default_rng(seed)
    bits = np.zeros((height, width), bool)
    n_boxes = int(rng.integers(1, 4))
    for _ in range(n_boxes):
        bw = int(rng.integers(1, max(2, width // 2)))
        bh = int(rng.integers(1, max(2, height // 2)))
        x = int(rng.integers(0, width - bw + 1))
        y = int(rng.integers(0, height - bh + 1))
        bits[y : y + bh, x : x + bw] = True
    if not bits.any():
        bits[height // 2, width // 2] = True
    if bits.all():
        bits[0, 0] = False
    return SelectionMask(bits)


@pytest.fixture(scope="session")
def sample_db():
    return load_database(sample_db_path())
