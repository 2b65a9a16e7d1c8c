import numpy as np
import pytest

from cgrep import RegionMask, VoxelGrid


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_region(rng, dims=(4, 4, 4), levels=4, keep=0.8):
    """Random intensity grid + partial region mask, quantized level volume."""
    from cgrep import quantize

    data = rng.uniform(0.0, 10.0, size=dims)
    labels = (rng.uniform(size=dims) < keep).astype(np.int64)
    if labels.sum() < 2:
        labels[0, 0, 0] = labels[1, 0, 0] = 1
    grid = VoxelGrid(data)
    mask = RegionMask(labels)
    return grid, mask, quantize(grid, mask, 1, levels)
