"""Block-wise variance descriptors and the MAE comparators built on them."""

from dataclasses import dataclass

import numpy as np

from .validation import check_grid, check_same_shape

__all__ = ["BlockVarianceGrid", "block_variance", "mae_vargrids", "mae_maps"]

DEFAULT_BLOCK = 8


@dataclass(frozen=True)
class BlockVarianceGrid:
    """Population variance per block; trailing partial blocks keep their
    true pixel counts."""

    variances: np.ndarray  # (rows, cols)
    block: int

    @property
    def rows(self):
        return self.variances.shape[0]

    @property
    def cols(self):
        return self.variances.shape[1]


def block_variance(g, block=DEFAULT_BLOCK):
    """Tile from the top-left and take the population variance of each block."""
    g = check_grid(g)
    if block < 1:
        raise ValueError("block size must be >= 1")
    h, w = g.shape
    rows = -(-h // block)
    cols = -(-w // block)
    if h % block == 0 and w % block == 0:
        # Full tiling: one vectorized reshape covers every block.
        v = g.reshape(rows, block, cols, block).transpose(0, 2, 1, 3)
        v = v.reshape(rows, cols, block * block).var(axis=2)
        return BlockVarianceGrid(variances=v, block=block)
    v = np.empty((rows, cols))
    for i in range(rows):
        for j in range(cols):
            v[i, j] = g[i * block:(i + 1) * block, j * block:(j + 1) * block].var()
    return BlockVarianceGrid(variances=v, block=block)


def mae_vargrids(a, b):
    """Mean absolute error between two block-variance grids."""
    if a.variances.shape != b.variances.shape or a.block != b.block:
        raise ValueError(
            f"block layouts differ: {a.variances.shape}/{a.block} vs "
            f"{b.variances.shape}/{b.block}; resize the maps first"
        )
    return float(np.abs(a.variances - b.variances).mean())


def mae_maps(a, b):
    """Mean absolute error between two grids of equal dims."""
    a = check_grid(a, "a")
    b = check_grid(b, "b")
    check_same_shape(a, b, "maps")
    return float(np.abs(a - b).mean())
