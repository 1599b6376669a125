"""Uniform macrocell grid: per-cell scalar ranges and extinction majorants."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..frozen import FrozenGrid
from .transfer import TransferFunction, max_alpha

CELL_SIZE = 32


@dataclass
class MacrocellGrid:
    """Cell ``c`` covers the continuous box ``[32c, 32c + 32)`` per axis.

    Its range spans voxels ``32c .. 32c + 32`` inclusive (clipped to the
    volume): the extra voxel layer is what trilinear samples inside the cell
    can reach, so ranges bound every reconstructed value in the cell.
    """

    dims: tuple[int, int, int]
    cell_size: int
    ranges: np.ndarray  # (ncx, ncy, ncz, 2)
    majorants: np.ndarray = field(default=None)  # (ncx, ncy, ncz)

    @property
    def cell_counts(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.ranges.shape[:3])

    @property
    def empty(self) -> np.ndarray:
        return self.majorants == 0.0

    def cell_box(self, cell) -> tuple[tuple[int, int, int], tuple[int, int, int]]:
        """Half-open voxel box whose values the cell's range covers."""
        lo = tuple(int(c) * self.cell_size for c in cell)
        hi = tuple(min(a + self.cell_size + 1, n) for a, n in zip(lo, self.dims))
        return lo, hi


@njit(nogil=True, cache=True)
def _cell_ranges(dense_xyz, cs, out):
    w, h, d = dense_xyz.shape
    for cx in range(out.shape[0]):
        for cy in range(out.shape[1]):
            for cz in range(out.shape[2]):
                lo = np.inf
                hi = -np.inf
                for x in range(cx * cs, min(cx * cs + cs + 1, w)):
                    for y in range(cy * cs, min(cy * cs + cs + 1, h)):
                        for z in range(cz * cs, min(cz * cs + cs + 1, d)):
                            v = dense_xyz[x, y, z]
                            if v < lo:
                                lo = v
                            if v > hi:
                                hi = v
                out[cx, cy, cz, 0] = lo
                out[cx, cy, cz, 1] = hi


def build_macrocells(g: FrozenGrid, cell_size: int = CELL_SIZE) -> MacrocellGrid:
    counts = tuple(-(-n // cell_size) for n in g.dims)
    ranges = np.empty(counts + (2,), dtype=np.float64)
    _cell_ranges(np.asarray(g.to_dense(), dtype=np.float64), cell_size, ranges)
    return MacrocellGrid(g.dims, cell_size, ranges)


@njit(nogil=True, cache=True)
def _majorants(tf, ranges, out):
    scale = tf[3]
    for cx in range(out.shape[0]):
        for cy in range(out.shape[1]):
            for cz in range(out.shape[2]):
                out[cx, cy, cz] = scale * max_alpha(tf, ranges[cx, cy, cz, 0], ranges[cx, cy, cz, 1])


def update_majorants(mc: MacrocellGrid, tf: TransferFunction) -> None:
    """Recompute per-cell majorants for a new transfer function."""
    out = np.empty(mc.ranges.shape[:3], dtype=np.float64)
    _majorants(tf.args, mc.ranges, out)
    mc.majorants = out
