"""Fixed-rate brick-budget compression of dense volumes into a sparse tree."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidQuality
from .frozen import FrozenGrid
from .tree import LEAF_SPAN, SparseGridBuilder
from .volume import DenseVolume, compute_histogram, detect_background

BRICK_SIZE = 32


class Metric(str, enum.Enum):
    CLOSEST = "closest"
    FARTHEST = "farthest"
    MEDIAN = "median"


def similarity(lo: float, hi: float, background: float, metric: Metric | str) -> float:
    """Distance of the range [lo, hi] to the background; 0 means identical."""
    metric = Metric(metric)
    a, b = abs(lo - background), abs(hi - background)
    if metric is Metric.CLOSEST:
        return min(a, b)
    if metric is Metric.FARTHEST:
        return max(a, b)
    return abs((lo + hi) / 2 - background)


@dataclass(frozen=True)
class CompressionParams:
    quality: float = 1.0
    metric: Metric = Metric.FARTHEST
    histogram_bins: int | None = None
    activate_corners: bool = True
    # debug: activate the bricks most similar to the background first
    literal_order: bool = False

    def __post_init__(self):
        if not (0.0 <= self.quality <= 1.0) or math.isnan(self.quality):
            raise InvalidQuality(f"quality must be in [0, 1], got {self.quality}")
        object.__setattr__(self, "metric", Metric(self.metric))


@dataclass(frozen=True)
class BrickRecord:
    brick_id: tuple[int, int, int]
    linear_index: int
    lo_corner: tuple[int, int, int]
    hi_corner: tuple[int, int, int]
    value_range: tuple[float, float]
    score: float


@dataclass(frozen=True)
class CompressionReport:
    background: float
    num_bricks: int
    bricks_activated: int
    voxels_activated: int
    frozen_bytes: int
    dense_bytes: int

    @property
    def achieved_ratio(self) -> float:
        return self.frozen_bytes / self.dense_bytes


def brick_grid(dims) -> tuple[int, int, int]:
    return tuple(-(-n // BRICK_SIZE) for n in dims)


def bricks_to_activate(quality: float, num_bricks: int) -> int:
    # rounding snaps float noise such as 0.30000000000000004 * 10
    return min(num_bricks, math.ceil(round(quality * num_bricks, 9)))


def brick_ranges(v: DenseVolume) -> np.ndarray:
    """Per-brick (min, max), shape ``(nbx, nby, nbz, 2)``; boundary bricks are clipped."""
    nb = brick_grid(v.dims)
    padded_shape = tuple(n * BRICK_SIZE for n in nb)
    grid = v.grid
    out = np.empty(nb + (2,), dtype=np.float64)
    if padded_shape == v.dims:
        blocks = grid.reshape(nb[0], BRICK_SIZE, nb[1], BRICK_SIZE, nb[2], BRICK_SIZE)
        out[..., 0] = blocks.min(axis=(1, 3, 5))
        out[..., 1] = blocks.max(axis=(1, 3, 5))
        return out
    # edge-pad with +inf/-inf so clipped bricks only see real voxels
    lo = np.full(padded_shape, np.inf, dtype=np.float32)
    hi = np.full(padded_shape, -np.inf, dtype=np.float32)
    w, h, d = v.dims
    lo[:w, :h, :d] = grid
    hi[:w, :h, :d] = grid
    out[..., 0] = lo.reshape(nb[0], BRICK_SIZE, nb[1], BRICK_SIZE, nb[2], BRICK_SIZE).min(axis=(1, 3, 5))
    out[..., 1] = hi.reshape(nb[0], BRICK_SIZE, nb[1], BRICK_SIZE, nb[2], BRICK_SIZE).max(axis=(1, 3, 5))
    return out


def build_brick_records(v: DenseVolume, background: float, metric: Metric | str,
                        literal_order: bool = False) -> list[BrickRecord]:
    """All bricks sorted by descending distance to the background.

    Ties keep ascending linear (x fastest) brick order.
    """
    nb = brick_grid(v.dims)
    ranges = brick_ranges(v)
    records = []
    for bz in range(nb[2]):
        for by in range(nb[1]):
            for bx in range(nb[0]):
                lo, hi = ranges[bx, by, bz]
                lo_c = (bx * BRICK_SIZE, by * BRICK_SIZE, bz * BRICK_SIZE)
                hi_c = tuple(min(c + BRICK_SIZE, n) for c, n in zip(lo_c, v.dims))
                records.append(
                    BrickRecord((bx, by, bz), len(records), lo_c, hi_c, (float(lo), float(hi)),
                                similarity(float(lo), float(hi), background, metric))
                )
    sign = 1.0 if literal_order else -1.0
    records.sort(key=lambda r: (sign * r.score, r.linear_index))
    return records


def _activate_brick(builder: SparseGridBuilder, v: DenseVolume, rec: BrickRecord) -> int:
    """Copy a brick's voxels into the builder leaf by leaf; returns voxels activated.

    Full leaves that hold only the background are skipped, which is what a
    later prune would do to them anyway.
    """
    bg = np.float32(builder.background)
    grid = v.grid
    lo, hi = rec.lo_corner, rec.hi_corner
    count = 0
    for oz in range(lo[2], hi[2], LEAF_SPAN):
        for oy in range(lo[1], hi[1], LEAF_SPAN):
            for ox in range(lo[0], hi[0], LEAF_SPAN):
                block = grid[ox:min(ox + LEAF_SPAN, hi[0]), oy:min(oy + LEAF_SPAN, hi[1]),
                             oz:min(oz + LEAF_SPAN, hi[2])]
                count += block.size
                if block.shape == (LEAF_SPAN,) * 3 and np.all(block == bg):
                    continue
                builder.set_block((ox, oy, oz), block)
    return count


def compress(v: DenseVolume, params: CompressionParams | None = None) -> tuple[FrozenGrid, CompressionReport]:
    params = params or CompressionParams()
    hist = compute_histogram(v, params.histogram_bins)
    background = detect_background(v, hist).value
    records = build_brick_records(v, background, params.metric, params.literal_order)
    budget = bricks_to_activate(params.quality, len(records))

    builder = SparseGridBuilder(v.dims, background, v.value_domain, int(v.voxel_type))
    voxels = 0
    for rec in records[:budget]:
        voxels += _activate_brick(builder, v, rec)
    if params.activate_corners:
        active = {rec.brick_id for rec in records[:budget]}
        w, h, d = v.dims
        for corner in dict.fromkeys(((0, 0, 0), (w - 1, h - 1, d - 1))):
            if tuple(c // BRICK_SIZE for c in corner) not in active:
                voxels += 1
            builder.set_voxel(corner, v.at(*corner))
    builder.prune()
    grid = builder.freeze()
    report = CompressionReport(
        background=background,
        num_bricks=len(records),
        bricks_activated=budget,
        voxels_activated=voxels,
        frozen_bytes=grid.byte_size,
        dense_bytes=v.num_voxels * 4,
    )
    return grid, report


def lossless_quality(v: DenseVolume, background: float) -> float:
    """Smallest quality whose budget covers every brick not identical to [B, B].

    Compressing at this quality is lossless whenever every such brick scores
    above zero, which always holds for the farthest metric.
    """
    ranges = brick_ranges(v).reshape(-1, 2)
    bg = float(np.float32(background))
    non_bg = int(np.count_nonzero((ranges[:, 0] != bg) | (ranges[:, 1] != bg)))
    return non_bg / len(ranges)

