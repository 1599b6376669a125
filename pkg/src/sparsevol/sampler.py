"""Nearest and trilinear reconstruction at continuous voxel-space positions.

Voxel centers sit at integer coordinates. Every lattice read goes through the
tree lookup, so missing or out-of-range voxels contribute the background.

The compiled routines take a *source* tuple ``(is_dense, dense_zyx,
background, grid_args)`` so the same code can read either a FrozenGrid or a
plain dense array; the latter exists as a test oracle for the renderer.
"""
from __future__ import annotations

import enum
import functools
import math

import numpy as np
from numba import njit
from numpy.typing import NDArray

from .frozen import Accessor, FrozenGrid, read_cached


class SampleMode(enum.IntEnum):
    NEAREST = 0
    TRILINEAR = 1


GRADIENT_STEP = 0.5


@functools.lru_cache(maxsize=1)
def _placeholder_args() -> tuple:
    return FrozenGrid.empty((1, 1, 1)).kernel_args


_NO_DENSE = np.zeros((1, 1, 1), dtype=np.float32)


def grid_source(grid: FrozenGrid) -> tuple:
    return (False, _NO_DENSE, float(np.float32(grid.background)), grid.kernel_args)


def dense_source(values_xyz: NDArray, background: float) -> tuple:
    """Source reading an ``[x, y, z]`` array directly, background outside it."""
    dense = np.ascontiguousarray(np.asarray(values_xyz, dtype=np.float32).transpose(2, 1, 0))
    return (True, dense, float(np.float32(background)), _placeholder_args())


@njit(nogil=True, cache=True)
def fetch(src, cache, x, y, z):
    if src[0]:
        dense = src[1]
        if x < 0 or y < 0 or z < 0 or z >= dense.shape[0] or y >= dense.shape[1] or x >= dense.shape[2]:
            return src[2]
        return np.float64(dense[z, y, x])
    return read_cached(src[3], cache, x, y, z)


@njit(nogil=True, cache=True)
def sample_nearest(src, cache, px, py, pz):
    return fetch(src, cache, np.int64(math.floor(px + 0.5)), np.int64(math.floor(py + 0.5)),
                 np.int64(math.floor(pz + 0.5)))


@njit(nogil=True, cache=True)
def sample_trilinear(src, cache, px, py, pz):
    fx0 = math.floor(px)
    fy0 = math.floor(py)
    fz0 = math.floor(pz)
    x = np.int64(fx0)
    y = np.int64(fy0)
    z = np.int64(fz0)
    tx = px - fx0
    ty = py - fy0
    tz = pz - fz0
    c000 = fetch(src, cache, x, y, z)
    c100 = fetch(src, cache, x + 1, y, z)
    c010 = fetch(src, cache, x, y + 1, z)
    c110 = fetch(src, cache, x + 1, y + 1, z)
    c001 = fetch(src, cache, x, y, z + 1)
    c101 = fetch(src, cache, x + 1, y, z + 1)
    c011 = fetch(src, cache, x, y + 1, z + 1)
    c111 = fetch(src, cache, x + 1, y + 1, z + 1)
    c00 = c000 + (c100 - c000) * tx
    c10 = c010 + (c110 - c010) * tx
    c01 = c001 + (c101 - c001) * tx
    c11 = c011 + (c111 - c011) * tx
    c0 = c00 + (c10 - c00) * ty
    c1 = c01 + (c11 - c01) * ty
    return c0 + (c1 - c0) * tz


@njit(nogil=True, cache=True)
def sample_at(src, cache, px, py, pz, mode):
    if mode == 0:
        return sample_nearest(src, cache, px, py, pz)
    return sample_trilinear(src, cache, px, py, pz)


@njit(nogil=True, cache=True)
def gradient_at(src, cache, px, py, pz):
    h = 0.5
    gx = (sample_trilinear(src, cache, px + h, py, pz) - sample_trilinear(src, cache, px - h, py, pz)) / (2 * h)
    gy = (sample_trilinear(src, cache, px, py + h, pz) - sample_trilinear(src, cache, px, py - h, pz)) / (2 * h)
    gz = (sample_trilinear(src, cache, px, py, pz + h) - sample_trilinear(src, cache, px, py, pz - h)) / (2 * h)
    return gx, gy, gz


@njit(nogil=True, cache=True)
def _sample_many(src, points, mode):
    cache = np.full(12, -1, dtype=np.int64)
    out = np.empty(points.shape[0], dtype=np.float64)
    for n in range(points.shape[0]):
        out[n] = sample_at(src, cache, points[n, 0], points[n, 1], points[n, 2], mode)
    return out


def sample(grid: FrozenGrid, acc: Accessor | None, p, mode: SampleMode = SampleMode.TRILINEAR) -> float:
    cache = acc.cache if acc is not None else np.full(12, -1, dtype=np.int64)
    return float(sample_at(grid_source(grid), cache, float(p[0]), float(p[1]), float(p[2]), int(mode)))


def sample_many(grid: FrozenGrid, points: NDArray, mode: SampleMode = SampleMode.TRILINEAR) -> NDArray[np.float64]:
    points = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    return _sample_many(grid_source(grid), points, int(mode))


def gradient(grid: FrozenGrid, acc: Accessor | None, p) -> tuple[float, float, float]:
    """Central differences of trilinear samples, half-voxel step per axis."""
    cache = acc.cache if acc is not None else np.full(12, -1, dtype=np.int64)
    g = gradient_at(grid_source(grid), cache, float(p[0]), float(p[1]), float(p[2]))
    return float(g[0]), float(g[1]), float(g[2])
