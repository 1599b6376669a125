"""Seeded synthetic test volumes.

All randomness comes from numpy's counter-based Philox generator keyed by the
seed, so a (kind, dims, seed) triple always yields the same bytes.
"""
from __future__ import annotations

import numpy as np

from .volume import DenseVolume

KINDS = ("noise", "blobs", "ramp", "sphere")


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed)))


def _coords(dims):
    return np.meshgrid(*(np.arange(n, dtype=np.float64) for n in dims), indexing="ij")


def noise(dims, seed: int = 0) -> np.ndarray:
    """Independent uniform(0, 1) voxels: a volume with no empty neighborhood."""
    return _rng(seed).random(tuple(dims)).astype(np.float32)


def blobs(dims, seed: int = 0, count: int = 8, sigma: float | None = None, cutoff: float = 2.5) -> np.ndarray:
    """Sum of truncated Gaussian bumps over an exactly-zero background.

    Bumps are cut off at ``cutoff * sigma`` so most voxels stay exactly 0.
    """
    rng = _rng(seed)
    dims = tuple(dims)
    if sigma is None:
        sigma = min(dims) / 20.0
    x, y, z = _coords(dims)
    out = np.zeros(dims, dtype=np.float64)
    for _ in range(count):
        c = rng.random(3) * np.array(dims)
        amp = 0.5 + 0.5 * rng.random()
        r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
        bump = amp * np.exp(-r2 / (2 * sigma * sigma))
        bump[r2 > (cutoff * sigma) ** 2] = 0.0
        out += bump
    return out.astype(np.float32)


def ramp(dims) -> np.ndarray:
    """v = x / (W - 1)."""
    w = dims[0]
    x = np.arange(w, dtype=np.float64) / max(w - 1, 1)
    return np.broadcast_to(x[:, None, None], tuple(dims)).astype(np.float32)


def sphere(dims, center=None, radius: float | None = None) -> np.ndarray:
    """Radial field 1 - |p - c| / R clamped to [0, 1]."""
    dims = tuple(dims)
    if center is None:
        center = [(n - 1) / 2 for n in dims]
    if radius is None:
        radius = min(dims) / 2 - 1
    x, y, z = _coords(dims)
    r = np.sqrt((x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2)
    return np.clip(1.0 - r / radius, 0.0, 1.0).astype(np.float32)


def make(kind: str, dims, seed: int = 0) -> DenseVolume:
    if kind == "noise":
        arr = noise(dims, seed)
    elif kind == "blobs":
        arr = blobs(dims, seed)
    elif kind == "ramp":
        arr = ramp(dims)
    elif kind == "sphere":
        arr = sphere(dims)
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}; choose from {', '.join(KINDS)}")
    return DenseVolume.from_array(arr)
