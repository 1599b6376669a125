"""Piecewise-linear RGBA transfer functions; alpha scaled by ``density_scale``
is the extinction coefficient."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from numba import njit


@dataclass(frozen=True)
class TransferFunction:
    domain: tuple[float, float]
    rgba: np.ndarray  # (n, 4), control points evenly spaced over the domain
    density_scale: float = 1.0

    def __post_init__(self):
        rgba = np.ascontiguousarray(np.asarray(self.rgba, dtype=np.float64))
        if rgba.ndim != 2 or rgba.shape[1] != 4 or rgba.shape[0] < 2:
            raise ValueError("rgba must have at least two (r, g, b, a) entries")
        if np.any(rgba[:, 3] < 0) or np.any(rgba[:, 3] > 1):
            raise ValueError("alpha entries must lie in [0, 1]")
        if not self.domain[1] > self.domain[0]:
            raise ValueError(f"transfer function domain {self.domain} must have lo < hi")
        if self.density_scale <= 0:
            raise ValueError("density_scale must be positive")
        object.__setattr__(self, "rgba", rgba)
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))

    @classmethod
    def from_dict(cls, d: dict) -> "TransferFunction":
        return cls(tuple(d["domain"]), np.asarray(d["rgba"]), float(d.get("density_scale", 1.0)))

    @classmethod
    def load(cls, path: str | os.PathLike) -> "TransferFunction":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {"domain": list(self.domain), "density_scale": self.density_scale, "rgba": self.rgba.tolist()}

    @property
    def args(self) -> tuple:
        return (self.rgba, self.domain[0], self.domain[1], float(self.density_scale))

    def lookup(self, v: float) -> np.ndarray:
        return np.array(tf_lookup(self.args, float(v)))

    def extinction(self, v: float) -> float:
        return self.density_scale * tf_alpha(self.args, float(v))

    def extinction_many(self, values) -> np.ndarray:
        flat = np.ascontiguousarray(np.asarray(values, dtype=np.float64).ravel())
        return _extinction_many(self.args, flat).reshape(np.shape(values))


@njit(nogil=True, cache=True)
def _position(tf, v):
    rgba, lo, hi = tf[0], tf[1], tf[2]
    s = (v - lo) / (hi - lo)
    if s < 0.0:
        s = 0.0
    elif s > 1.0:
        s = 1.0
    pos = s * (rgba.shape[0] - 1)
    i = min(int(pos), rgba.shape[0] - 2)
    return i, pos - i


@njit(nogil=True, cache=True)
def _lerp(a, b, f):
    # clamped so a lerp never rounds past its end points
    r = a + (b - a) * f
    return min(max(r, min(a, b)), max(a, b))


@njit(nogil=True, cache=True)
def tf_alpha(tf, v):
    i, f = _position(tf, v)
    return _lerp(tf[0][i, 3], tf[0][i + 1, 3], f)


@njit(nogil=True, cache=True)
def tf_lookup(tf, v):
    rgba = tf[0]
    i, f = _position(tf, v)
    return (_lerp(rgba[i, 0], rgba[i + 1, 0], f), _lerp(rgba[i, 1], rgba[i + 1, 1], f),
            _lerp(rgba[i, 2], rgba[i + 1, 2], f), _lerp(rgba[i, 3], rgba[i + 1, 3], f))


@njit(nogil=True, cache=True)
def max_alpha(tf, vmin, vmax):
    """Exact maximum of alpha over the scalar interval [vmin, vmax]."""
    rgba, lo, hi = tf[0], tf[1], tf[2]
    best = max(tf_alpha(tf, vmin), tf_alpha(tf, vmax))
    n = rgba.shape[0]
    for k in range(n):
        vk = lo + (hi - lo) * k / (n - 1)
        if vmin <= vk <= vmax:
            best = max(best, rgba[k, 3])
    return best


@njit(nogil=True, cache=True)
def _extinction_many(tf, values):
    out = np.empty(values.shape[0], dtype=np.float64)
    for n in range(values.shape[0]):
        out[n] = tf[3] * tf_alpha(tf, values[n])
    return out
