import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.ndimage import map_coordinates

from sparsevol import synth
from sparsevol.compressor import CompressionParams, compress
from sparsevol.sampler import SampleMode, gradient, sample, sample_many
from sparsevol.tree import SparseGridBuilder
from sparsevol.volume import DenseVolume


def trilinear_oracle(values_xyz, bg, points):
    return map_coordinates(values_xyz.astype(np.float64), points.T, order=1, mode="grid-constant", cval=bg)


def test_midpoint():
    b = SparseGridBuilder((2, 1, 1))
    b.set_voxel((1, 0, 0), 1.0)
    g = b.freeze()
    assert sample(g, None, (0.5, 0.0, 0.0)) == 0.5
    assert sample(g, None, (0.2, 0.0, 0.0), SampleMode.NEAREST) == 0.0
    assert sample(g, None, (0.5, 0.0, 0.0), SampleMode.NEAREST) == 1.0


def test_far_point_is_background():
    b = SparseGridBuilder((4, 4, 4), background=0.3)
    b.set_voxel((1, 1, 1), 1.0)
    g = b.freeze()
    assert sample(g, None, (1e5, -1e5, 7.0)) == pytest.approx(np.float32(0.3))
    assert sample(g, None, (-50.0, 0.0, 0.0), SampleMode.NEAREST) == pytest.approx(np.float32(0.3))


def test_matches_scipy_oracle(blobs_odd, rng):
    grid, _ = compress(blobs_odd, CompressionParams(1.0))
    pts = rng.uniform(-2, np.array(blobs_odd.dims) + 1, size=(20000, 3))
    got = sample_many(grid, pts)
    want = trilinear_oracle(blobs_odd.grid, grid.background, pts)
    assert np.max(np.abs(got - want)) <= 1e-6


def test_nearest_matches_rounding(blobs_odd, rng):
    grid, _ = compress(blobs_odd, CompressionParams(1.0))
    pts = rng.uniform(-0.49, np.array(blobs_odd.dims) - 0.51, size=(5000, 3))
    idx = np.floor(pts + 0.5).astype(int)
    assert np.array_equal(sample_many(grid, pts, SampleMode.NEAREST), blobs_odd.grid[tuple(idx.T)])


@given(st.lists(st.floats(-3, 3, width=32), min_size=8, max_size=8),
       st.tuples(*(st.floats(0, 1) for _ in range(3))))
def test_trilinear_within_corner_bounds(corners, t):
    v = np.asarray(corners, np.float32).reshape(2, 2, 2)
    b = SparseGridBuilder((2, 2, 2))
    b.set_block((0, 0, 0), v)
    s = sample(b.freeze(), None, t)
    assert v.min() - 1e-6 <= s <= v.max() + 1e-6


def test_accessor_cache_does_not_change_samples(blobs64, rng):
    grid, _ = compress(blobs64, CompressionParams(1.0))
    acc = grid.accessor()
    for p in rng.uniform(0, 63, size=(300, 3)):
        assert sample(grid, acc, p) == sample(grid, None, p)


def test_gradient_ramp():
    v = DenseVolume.from_array(synth.ramp((16, 8, 8)))
    grid, _ = compress(v, CompressionParams(1.0))
    gx, gy, gz = gradient(grid, None, (7.3, 4.1, 3.6))
    assert gx == pytest.approx(1 / 15, abs=1e-6)
    assert gy == pytest.approx(0, abs=1e-6) and gz == pytest.approx(0, abs=1e-6)


def test_gradient_constant_is_zero():
    b = SparseGridBuilder((8, 8, 8), background=2.0)
    b.set_block((0, 0, 0), np.full((8, 8, 8), 2.0))
    assert gradient(b.freeze(), None, (3.2, 4.4, 2.5)) == (0.0, 0.0, 0.0)


def test_gradient_sphere_direction(rng):
    dims = (48, 48, 48)
    v = DenseVolume.from_array(synth.sphere(dims))
    grid, _ = compress(v, CompressionParams(1.0))
    c = np.full(3, 23.5)
    for _ in range(50):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        p = c + 18 * d
        g = np.array(gradient(grid, None, p))
        cosang = abs(g @ d) / np.linalg.norm(g)
        assert math.degrees(math.acos(min(1.0, cosang))) < 2.0
