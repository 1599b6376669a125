import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from sparsevol import synth
from sparsevol.compressor import CompressionParams, compress
from sparsevol.render import (Camera, RenderSettings, Scene, TransferFunction, build_macrocells, dda_traverse,
                              read_ppm, render, render_radiance, write_ppm)
from sparsevol.render.dda import STATE_SIZE
from sparsevol.render.integrator import free_flights, iso_hit, trace_path
from sparsevol.render.macrocells import update_majorants
from sparsevol.sampler import dense_source
from sparsevol.tree import SparseGridBuilder
from sparsevol.volume import DenseVolume


def grey_tf(albedo=0.8, scale=0.2):
    return TransferFunction((0.0, 1.0), [[albedo] * 3 + [0.0], [albedo] * 3 + [1.0]], scale)


def random_tf(rng, n=None):
    n = n or int(rng.integers(2, 9))
    rgba = rng.random((n, 4))
    rgba[rng.random(n) < 0.3, 3] = 0.0
    return TransferFunction((0.0, 1.0), rgba, float(rng.uniform(0.1, 5)))


def new_cache():
    return np.full(12, -1, dtype=np.int64)


# transfer functions

def test_tf_lookup_examples():
    tf = TransferFunction((0.0, 2.0), [[0, 0, 0, 0], [1, 0.5, 0, 1], [0, 0, 1, 0.5]], density_scale=3.0)
    assert np.allclose(tf.lookup(1.0), [1, 0.5, 0, 1])
    assert np.allclose(tf.lookup(0.5), [0.5, 0.25, 0, 0.5])
    assert np.allclose(tf.lookup(-4.0), [0, 0, 0, 0])
    assert np.allclose(tf.lookup(9.0), [0, 0, 1, 0.5])
    assert tf.extinction(1.5) == pytest.approx(3.0 * 0.75)


def test_tf_validation():
    with pytest.raises(ValueError):
        TransferFunction((1.0, 0.0), [[0, 0, 0, 0], [1, 1, 1, 1]])
    with pytest.raises(ValueError):
        TransferFunction((0.0, 1.0), [[0, 0, 0, 2], [1, 1, 1, 1]])


def test_tf_json_round_trip(tmp_path):
    import json
    tf = TransferFunction((0.0, 1.0), [[0, 0, 0, 0], [1, 1, 1, 1]], 2.5)
    (tmp_path / "tf.json").write_text(json.dumps(tf.to_dict()))
    back = TransferFunction.load(tmp_path / "tf.json")
    assert back.domain == tf.domain and back.density_scale == 2.5 and np.array_equal(back.rgba, tf.rgba)


# macrocells

def test_macrocell_ranges_brute_force(blobs_odd):
    grid, _ = compress(blobs_odd, CompressionParams(0.6))
    mc = build_macrocells(grid)
    dense = grid.to_dense()
    assert mc.cell_counts == (3, 2, 2)
    for cell in np.ndindex(*mc.cell_counts):
        lo, hi = mc.cell_box(cell)
        block = dense[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
        assert mc.ranges[cell][0] == block.min() and mc.ranges[cell][1] == block.max()


def test_majorant_examples():
    tf = TransferFunction((0.0, 1.0), [[0, 0, 0, 0], [0, 0, 0, 1], [0, 0, 0, 0]], 2.0)
    b = SparseGridBuilder((33, 1, 1))
    b.set_voxel((0, 0, 0), 0.25)
    b.set_voxel((10, 0, 0), 0.75)
    mc = build_macrocells(b.freeze())
    update_majorants(mc, tf)
    # the peak at 0.5 lies inside [0, 0.75]
    assert mc.majorants[0, 0, 0] == 2.0
    b2 = SparseGridBuilder((33, 1, 1))
    b2.set_voxel((0, 0, 0), 0.25)
    mc2 = build_macrocells(b2.freeze())
    update_majorants(mc2, tf)
    assert mc2.majorants[0, 0, 0] == pytest.approx(1.0)


def test_empty_cells_have_zero_majorant():
    b = SparseGridBuilder((64, 64, 64))
    b.set_voxel((3, 3, 3), 1.0)
    mc = build_macrocells(b.freeze())
    update_majorants(mc, grey_tf())
    assert mc.majorants[0, 0, 0] > 0
    assert mc.empty.sum() == 7


def test_majorant_bounds_trilinear_samples(blobs_odd, rng):
    grid, _ = compress(blobs_odd, CompressionParams(1.0))
    mc = build_macrocells(grid)
    scene_src = dense_source(grid.to_dense(), grid.background)
    from sparsevol.sampler import _sample_many
    for _ in range(5):
        tf = random_tf(rng)
        update_majorants(mc, tf)
        pts = rng.uniform(0, np.array(grid.dims) - 1, size=(20000, 3))
        vals = _sample_many(scene_src, pts, 1)
        cells = np.minimum((pts // 32).astype(int), np.array(mc.cell_counts) - 1)
        ext = np.array([tf.extinction(v) for v in vals])
        assert np.all(ext <= mc.majorants[tuple(cells.T)])


def test_set_transfer_function_recomputes():
    b = SparseGridBuilder((8, 8, 8))
    b.set_voxel((1, 1, 1), 1.0)
    scene = Scene.build(b.freeze(), grey_tf(scale=1.0))
    before = scene.macrocells.majorants.copy()
    scene.set_transfer_function(grey_tf(scale=3.0))
    assert np.allclose(scene.macrocells.majorants, 3 * before)


# DDA

def brute_force_cells(ncells, cs, o, d, t0, t1):
    out = {}
    for cell in np.ndindex(*ncells):
        lo = np.array(cell) * cs
        hi = lo + cs
        a, b = t0, t1
        for k in range(3):
            if d[k] == 0:
                if not lo[k] <= o[k] < hi[k]:
                    a, b = 1, 0
            else:
                with np.errstate(over="ignore"):
                    ta, tb = sorted(((lo[k] - o[k]) / d[k], (hi[k] - o[k]) / d[k]))
                a, b = max(a, ta), min(b, tb)
        if b - a > 1e-9:
            out[cell] = (a, b)
    return out


def check_dda(ncells, cs, o, d, t_range=(0.0, math.inf)):
    visits = list(dda_traverse(ncells, cs, o, d, t_range))
    oracle = brute_force_cells(ncells, cs, o, d, *t_range)
    if not oracle:
        assert all(tb - ta <= 1e-9 for _, ta, tb in visits)
        return
    long_visits = {c for c, ta, tb in visits if tb - ta > 1e-9}
    assert long_visits == set(oracle)
    assert all(0 <= c[k] < ncells[k] for c, _, _ in visits for k in range(3))
    assert visits[0][1] == pytest.approx(min(a for a, _ in oracle.values()), abs=1e-9)
    assert visits[-1][2] == pytest.approx(max(b for _, b in oracle.values()), abs=1e-9)
    for (_, _, tb), (_, ta, _) in zip(visits, visits[1:]):
        assert ta == tb
    assert len({c for c, _, _ in visits}) == len(visits)


def test_dda_examples():
    assert [c for c, _, _ in dda_traverse((2, 2, 2), 1.0, (-1, 0.5, 0.5), (1, 0, 0))] == [(0, 0, 0), (1, 0, 0)]
    assert list(dda_traverse((2, 2, 2), 1.0, (-1, 5, 0.5), (1, 0, 0))) == []
    visits = list(dda_traverse((4, 1, 1), 32.0, (10, 5, 5), (-1, 0, 0)))
    assert visits == [((0, 0, 0), 0.0, 10.0)]


@settings(max_examples=150)
@given(st.tuples(*(st.integers(1, 6) for _ in range(3))),
       st.sampled_from([1.0, 4.0, 32.0]),
       st.tuples(*(st.floats(-50, 250) for _ in range(3))),
       st.tuples(*(st.floats(-1, 1) for _ in range(3))).filter(lambda v: sum(c * c for c in v) > 1e-4))
def test_dda_matches_brute_force(ncells, cs, o, d):
    check_dda(ncells, cs, np.array(o), np.array(d))


def test_dda_axis_aligned_and_segment():
    check_dda((3, 3, 3), 1.0, np.array([0.5, 0.5, -1.0]), np.array([0.0, 0.0, 1.0]))
    check_dda((5, 4, 3), 2.0, np.array([0.3, 1.1, 0.7]), np.array([0.6, 0.3, 0.2]), (1.0, 9.0))


# Woodcock tracking

def homogeneous_source(value=1.0):
    # constant field everywhere: inside the array and as the background
    return dense_source(np.full((2, 2, 2), value, np.float32), value)


UNIT_TF = TransferFunction((0.0, 1.0), [[1, 1, 1, 1], [1, 1, 1, 1]], 1.0).args


def flights(n, sigma_maj, tb=np.inf, seed=7):
    o = np.zeros((n, 3))
    d = np.tile([1.0, 0.0, 0.0], (n, 1))
    return free_flights(homogeneous_source(), UNIT_TF, sigma_maj, o, d, 0.0, tb, np.uint64(seed), 1)


@pytest.mark.parametrize("sigma_maj", [1.0, 2.5])
def test_woodcock_exponential(sigma_maj):
    t = flights(100_000, sigma_maj)
    assert abs(t.mean() - 1.0) < 0.02
    assert stats.kstest(t, "expon").pvalue > 0.01


def test_woodcock_slab_transmittance():
    n = 100_000
    t = flights(n, 1.5, tb=1.0)
    p = math.exp(-1)
    se = math.sqrt(p * (1 - p) / n)
    assert abs(np.isinf(t).mean() - p) < 3 * se


def test_zero_majorant_is_miss():
    t = free_flights(homogeneous_source(), UNIT_TF, 0.0, np.zeros((4, 3)), np.ones((4, 3)), 0.0, 10.0,
                     np.uint64(1), 1)
    assert np.all(np.isinf(t))


# path tracing

def small_camera(dims, w=24, h=24):
    c = [(n - 1) / 2 for n in dims]
    return Camera((c[0], c[1], c[2] - 2.5 * max(dims)), tuple(c), (0, 1, 0), 40.0, w, h)


def test_empty_scene_is_ambient():
    grid = SparseGridBuilder((32, 32, 32)).freeze()
    s = RenderSettings(spp=2, ambient_radiance=(0.2, 0.5, 0.7))
    rad = render_radiance(Scene.build(grid, grey_tf()), small_camera(grid.dims, 8, 8), s)
    assert np.array_equal(rad, np.broadcast_to([0.2, 0.5, 0.7], rad.shape))


def test_black_albedo_matches_transmittance():
    # a single axial ray through a homogeneous cube with black albedo
    n = 33
    tf = TransferFunction((0.0, 1.0), [[0, 0, 0, 0], [0, 0, 0, 1]], 0.05)
    grid, _ = compress(DenseVolume.from_array(np.ones((n, n, n), np.float32)), CompressionParams(1.0))
    args = Scene.build(grid, tf).args()
    s = RenderSettings().vector()
    cache, state, rng = new_cache(), np.zeros(STATE_SIZE), np.zeros(1, np.uint64)
    from sparsevol.render.integrator import rng_seed
    vals = []
    for i in range(4000):
        rng_seed(rng, np.uint64(3), i, 0, 0)
        vals.append(trace_path(args, cache, state, 16.0, 16.0, -5.0, 0.0, 0.0, 1.0, rng, s)[0])
    vals = np.array(vals)
    p = math.exp(-0.05 * (n - 1))
    assert set(np.unique(vals)) <= {0.0, 1.0}
    assert abs(vals.mean() - p) < 4 * math.sqrt(p * (1 - p) / len(vals))


def analog_cube_radiance(side, sigma, albedo, n, rng):
    """Analog random walk: weight albedo**k after k scatterings, ambient 1."""
    pos = np.tile([side / 2, side / 2, 0.0], (n, 1))
    dirs = np.tile([0.0, 0.0, 1.0], (n, 1))
    weight = np.ones(n)
    out = np.zeros(n)
    alive = np.ones(n, bool)
    while alive.any():
        idx = np.flatnonzero(alive)
        p, d = pos[idx], dirs[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            t_hi = np.where(d > 0, (side - p) / d, np.where(d < 0, -p / d, np.inf))
        exit_t = t_hi.min(axis=1)
        s = rng.exponential(1 / sigma, len(idx))
        esc = s >= exit_t
        out[idx[esc]] = weight[idx[esc]]
        alive[idx[esc]] = False
        sc = idx[~esc]
        pos[sc] += s[~esc, None] * dirs[sc]
        weight[sc] *= albedo
        ct = rng.uniform(-1, 1, len(sc))
        phi = rng.uniform(0, 2 * np.pi, len(sc))
        st_ = np.sqrt(1 - ct * ct)
        dirs[sc] = np.stack([st_ * np.cos(phi), st_ * np.sin(phi), ct], axis=1)
        dead = weight[sc] < 1e-6
        alive[sc[dead]] = False
    return out


def test_scattering_matches_analog_walk(rng):
    n, sigma, albedo = 17, 0.25, 0.5
    side = n - 1
    tf = TransferFunction((0.0, 1.0), [[albedo] * 3 + [0.0], [albedo] * 3 + [1.0]], sigma)
    grid, _ = compress(DenseVolume.from_array(np.ones((n, n, n), np.float32)), CompressionParams(1.0))
    args = Scene.build(grid, tf).args()
    s = RenderSettings().vector()
    cache, state, rng_state = new_cache(), np.zeros(STATE_SIZE), np.zeros(1, np.uint64)
    from sparsevol.render.integrator import rng_seed
    m = 20000
    ours = np.empty(m)
    for i in range(m):
        rng_seed(rng_state, np.uint64(11), i, 1, 2)
        ours[i] = trace_path(args, cache, state, side / 2, side / 2, -1.0, 0.0, 0.0, 1.0, rng_state, s)[0]
    ref = analog_cube_radiance(side, sigma, albedo, 40000, rng)
    se = math.sqrt(ours.var() / m + ref.var() / len(ref))
    assert abs(ours.mean() - ref.mean()) < 4 * se


@pytest.fixture(scope="module")
def blob_scene():
    v = DenseVolume.from_array(synth.blobs((48, 40, 36), 2, count=6))
    grid, _ = compress(v, CompressionParams(1.0))
    tf = TransferFunction((0.0, 1.0), [[0.9, 0.6, 0.3, 0.0], [0.8, 0.8, 0.9, 0.6], [1.0, 0.9, 0.7, 1.0]], 0.6)
    return v, grid, tf


def test_energy_bounded(blob_scene):
    _, grid, tf = blob_scene
    s = RenderSettings(spp=4, seed=2, rr_start_bounce=1)
    rad = render_radiance(Scene.build(grid, tf), small_camera(grid.dims), s)
    assert rad.max() <= 1.0 and rad.min() >= 0.0


def test_skip_empty_does_not_change_image(blob_scene):
    _, grid, tf = blob_scene
    cam = small_camera(grid.dims)
    scene = Scene.build(grid, tf)
    a = render_radiance(scene, cam, RenderSettings(spp=3, skip_empty=True))
    b = render_radiance(scene, cam, RenderSettings(spp=3, skip_empty=False))
    assert np.array_equal(a, b)


def test_threads_and_reruns_identical(blob_scene):
    _, grid, tf = blob_scene
    cam = small_camera(grid.dims, 40, 20)
    s = RenderSettings(spp=2, seed=5)
    a = render(grid, tf, cam, s, threads=1)
    assert np.array_equal(a, render(grid, tf, cam, s, threads=3))
    assert np.array_equal(a, render(grid, tf, cam, s, threads=1))
    assert not np.array_equal(a, render(grid, tf, cam, RenderSettings(spp=2, seed=6)))


def test_dense_substitution(blob_scene):
    v, grid, tf = blob_scene
    cam = small_camera(grid.dims)
    s = RenderSettings(spp=2)
    a = render(grid, tf, cam, s)
    b = render(grid, tf, cam, s, source=dense_source(v.grid, grid.background))
    assert np.array_equal(a, b)


def test_ppm_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, size=(5, 7, 3)).astype(np.uint8)
    write_ppm(tmp_path / "a.ppm", img)
    assert (tmp_path / "a.ppm").read_bytes().startswith(b"P6\n7 5\n255\n")
    assert np.array_equal(read_ppm(tmp_path / "a.ppm"), img)


# ISO marcher

def iso_distance(grid, o, d, iso):
    args = Scene.build(grid, grey_tf()).args()
    return iso_hit(args, new_cache(), np.zeros(STATE_SIZE), *o, *d, iso, 1)


def test_iso_sphere_axial():
    dims = (41, 41, 41)
    v = DenseVolume.from_array(synth.sphere(dims, center=(20, 20, 20), radius=19))
    grid, _ = compress(v, CompressionParams(1.0))
    # field 1 - r/19 crosses 0.5 at r = 9.5
    hit, t = iso_distance(grid, (-10.0, 20.0, 20.0), (1.0, 0.0, 0.0), 0.5)
    assert hit and abs(t - (30 - 9.5)) < 0.01
    hit, t = iso_distance(grid, (20.0, 70.0, 20.0), (0.0, -1.0, 0.0), 0.5)
    assert hit and abs(t - (50 - 9.5)) < 0.01
    hit, _ = iso_distance(grid, (-10.0, 20.0, 20.0), (0.0, 1.0, 0.0), 0.5)
    assert not hit


def test_iso_ramp_normal_color():
    v = DenseVolume.from_array(synth.ramp((40, 32, 32)))
    grid, _ = compress(v, CompressionParams(1.0))
    cam = Camera((-30.0, 15.5, 15.5), (20.0, 15.5, 15.5), (0, 1, 0), 30.0, 16, 16)
    s = RenderSettings(mode="iso", iso_value=0.5, background_color=(0.0, 0.0, 1.0))
    rad = render_radiance(Scene.build(grid, grey_tf()), cam, s)
    assert np.allclose(rad[..., 0], 1.0, atol=0.02)
    assert np.all(rad[..., 1:] <= 0.02)


def test_iso_miss_is_background():
    grid = SparseGridBuilder((16, 16, 16)).freeze()
    s = RenderSettings(mode="iso", background_color=(0.1, 0.2, 0.3))
    rad = render_radiance(Scene.build(grid, grey_tf()), small_camera(grid.dims, 4, 4), s)
    assert np.allclose(rad, [0.1, 0.2, 0.3])
