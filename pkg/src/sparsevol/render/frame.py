"""Frame orchestration: camera, settings, tiled rendering and PPM output.

World space is continuous voxel space: voxel (i, j, k) sits at (i, j, k) and
the medium occupies the box ``[0, dims - 1]``.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..frozen import FrozenGrid
from ..sampler import SampleMode, grid_source
from . import integrator as K
from .macrocells import MacrocellGrid, build_macrocells, update_majorants
from .transfer import TransferFunction

TILE = 16


@dataclass(frozen=True)
class Camera:
    position: tuple[float, float, float]
    look_at: tuple[float, float, float]
    up: tuple[float, float, float] = (0.0, 1.0, 0.0)
    fov_y: float = 45.0
    width: int = 128
    height: int = 128

    def basis(self) -> np.ndarray:
        pos = np.asarray(self.position, dtype=np.float64)
        fwd = np.asarray(self.look_at, dtype=np.float64) - pos
        if np.linalg.norm(fwd) == 0:
            raise ValueError("camera position and look_at coincide")
        fwd /= np.linalg.norm(fwd)
        right = np.cross(fwd, np.asarray(self.up, dtype=np.float64))
        if np.linalg.norm(right) < 1e-12:
            raise ValueError("camera up vector is parallel to the view direction")
        right /= np.linalg.norm(right)
        up = np.cross(right, fwd)
        tan_half = math.tan(math.radians(self.fov_y) / 2)
        return np.concatenate([pos, fwd, right, up, [tan_half]])


@dataclass(frozen=True)
class RenderSettings:
    spp: int = 16
    max_bounces: int = 64
    rr_start_bounce: int = 3
    seed: int = 0
    mode: str = "pathtrace"
    iso_value: float = 0.5
    ambient_radiance: tuple[float, float, float] = (1.0, 1.0, 1.0)
    background_color: tuple[float, float, float] = (0.0, 0.0, 0.0)
    sample_mode: SampleMode = SampleMode.TRILINEAR
    skip_empty: bool = True

    def __post_init__(self):
        if self.spp < 1:
            raise ValueError("spp must be >= 1")
        if self.mode not in ("pathtrace", "iso"):
            raise ValueError(f"mode must be 'pathtrace' or 'iso', got {self.mode!r}")

    def vector(self) -> np.ndarray:
        s = np.zeros(K.SETTINGS_SIZE, dtype=np.float64)
        s[K.S_MAX_BOUNCES] = self.max_bounces
        s[K.S_RR_START] = self.rr_start_bounce
        s[K.S_AMBIENT:K.S_AMBIENT + 3] = self.ambient_radiance
        s[K.S_BACKGROUND:K.S_BACKGROUND + 3] = self.background_color
        s[K.S_ISO] = self.iso_value
        s[K.S_SKIP_EMPTY] = float(self.skip_empty)
        s[K.S_SAMPLE_MODE] = int(self.sample_mode)
        return s


def load_view(path: str | os.PathLike) -> tuple[Camera, RenderSettings]:
    """Read camera and settings from one JSON document."""
    with open(path) as fh:
        d = json.load(fh)
    cam = Camera(
        position=tuple(d["position"]),
        look_at=tuple(d["look_at"]),
        up=tuple(d.get("up", (0.0, 1.0, 0.0))),
        fov_y=float(d.get("fov_y", 45.0)),
        width=int(d.get("width", 128)),
        height=int(d.get("height", 128)),
    )
    kw = {}
    for key, conv in (("spp", int), ("seed", int), ("mode", str), ("iso_value", float),
                      ("max_bounces", int), ("rr_start_bounce", int), ("skip_empty", bool)):
        if key in d:
            kw[key] = conv(d[key])
    for key in ("ambient_radiance", "background_color"):
        if key in d:
            kw[key] = tuple(float(c) for c in d[key])
    if "sample_mode" in d:
        kw["sample_mode"] = SampleMode[d["sample_mode"].upper()]
    return cam, RenderSettings(**kw)


@dataclass
class Scene:
    grid: FrozenGrid
    tf: TransferFunction
    macrocells: MacrocellGrid
    source: tuple = field(default=None)

    @classmethod
    def build(cls, grid: FrozenGrid, tf: TransferFunction, source: tuple | None = None) -> "Scene":
        mc = build_macrocells(grid)
        update_majorants(mc, tf)
        return cls(grid, tf, mc, source if source is not None else grid_source(grid))

    def set_transfer_function(self, tf: TransferFunction) -> None:
        self.tf = tf
        update_majorants(self.macrocells, tf)

    def args(self) -> tuple:
        hull = np.array([max(n - 1, 0) for n in self.grid.dims], dtype=np.float64)
        return (
            self.source,
            self.tf.args,
            self.macrocells.ranges,
            self.macrocells.majorants,
            np.array(self.macrocells.cell_counts, dtype=np.int64),
            float(self.macrocells.cell_size),
            hull,
        )


def render_radiance(scene: Scene, cam: Camera, settings: RenderSettings, threads: int = 1) -> np.ndarray:
    """Linear radiance image of shape (height, width, 3).

    Pixels are split into tiles rendered by a thread pool; every sample draws
    from its own counter-keyed stream, so the result does not depend on
    ``threads``.
    """
    image = np.zeros((cam.height, cam.width, 3), dtype=np.float64)
    args = scene.args()
    basis = cam.basis()
    svec = settings.vector()
    seed = np.uint64(settings.seed % (1 << 64))
    iso = settings.mode == "iso"
    tiles = [(x, y, min(x + TILE, cam.width), min(y + TILE, cam.height))
             for y in range(0, cam.height, TILE) for x in range(0, cam.width, TILE)]

    def work(tile):
        K.render_tile(args, basis, svec, seed, settings.spp, iso, *tile, image)

    if threads <= 1:
        for tile in tiles:
            work(tile)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, tiles))
    return image


def tonemap(radiance: np.ndarray, gamma: float = 2.2) -> np.ndarray:
    """Clamp to [0, 1], gamma-encode and quantize to 8 bits."""
    c = np.clip(radiance, 0.0, 1.0) ** (1.0 / gamma)
    return np.floor(c * 255.0 + 0.5).astype(np.uint8)


def write_ppm(path: str | os.PathLike, rgb8: np.ndarray) -> None:
    h, w, _ = rgb8.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(rgb8, dtype=np.uint8).tobytes())


def read_ppm(path: str | os.PathLike) -> np.ndarray:
    data = open(path, "rb").read()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P6":
        raise ValueError("not a binary PPM")
    w, h = int(parts[1]), int(parts[2])
    pixels = data[len(data) - w * h * 3:]
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w, 3)


def render(grid: FrozenGrid, tf: TransferFunction, cam: Camera, settings: RenderSettings,
           threads: int = 1, source: tuple | None = None) -> np.ndarray:
    """Render to an 8-bit RGB image. ``source`` overrides where samples are read from."""
    scene = Scene.build(grid, tf, source)
    return tonemap(render_radiance(scene, cam, settings, threads))
