from .dda import dda_traverse
from .frame import Camera, RenderSettings, Scene, load_view, read_ppm, render, render_radiance, tonemap, write_ppm
from .macrocells import MacrocellGrid, build_macrocells, update_majorants
from .transfer import TransferFunction

__all__ = [
    "Camera", "MacrocellGrid", "RenderSettings", "Scene", "TransferFunction", "build_macrocells",
    "dda_traverse", "load_view", "read_ppm", "render", "render_radiance", "tonemap", "update_majorants",
    "write_ppm",
]
