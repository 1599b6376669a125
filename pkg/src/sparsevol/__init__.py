"""Fixed-rate sparse voxel tree compression and volume path tracing."""
from .compressor import CompressionParams, CompressionReport, Metric, compress, lossless_quality
from .frozen import Accessor, FrozenGrid, read_frozen, write_frozen
from .tree import SparseGridBuilder
from .volume import DenseVolume, load_raw

__all__ = [
    "Accessor", "CompressionParams", "CompressionReport", "DenseVolume", "FrozenGrid", "Metric",
    "SparseGridBuilder", "compress", "load_raw", "lossless_quality", "read_frozen", "write_frozen",
]
