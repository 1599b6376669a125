"""Exception hierarchy shared by all modules."""


class SparseVolError(Exception):
    """Base class; the CLI maps any subclass to exit code 1."""


class SizeMismatch(SparseVolError):
    pass


class NonFiniteVoxel(SparseVolError):
    pass


class EmptyBox(SparseVolError):
    pass


class OutOfBounds(SparseVolError):
    pass


class Misaligned(SparseVolError):
    pass


class BadMagic(SparseVolError):
    pass


class VersionMismatch(SparseVolError):
    pass


class CorruptIndex(SparseVolError):
    pass


class InvalidQuality(SparseVolError):
    pass


class DimsMismatch(SparseVolError):
    pass
