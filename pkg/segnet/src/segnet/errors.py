"""Exception hierarchy; everything raised on purpose derives from SegnetError."""


class SegnetError(Exception):
    """Base class for all errors this package raises deliberately."""


class ParameterError(SegnetError):
    """An argument violates its documented domain."""


class FormatError(SegnetError):
    """A file does not match the interchange format it claims to be."""


class ShapeError(SegnetError):
    """A raster size is incompatible with the network topology."""


class DatasetError(SegnetError):
    """A dataset directory cannot supply what training needs."""
