"""Exception hierarchy shared by the library and the command line."""


class BendlabError(Exception):
    """Base class for every error raised on purpose by bendlab"""


class ConfigurationError(BendlabError):
    """Invalid parameters, descriptors or unsupported generator settings"""


class DomainError(BendlabError):
    """A point or parameter lies outside the set an operation is defined on"""


class ResolutionError(BendlabError):
    """A raster is too coarse for the requested scale"""

    def __init__(self, message, max_scale_index):
        super().__init__(message)
        self.max_scale_index = max_scale_index


class FitError(BendlabError):
    """A decay curve does not hold enough usable points for a rate fit"""


class RasterFormatError(BendlabError):
    """Base class for raster input failures"""


class MissingFileError(RasterFormatError, FileNotFoundError):
    """The raster file does not exist"""


class MalformedHeaderError(RasterFormatError):
    """The PGM magic number is valid but the header or payload is broken"""


class UnsupportedFormatError(RasterFormatError):
    """The file is not an 8-bit P2/P5 PGM"""


class SchemaError(BendlabError):
    """A CSV/JSON document carries an unknown or missing schema tag"""
