"""Two-level referential compression for collections of similar genomes."""

from .errors import (
    ConfigError,
    CorruptArchiveError,
    FastaParseError,
    Gdc2Error,
    UnsupportedInputError,
)
from .model import Params
from .pipeline import compress, decompress, extract

__version__ = "0.1.0"

__all__ = [
    "Params",
    "compress",
    "decompress",
    "extract",
    "Gdc2Error",
    "ConfigError",
    "FastaParseError",
    "CorruptArchiveError",
    "UnsupportedInputError",
    "__version__",
]
