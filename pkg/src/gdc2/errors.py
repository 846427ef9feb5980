"""Exception types shared across the package."""


class Gdc2Error(Exception):
    """Base class for all errors raised on purpose by this package."""


class ConfigError(Gdc2Error):
    """Invalid parameter combination or command-line usage."""


class FastaParseError(Gdc2Error):
    """Malformed FASTA input.

    Carries the source path and the byte offset of the offending data so
    the message can point at the exact spot in a multi-gigabyte file.
    """

    def __init__(self, message, path=None, offset=None):
        self.path = path
        self.offset = offset
        loc = ""
        if path is not None:
            loc = f" in {path}"
        if offset is not None:
            loc += f" at byte {offset}"
        super().__init__(message + loc)


class CorruptArchiveError(Gdc2Error):
    """Archive bytes fail a structural or consistency check."""


class UnsupportedInputError(Gdc2Error):
    """Input is well formed but exceeds a documented format limit."""
