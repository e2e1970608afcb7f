"""Exception hierarchy.

Split mirrors the CLI exit codes: :class:`DataFormatError` and its
subclasses map to exit code 3, :class:`InternalError` to 4.  Anything
else escaping a command is a bug.
"""


class DcompError(Exception):
    pass


class DataFormatError(DcompError):
    """A file or byte stream does not conform to an on-disk format."""


class BadMagicError(DataFormatError):
    pass


class UnsupportedVersionError(DataFormatError):
    pass


class TruncatedError(DataFormatError):
    pass


class ChecksumError(DataFormatError):
    """Payload integrity failure; carries the offending chunk index."""

    def __init__(self, chunk_index: int, message: str | None = None):
        self.chunk_index = chunk_index
        super().__init__(message or f"checksum mismatch in chunk {chunk_index}")


class CorruptStreamError(DataFormatError):
    """An entropy-coded payload cannot be decoded."""


class InternalError(DcompError):
    """An internal invariant was violated; indicates a bug, not bad input."""
