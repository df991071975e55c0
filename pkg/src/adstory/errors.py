"""Exception types shared across the toolkit."""


class AdstoryError(Exception):
    """Base class for all toolkit errors."""


class FormatError(AdstoryError):
    """A file does not conform to its documented format."""

    def __init__(self, message, path=None, offset=None, line=None):
        detail = message
        if path is not None:
            detail = f"{path}: {detail}"
        if offset is not None:
            detail = f"{detail} (byte offset {offset})"
        if line is not None:
            detail = f"{detail} (line {line})"
        super().__init__(detail)
        self.path = path
        self.offset = offset
        self.line = line


class ValidationError(AdstoryError):
    """Parsed data violates a documented invariant."""


class NumericError(AdstoryError):
    """A numeric failure (NaN loss, divergence) aborted a computation."""
