"""Exception types raised across the package.

The CLI maps these onto exit codes: configuration and parse problems are
usage errors (1), unreadable or unsupported input is an I/O error (2), and
numeric or structural failures during processing are processing errors (3).
"""


class AnonymisationError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(AnonymisationError, ValueError):
    """Invalid configuration value or frame geometry."""


class ParseError(ConfigError):
    """Malformed manifest, trials or config file."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class InputError(AnonymisationError):
    """Audio that cannot be processed as given (e.g. wrong sample rate)."""


class UnsupportedFormatError(InputError):
    """WAV file outside the supported PCM16 mono subset."""


class DecodeError(InputError):
    """Truncated or corrupt WAV file."""


class NumericError(AnonymisationError, ArithmeticError):
    """Non-finite values or an unstable filter."""

    def __init__(self, message, frame_index=None):
        self.frame_index = frame_index
        self.detail = message
        if frame_index is not None:
            message = f"frame {frame_index}: {message}"
        super().__init__(message)


class StructuralError(AnonymisationError):
    """Inconsistent data structure, e.g. a pole set that is not conjugate-closed."""
