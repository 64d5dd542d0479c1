"""Exception taxonomy shared by every module.

The CLI maps these onto its exit codes: configuration problems (bad flags,
bad config files, shape mismatches, unparseable inputs) exit 1, numerical
failures (non-finite values, degenerate statistics) exit 2.
"""


class DfregError(Exception):
    """Base class for all package errors."""


class ConfigError(DfregError):
    """Invalid configuration, flags, or argument combinations."""


class ShapeError(ConfigError):
    """Tensor dimension mismatch; the message names the offending axis."""


class ParseError(ConfigError):
    """Malformed input file. Carries the byte offset where parsing failed."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericError(DfregError):
    """Non-finite values or numerically degenerate state."""
