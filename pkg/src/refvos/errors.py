"""Exception types shared across the toolkit.

Each class doubles as a builtin exception (ValueError / RuntimeError /
OSError) so callers that do not know about the library hierarchy still
get sensible behavior.
"""


class RefvosError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(RefvosError, ValueError):
    """Mask or grid dimensions are invalid or do not match."""


class AlignmentError(RefvosError, ValueError):
    """Trajectories or manifests that must line up do not."""


class ParseError(RefvosError, ValueError):
    """A document could not be parsed; the message carries the node path."""


class IntegrityError(RefvosError, ValueError):
    """Duplicate or mutually inconsistent identifiers in a document."""


class UsageError(RefvosError, ValueError):
    """An operation was invoked with arguments outside its contract."""


class ConfigError(RefvosError, ValueError):
    """Invalid pipeline, endpoint, or scenario configuration."""


class WriteError(RefvosError, OSError):
    """An output file could not be written; the message names the file."""


class BackendError(RefvosError, RuntimeError):
    """A model backend failed at the transport level.

    ``retryable`` distinguishes transient transport failures (connection
    refused, timeout, HTTP 5xx) from definitive ones (unknown fixture key,
    HTTP 4xx).
    """

    def __init__(self, message: str, *, retryable: bool = False):
        super().__init__(message)
        self.retryable = retryable


class ProtocolError(RefvosError, RuntimeError):
    """A backend answered with a malformed or contract-violating response."""
