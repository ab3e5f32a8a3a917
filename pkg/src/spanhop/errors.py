"""Exception hierarchy shared across the toolkit.

Exit codes follow the CLI contract: 0 ok, 2 validation, 3 transport,
4 integrity.
"""

from __future__ import annotations


class ToolkitError(Exception):
    code = "error"
    exit_code = 1


class ValidationFailure(ToolkitError):
    """Invalid input data, config, or schema violation."""

    code = "validation_error"
    exit_code = 2

    def __init__(self, message: str, fields: dict[str, str] | None = None):
        super().__init__(message)
        self.fields = fields or {}


class ConflictError(ToolkitError):
    """Key collision or idempotency-id reuse with different content."""

    code = "conflict"
    exit_code = 2


class NotFoundError(ToolkitError):
    code = "not_found"
    exit_code = 2


class TransportError(ToolkitError):
    """Endpoint unreachable or returned a non-recoverable HTTP status."""

    code = "transport_error"
    exit_code = 3
    retryable = True


class ReplayMissError(TransportError):
    """Replay fixture has no entry for the requested key."""

    code = "replay_miss"
    retryable = False


class FormatError(ToolkitError):
    """Model output could not be parsed; keeps the raw text for auditing."""

    code = "format_error"
    exit_code = 2

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


class IntegrityError(ToolkitError):
    """On-disk store corruption."""

    code = "integrity_error"
    exit_code = 4

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset
