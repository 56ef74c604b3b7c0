"""Exception types shared across the package.

File problems surface as the built-in OSError family; everything the
package itself detects derives from CotermError.  Scheduler protocol
errors carry a wire code and an HTTP status so the service and the client
can map them without a separate table.
"""


class CotermError(Exception):
    """Base class for errors raised by this package."""


class FormatError(CotermError):
    """An input file does not match the expected line layout."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = "line %d: %s" % (line_no, message)
        super().__init__(message)
        self.line_no = line_no


class EncodingError(CotermError):
    """Input bytes are not valid UTF-8."""


class EmptyTermError(CotermError):
    """A term normalized to zero tokens."""


class InvalidCountsError(CotermError):
    """Co-occurrence counts violate n_ab <= min(n_a, n_b)."""


class ConfigError(CotermError):
    """A configuration file is malformed or incomplete."""


class ScenarioError(CotermError):
    """A simulation scenario or generator parameter is out of range."""


class StoreCorruptError(CotermError):
    """The scheduler store failed its integrity check on open."""


class SchedulerUnreachableError(CotermError):
    """The scheduler endpoint could not be reached."""


class SchedulerError(CotermError):
    """Base class for scheduler protocol errors."""

    code = "scheduler_error"
    http_status = 400


class MalformedResourceIdError(SchedulerError):
    code = "malformed_resource_id"
    http_status = 400


class UnknownResourceError(SchedulerError):
    code = "unknown_resource"
    http_status = 404


class UnknownTaskError(SchedulerError):
    code = "unknown_task"
    http_status = 404


class NotOwnerError(SchedulerError):
    code = "not_owner"
    http_status = 403


class AlreadyCompleteError(SchedulerError):
    code = "already_complete"
    http_status = 409


class QuotaExceededError(SchedulerError):
    code = "quota_exceeded"
    http_status = 429


PROTOCOL_ERRORS = {
    cls.code: cls
    for cls in (
        MalformedResourceIdError,
        UnknownResourceError,
        UnknownTaskError,
        NotOwnerError,
        AlreadyCompleteError,
        QuotaExceededError,
        SchedulerError,
    )
}
