"""Exception hierarchy shared across the package.

Everything raised deliberately by this package derives from
:class:`HapredictError`, so callers can catch one type at pipeline
boundaries while OS-level errors (missing files, sockets) propagate
unchanged.
"""


class HapredictError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(HapredictError, ValueError):
    """An argument violates an operation's precondition."""


class InsufficientAudiogramError(HapredictError, ValueError):
    """The audiogram does not cover the frequencies an operation needs."""


class FormatError(HapredictError, ValueError):
    """A file or payload is structurally not in a supported format."""


class EmptySignalError(HapredictError, ValueError):
    """An audio file or signal contains no samples."""


class ConditioningError(HapredictError, ArithmeticError):
    """A matrix used in filter construction is too ill-conditioned to invert."""


class ConfigError(HapredictError, ValueError):
    """Invalid, incomplete, or contradictory run configuration."""


class BackendError(HapredictError, RuntimeError):
    """A judge or scorer backend answered with an application-level failure.

    Application-level means the backend was reached and replied, but the
    reply is unusable: a non-success HTTP status, a nonzero process exit,
    a missing fixture file, or a malformed payload. These are not retried.
    """


class JudgeUnavailableError(HapredictError, RuntimeError):
    """An ASR judge could not be reached after all transport retries."""

    def __init__(self, judge_id: str, message: str):
        super().__init__(f"judge {judge_id!r}: {message}")
        self.judge_id = judge_id


class ScorerUnavailableError(HapredictError, RuntimeError):
    """The scoring backend could not be reached after all transport retries."""


class UnparsableReplyError(HapredictError, ValueError):
    """A scoring reply contains no usable number."""


class ScoringFailedError(HapredictError, RuntimeError):
    """A transcript could not be scored even after one re-ask."""


class UndefinedCorrelationError(HapredictError, ArithmeticError):
    """Correlation is undefined because an input vector is constant."""
