from typing import Any, Dict, Optional


class StreamixError(Exception):
    """Base class for every failure the toolkit reports on purpose."""

    code = "streamix_error"

    def __init__(self, message: str, detail: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.detail = detail or {}

    def to_dict(self) -> Dict[str, Any]:
        return {"error": self.code, "message": self.message, "detail": self.detail}


class ConfigError(StreamixError):
    code = "config_error"


class InsufficientDataError(StreamixError):
    code = "insufficient_data"


class DegenerateInputError(StreamixError):
    code = "degenerate_input"


class InitFailureError(StreamixError):
    code = "init_failure"


class StreamExhaustedError(StreamixError):
    code = "stream_exhausted"


class EmptyClusterError(StreamixError):
    code = "empty_cluster"


class NonConvergenceError(StreamixError):
    code = "non_convergence"


class AccountingError(StreamixError):
    code = "accounting_error"


class InvariantViolation(StreamixError):
    code = "invariant_violation"


class InvalidInputError(StreamixError):
    code = "invalid_input"
