"""Exception taxonomy shared across the toolkit.

Only ProviderError subclasses are absorbed into per-sample failure records
during a run; anything else propagates and aborts like a crash would.
"""

from __future__ import annotations


class EvalKitError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(EvalKitError):
    """Invalid experiment, batch, or pipeline configuration."""


class SchemaError(EvalKitError):
    """Dataset rows do not match the declared field map."""


class IntegrityError(EvalKitError):
    """Dataset checksum verification failed."""


class TemplateError(EvalKitError):
    """A prompt template placeholder could not be resolved."""

    def __init__(self, placeholder: str):
        super().__init__(f"unresolved placeholder: {placeholder!r}")
        self.placeholder = placeholder


class ProviderError(EvalKitError):
    """Base for text-generation provider failures (recordable per sample)."""

    retryable = False


class AuthError(ProviderError):
    """Authentication or authorization failure. Never retried."""


class RequestTooLargeError(ProviderError):
    """The request exceeds the endpoint's size limits. Never retried."""


class TransientProviderError(ProviderError):
    """Timeout, rate limit, or server-side error. Retried with backoff."""

    retryable = True


class RetriesExhaustedError(ProviderError):
    """All retry attempts failed; carries the last underlying cause."""

    def __init__(self, attempts: int, last_cause: Exception):
        super().__init__(f"gave up after {attempts} attempts: {last_cause}")
        self.attempts = attempts
        self.last_cause = last_cause


class ProtocolError(ProviderError):
    """The endpoint returned a response we could not interpret."""


class UnknownPromptError(ProviderError):
    """A scripted provider received a prompt with no registered response."""


class MetricError(EvalKitError):
    """A metric could not produce a score for one sample."""


class AnalysisInputError(EvalKitError):
    """Analysis inputs are missing or insufficient (e.g. no complete ladders)."""


class ProjectError(EvalKitError):
    """Project directory state is unusable."""


class ProjectLockedError(ProjectError):
    """Another process holds the project lock."""
