"""Exception hierarchy shared by every layer.

Each error carries a stable machine-readable ``code`` that the HTTP layer
maps to a status and the CLI prints to stderr. Raise these from the core;
never let raw ValueErrors cross a module boundary.
"""

from __future__ import annotations


class OpenIntakeError(Exception):
    code = "internal_error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__


# -- content model ----------------------------------------------------------

class DuplicateTypeId(OpenIntakeError):
    code = "duplicate_type_id"


class EmptySchema(OpenIntakeError):
    code = "empty_schema"


class InvalidSchema(OpenIntakeError):
    code = "invalid_schema"


class UnknownType(OpenIntakeError):
    code = "unknown_type"


class UnknownSite(OpenIntakeError):
    code = "unknown_site"


class DuplicateSite(OpenIntakeError):
    code = "duplicate_site"


class UnknownSection(OpenIntakeError):
    code = "unknown_section"


class DuplicateSection(OpenIntakeError):
    code = "duplicate_section"


class UnknownParent(OpenIntakeError):
    code = "unknown_parent"


class CycleWouldForm(OpenIntakeError):
    code = "cycle_would_form"


class ValidationFailed(OpenIntakeError):
    """Payload failed schema validation; ``report`` lists every violation."""

    code = "validation_failed"

    def __init__(self, report):
        super().__init__("payload failed validation")
        self.report = report


# -- submission engine ------------------------------------------------------

class UnknownElement(OpenIntakeError):
    code = "unknown_element"


class TypeNotAllowed(OpenIntakeError):
    code = "type_not_allowed"


class PolicyDenied(OpenIntakeError):
    code = "policy_denied"


class InputDisabled(OpenIntakeError):
    code = "input_disabled"


class NotAuthorized(OpenIntakeError):
    code = "not_authorized"


class ConflictRetryExhausted(OpenIntakeError):
    """Concurrent writers kept invalidating our read; caller should retry."""

    code = "conflict"


# -- editor links -----------------------------------------------------------

class UnknownToken(OpenIntakeError):
    code = "unknown_token"


class Revoked(OpenIntakeError):
    code = "revoked"


class ElementGone(OpenIntakeError):
    code = "element_gone"


class TypeChangeForbidden(OpenIntakeError):
    code = "type_change_forbidden"


class InvalidEmail(OpenIntakeError):
    code = "invalid_email"


# -- notifier ---------------------------------------------------------------

class InvalidRecipient(OpenIntakeError):
    code = "invalid_recipient"


class AdapterFailure(OpenIntakeError):
    """Outbound delivery failed; retriable."""

    code = "adapter_failure"


# -- store ------------------------------------------------------------------

class AlreadyExists(OpenIntakeError):
    code = "already_exists"


class NotFound(OpenIntakeError):
    code = "not_found"


class VersionConflict(OpenIntakeError):
    code = "version_conflict"


class StoreLocked(OpenIntakeError):
    """Another process holds the data directory's exclusive lock."""

    code = "store_locked"


# -- http layer -------------------------------------------------------------

class RateLimited(OpenIntakeError):
    code = "rate_limited"

    def __init__(self, message: str = "rate limit exceeded", retry_after: float = 0.0):
        super().__init__(message)
        self.retry_after = retry_after


class ConfigError(OpenIntakeError):
    code = "config_error"
