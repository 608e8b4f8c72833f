"""Exception types shared across the engine."""

from __future__ import annotations


class ModelAdaptError(Exception):
    """Base class for all engine errors."""

    code = "error"

    def __init__(self, message: str, location=None):
        super().__init__(message)
        self.message = message
        self.location = location


class ParseError(ModelAdaptError):
    """Malformed catalog document or template text."""

    code = "parse_error"


class ModelError(ModelAdaptError):
    """Structural invariant of the catalog is violated."""

    code = "model_error"


class ResolutionError(ModelAdaptError):
    """A source path cannot be resolved against the role-based model."""

    code = "resolution_error"


class PlanError(ModelAdaptError):
    """A presentation or query plan cannot be produced."""

    code = "plan_error"


class RightsError(ModelAdaptError):
    """The client lacks the right required for an operation."""

    code = "rights_error"


class NotFound(ModelAdaptError):
    """A referenced table or row does not exist (or is policy-hidden)."""

    code = "not_found"


class ConstraintError(ModelAdaptError):
    """A data constraint was violated.

    ``kind`` is one of ``not_null``, ``unique``, ``fkey``, ``fkey_restrict``
    or ``type``.
    """

    code = "constraint_error"

    def __init__(self, message: str, kind: str = "unknown", location=None):
        super().__init__(message, location)
        self.kind = kind
