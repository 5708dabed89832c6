"""Exception hierarchy.

Every error carries a stable ``code`` string so callers (and the CLI) can
branch on the failure kind without matching messages.
"""

from __future__ import annotations


class StoryweaveError(Exception):
    code = "ERROR"


class ValidationError(StoryweaveError, ValueError):
    code = "VALIDATION"


class ConfigError(ValidationError):
    code = "VALIDATION"


class ParseError(ValidationError):
    code = "PARSE_ERROR"

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidSpec(ValidationError):
    code = "INVALID_SPEC"


class WindowMismatch(StoryweaveError):
    code = "WINDOW_MISMATCH"


class SourceMismatch(StoryweaveError):
    code = "SOURCE_MISMATCH"


class SpanViolation(StoryweaveError):
    code = "SPAN_VIOLATION"


class SameWindow(StoryweaveError):
    code = "SAME_WINDOW"


class LevelMismatch(StoryweaveError):
    code = "LEVEL_MISMATCH"


class WindowConflict(StoryweaveError):
    code = "WINDOW_CONFLICT"


class DuplicateId(StoryweaveError, LookupError):
    code = "DUPLICATE_ID"


class UnknownId(StoryweaveError, LookupError):
    code = "UNKNOWN_ID"


class EmptyCluster(StoryweaveError):
    code = "EMPTY_CLUSTER"


class UnknownCluster(StoryweaveError, LookupError):
    code = "UNKNOWN_CLUSTER"


class UnknownSource(StoryweaveError, LookupError):
    code = "UNKNOWN_SOURCE"


class DuplicateSource(StoryweaveError):
    code = "DUPLICATE_SOURCE"


class AlreadyRunning(StoryweaveError):
    code = "ALREADY_RUNNING"


class MissingAssignment(ValidationError):
    code = "MISSING_ASSIGNMENT"

    def __init__(self, missing) -> None:
        self.missing = sorted(missing)
        shown = ", ".join(self.missing[:20])
        more = "" if len(self.missing) <= 20 else f" (+{len(self.missing) - 20} more)"
        super().__init__(f"no assignment for: {shown}{more}")
