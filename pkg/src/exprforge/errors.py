"""Exception types shared across the package."""


class ExprForgeError(Exception):
    """Base class for all errors raised by this package."""


# --- database loading ---

class MissingFile(ExprForgeError):
    pass


class SchemaViolation(ExprForgeError):
    def __init__(self, field: str, record: str, detail: str = ""):
        self.field = field
        self.record = record
        msg = f"schema violation in {record!r}, field {field!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class DuplicateTagName(ExprForgeError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"duplicate tag name {name!r}")


class AliasCollision(ExprForgeError):
    def __init__(self, alias: str, tag_a: str, tag_b: str):
        self.alias = alias
        self.tag_a = tag_a
        self.tag_b = tag_b
        super().__init__(f"alias {alias!r} claimed by both {tag_a!r} and {tag_b!r}")


class UnsupportedLanguage(ExprForgeError):
    pass


# --- edit pipeline ---

class DimensionMismatch(ExprForgeError):
    pass


class EmptySelection(ExprForgeError):
    pass


class MaskNotBinary(ExprForgeError):
    pass


class ParamOutOfRange(ExprForgeError):
    def __init__(self, name: str, detail: str = ""):
        self.param = name
        msg = f"parameter {name!r} out of range"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class EditIterationError(ExprForgeError):
    """Wraps an error raised while folding a sequence of edits."""

    def __init__(self, step: int, cause: Exception):
        self.step = step
        self.cause = cause
        super().__init__(f"edit step {step} failed: {cause}")


# --- backends ---

class BackendError(ExprForgeError):
    pass


class Timeout(BackendError):
    pass


class EndpointUnavailable(BackendError):
    pass


class MalformedResponse(BackendError):
    pass


class DimensionMismatchFromBackend(BackendError):
    pass


# --- retrieval / llm ---

class NoValidTagInResponse(ExprForgeError):
    pass
