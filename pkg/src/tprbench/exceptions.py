"""Error types raised across the package.

The CLI maps these onto exit code 1 (input error); anything else that
escapes is an internal error (exit code 2).
"""


class InvalidInputError(ValueError):
    """Input violates a documented precondition or invariant."""


class UnscorableQueryError(InvalidInputError):
    """A rank list has no matched entry, so per-query metrics are undefined."""


class AnnotationFormatError(InvalidInputError):
    """Annotation file is malformed; message names the line and/or field."""


class DuplicateIdError(AnnotationFormatError):
    """The same image_id appears more than once in an annotation file."""


class EmbeddingFormatError(InvalidInputError):
    """Embedding file is malformed: bad magic, version, truncation, or values."""
