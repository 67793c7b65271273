"""Exception hierarchy shared by all multishot modules.

The CLI maps these onto stable exit codes: validation/configuration
problems exit 2, file-format and I/O problems exit 3, and metrics that
cannot be computed for the given input exit 4.
"""


class MultishotError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(MultishotError):
    """Input violates a documented precondition or invariant."""


class ConfigError(ValidationError):
    """Bad configuration value (unknown extractor, incompatible preset, ...)."""


class ShapeError(ValidationError):
    """Array dimensions are inconsistent with each other."""


class DegenerateRowError(ValidationError):
    """An attention score row has no admissible entry (a shot of zero tokens)."""


class FormatError(MultishotError):
    """A binary or JSON artifact does not conform to its file format."""


class NotComputableError(MultishotError):
    """The requested quantity is undefined for this input (e.g. inter-shot
    metrics of a single-shot video)."""
