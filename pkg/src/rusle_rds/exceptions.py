"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`RusleError`.
The three category bases map onto the CLI exit codes (validation, I/O,
computation).
"""


class RusleError(Exception):
    """Base class for all package errors."""


class ValidationError(RusleError, ValueError):
    """Inputs or configuration violate a documented precondition."""


class InputIOError(RusleError, OSError):
    """A file could not be read, parsed or written."""


class ComputationError(RusleError, ArithmeticError):
    """A computation could not produce a meaningful result."""


class AlignmentError(ValidationError):
    """Rasters that must share a grid do not."""


class ExtentError(ValidationError):
    """Source and target extents do not overlap."""


class EmptyStackError(ValidationError):
    """A reduction was requested over an empty list."""


class DomainError(ValidationError):
    """A value lies outside the mathematical domain of an operation."""


class RegistryError(ValidationError):
    """Unknown, duplicate or missing indicator definitions."""


class InsufficientDataError(ValidationError):
    """Not enough data (e.g. no complete year) for the requested statistic."""


class EmptyRegionError(ValidationError):
    """A region mask selects no valid cell."""


class ConfigError(ValidationError):
    """Configuration document is malformed or inconsistent."""


class UnmappedClassError(ValidationError):
    """Land-cover codes absent from the cover table."""

    def __init__(self, codes):
        self.codes = sorted(codes)
        super().__init__(f"land-cover codes missing from cover table: {self.codes}")


class OrderingError(ValidationError):
    """Time series records are not strictly increasing."""


class FormatError(ValidationError):
    """Time series step is irregular or unsupported."""


class ParseError(InputIOError):
    """Malformed file content; ``line`` is 1-based when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class DegenerateWeightsError(ComputationError):
    """All weights are zero."""


class RenderError(ComputationError):
    """A raster cannot be rendered (e.g. it has no valid cell)."""


class RecordError(ValidationError):
    """An offending row in a tabular input; ``line`` is 1-based."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = f"{path}:{line}" if path is not None else f"line {line}"
        super().__init__(f"{where}: {message}")
