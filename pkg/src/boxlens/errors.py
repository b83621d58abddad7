"""Exception hierarchy shared across the toolkit.

Three broad families map onto distinct CLI exit codes: configuration
problems (bad parameters, malformed specs), data problems (files,
parsing, schema violations) and computation problems (fits that fail,
metrics that are undefined).
"""


class BoxlensError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigError(BoxlensError):
    """Invalid parameters, grid specs, or pipeline configuration."""

    exit_code = 2


class DataError(BoxlensError):
    """Problems with input data: missing files, parse failures, schema."""

    exit_code = 3


class ComputationError(BoxlensError):
    """A computation could not be carried out (fit failure, undefined metric)."""

    exit_code = 4


class CsvParseError(DataError):
    """Malformed CSV input; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(DataError):
    """Column names/kinds do not match what an operation expects."""


class UnimputableError(DataError):
    """A column cannot be imputed (no observed values at all)."""


class FitError(ComputationError):
    """Model training failed (singular design, empty data, bad target)."""


class KernelWidthError(ComputationError):
    """All perturbation weights collapsed to ~0; a larger width is needed."""


class UndefinedMetricError(ComputationError):
    """Metric has no defined value for the given inputs (e.g. one-class AUC)."""
