"""Exception hierarchy shared across the package.

Three broad classes matter to callers (and to the CLI exit-code mapping):
configuration problems, numerical failures, and evaluator failures.
"""

from __future__ import annotations

__all__ = [
    "PcePerfError",
    "ConfigError",
    "DatasetFormatError",
    "ModelFileError",
    "NumericalError",
    "UnsupportedDegreeError",
    "SizeLimitError",
    "DomainError",
    "UnderdeterminedError",
    "RankDeficiencyError",
    "InsufficientSamplesError",
    "DegenerateMeanError",
    "DegenerateVarianceError",
    "EvaluationError",
    "InstabilityError",
    "DatasetLookupError",
]


class PcePerfError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(PcePerfError):
    """Invalid configuration, problem setup, or input file; message names the field."""


class DatasetFormatError(ConfigError):
    """Malformed dataset file (bad header, non-numeric cell, empty table)."""


class ModelFileError(PcePerfError):
    """Saved-model document is corrupt or has an unsupported version."""


class NumericalError(PcePerfError):
    """A numerical routine could not produce a trustworthy result."""


class UnsupportedDegreeError(NumericalError):
    """Polynomial degree outside the supported range."""


class SizeLimitError(NumericalError):
    """A grid or basis would exceed the hard size limit."""


class DomainError(NumericalError):
    """Argument outside the mathematical domain of the operation."""


class UnderdeterminedError(NumericalError):
    """Fewer samples than basis functions in a regression fit."""


class RankDeficiencyError(NumericalError):
    """Design matrix is numerically rank-deficient."""

    def __init__(self, message: str, deficient_columns: int = 0):
        super().__init__(message)
        self.deficient_columns = deficient_columns


class InsufficientSamplesError(NumericalError):
    """Not enough samples for the requested estimate."""


class DegenerateMeanError(NumericalError):
    """Mean too close to zero for a mean-relative quantity."""


class DegenerateVarianceError(NumericalError):
    """Variance too close to zero for a variance-relative quantity."""


class EvaluationError(PcePerfError):
    """A model evaluator failed; carries the failing sample/node index when known."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class InstabilityError(EvaluationError):
    """Queueing model evaluated outside its stability region."""


class DatasetLookupError(EvaluationError):
    """No dataset row matches the query point."""
