"""
Base exceptions of the pipeline.

Apps define their specific exceptions next to the code raising them, deriving from
one of the classes here. The management commands map the three families to the exit
codes ``1`` (`ConfigurationError`), ``2`` (`DataError`) and ``3`` (`InfeasibleError`).
"""


class PipelineError(Exception):
    """Root of all errors raised by `hilbertfc`."""


class ConfigurationError(PipelineError, ValueError):
    """Raised when a parameter is invalid, e.g. a curve order out of range, a
    non-positive FWHM or an unknown architecture."""


class DataError(PipelineError):
    """Raised when input data is malformed or does not fit the requested operation."""


class BoundsError(DataError, IndexError):
    """Raised for indices or coordinates outside their valid range."""


class InsufficientSamplesError(DataError):
    """Raised when a time series is too short for the requested operation."""


class LengthMismatchError(DataError):
    """Raised when arrays that must be paired have different lengths."""


class InfeasibleError(PipelineError):
    """Raised when a randomized search (seed packing, split rejection) gives up."""


class ModelStateError(PipelineError, RuntimeError):
    """Raised when a model is used out of order, e.g. backward before forward."""
