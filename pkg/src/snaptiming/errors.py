"""Exception hierarchy shared by the pipeline stages."""


class SnapTimingError(Exception):
    """Base class for all package errors."""


class DomainError(SnapTimingError, ValueError):
    """A numerical routine received an argument outside its domain."""


class ParseError(SnapTimingError):
    """A CSV row could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IntegrityError(SnapTimingError):
    """Input data violates a uniqueness or consistency constraint."""


class SchemaError(SnapTimingError):
    """Required columns are missing from an input table."""


class DetectionError(SnapTimingError):
    """Motion start could not be determined for a play."""


class CalibrationError(SnapTimingError):
    """Speed-ratio calibration had no usable plays."""


class FeatureError(SnapTimingError):
    """Clustering features could not be extracted for a play."""


class SelectionError(SnapTimingError):
    """Every candidate mixture fit was degenerate."""


class BuildError(SnapTimingError):
    """The model design matrix could not be assembled."""


class SamplerError(SnapTimingError):
    """The MCMC sampler failed to initialize or run."""


class CorrelationError(SnapTimingError):
    """Pearson correlation is undefined for the supplied series."""
