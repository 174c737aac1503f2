"""Exception hierarchy shared by all oodlab modules."""


class OodlabError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(OodlabError):
    """Empty or non-finite numeric input."""


class ShapeError(OodlabError):
    """Array dimensions incompatible with the requested operation."""


class DegenerateVectorError(OodlabError):
    """Vector with (near-)zero norm where a direction is required."""


class InvalidKError(OodlabError):
    """Cluster count incompatible with the data (e.g. more clusters than rows)."""


class InvalidLabelError(OodlabError):
    """Class label outside the declared label range."""


class InvalidRequestError(OodlabError):
    """Request exceeds what the data can provide (e.g. sample size too large)."""


class UndefinedMetricError(OodlabError):
    """Metric undefined for the given input (too few points or clusters)."""


class StateError(OodlabError):
    """Operation invoked without the required prior state."""


class DivergenceError(OodlabError):
    """Training produced non-finite values."""


class ConfigError(OodlabError):
    """Invalid or inconsistent experiment configuration."""


class DataFormatError(OodlabError):
    """Malformed dataset or report file."""


class CheckpointError(DataFormatError):
    """Corrupt, truncated, or version-mismatched checkpoint file."""
