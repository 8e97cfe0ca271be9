"""Exception and warning types shared across the package."""


class TexplainError(Exception):
    """Base class for all errors raised by texplain."""


class DimensionMismatchError(TexplainError, ValueError):
    """Two rasters/masks that must share dimensions do not."""


class DegenerateImageError(TexplainError, ValueError):
    """Image has a single-level histogram; no threshold separates two classes."""


class UnknownOperatorError(TexplainError, ValueError):
    """Operator id not present in the registry."""


class RegistryMismatchError(TexplainError, ValueError):
    """A report or plan does not line up with the expected operator registry."""


class SamplingError(TexplainError, ValueError):
    """Plan sampling request cannot be satisfied (e.g. m exceeds the plan universe)."""


class InsufficientSamplesError(TexplainError, ValueError):
    """Too few rows to fit the requested surrogate."""


class ScorerTransportError(TexplainError, RuntimeError):
    """External scorer unreachable, or its reply was malformed."""


class GroundTruthError(TexplainError, ValueError):
    """Ground-truth CSV is malformed; message names the offending line."""


class DegenerateRemovalWarning(UserWarning):
    """Region removal was asked to keep an empty region; image left unchanged."""
