"""Exception hierarchy shared by every module of the package."""


class ShapeEmbedError(Exception):
    """Base class for all package errors."""


class ParamError(ShapeEmbedError, ValueError):
    """Invalid parameter or parameter combination."""


class DomainError(ShapeEmbedError, ValueError):
    """Function evaluated outside its domain (e.g. a singular shape at zero)."""


class NonInvertibleError(ShapeEmbedError):
    """A shape could not be certified strictly increasing, so it cannot be inverted."""


class NoRootError(ShapeEmbedError):
    """A root-finding bracket does not contain a sign change."""


class ConvergenceError(ShapeEmbedError):
    """An iterative solver stalled before reaching its tolerance."""


class RangeError(ShapeEmbedError, ValueError):
    """Input value outside its admissible range."""


class DimensionError(ShapeEmbedError, ValueError):
    """Array shapes do not agree."""


class RankError(ShapeEmbedError):
    """Covariance matrix rank is too low for the requested projection."""


class NonFiniteError(ShapeEmbedError, FloatingPointError):
    """The optimizer produced a non-finite coordinate."""

    def __init__(self, message, epoch=None, edge=None):
        super().__init__(message)
        self.epoch = epoch
        self.edge = edge


class LabelError(ShapeEmbedError, ValueError):
    """Labels do not support the requested metric."""


class DegenerateError(ShapeEmbedError, ValueError):
    """Point cloud has zero spread after centering."""


class DataError(ShapeEmbedError, ValueError):
    """Malformed input data file."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class ConfigError(ShapeEmbedError, ValueError):
    """Malformed or unknown configuration entry."""
