"""Exception types raised by the occupancy grid toolkit."""


class UnsupportedOperation(TypeError):
    """The requested operation is not defined for this sensor model variant."""


class DegenerateLikelihood(ValueError):
    """Both cell-state likelihoods vanish: the reading is impossible under the model."""


class SingularCovariance(ValueError):
    """A covariance that must be inverted is singular and needs regularization."""


class EnumerationTooLarge(ValueError):
    """Brute-force configuration enumeration refused for a ray that is too long."""


class NoOverlapWarning(UserWarning):
    """Two maps (or a beam and a map) share no cells."""


class PyramidTruncatedWarning(UserWarning):
    """Fewer pyramid levels were built than requested."""
