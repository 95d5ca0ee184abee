"""Exception types raised across the laboratory."""


class EmmLabError(Exception):
    """Base class for every error the laboratory raises on purpose."""


class BadShape(EmmLabError, ValueError):
    """A grid axis was requested with fewer than 2 nodes."""


class NonUniformSpacing(EmmLabError, ValueError):
    """Box and node counts imply different spacings on different axes."""


class AllNeighborsMasked(EmmLabError, ValueError):
    """An unmasked node has no usable neighbor along some axis."""


class EmptyRegion(EmmLabError, ValueError):
    """No unmasked node lies strictly inside the integration region."""


class SupportOutsideDomain(EmmLabError, ValueError):
    """A test function's support ball is not strictly inside the grid box."""


class BallOutsideDomain(EmmLabError, ValueError):
    """The closed ball pokes out of the grid box."""


class ConstantField(EmmLabError, ValueError):
    """Gradient energy below threshold; the Poincare ratio is vacuous."""


class NearZeroVector(EmmLabError, ValueError):
    """Cannot project a (near-)zero vector to the unit sphere."""


class StepCollapse(EmmLabError, RuntimeError):
    """Backtracking shrank the descent step below 1e-12 of its initial value."""


class RadiusBelowResolution(EmmLabError, ValueError):
    """A requested radius is below the trusted floor of 4 grid cells."""


class DegenerateAnnulus(EmmLabError, ValueError):
    """Inner radius is not strictly smaller than the outer radius."""


class RescaleOutOfDomain(EmmLabError, ValueError):
    """The rescaling window y + rho * (out box) leaves the source grid."""


class NoConvergence(EmmLabError, RuntimeError):
    """Cauchy gaps of the rescaling ladder failed the extraction criterion."""


class NoSeparation(EmmLabError, ValueError):
    """Regular and singular reference values cannot be separated with margin 2."""


class EmptyCloud(EmmLabError, ValueError):
    """A point-cloud estimator was handed no points."""


class EmptySingularSet(EmmLabError, ValueError):
    """Dimension estimation was requested for a scan with no singular points."""


class UnknownSuite(EmmLabError, ValueError):
    """The verify command was asked for a suite that does not exist."""


class FieldFormatError(EmmLabError, ValueError):
    """An EMMF v1 file is malformed."""


class ConfigError(EmmLabError, ValueError):
    """A run configuration document is malformed or has unknown keys."""
