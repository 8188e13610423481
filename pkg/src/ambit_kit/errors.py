"""Exception types raised across the toolkit."""


class AmbitKitError(Exception):
    """Base class for all toolkit errors."""


class EvaluationError(AmbitKitError):
    """An integrand returned NaN; ``point`` holds the offending argument."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class NonFiniteRegion(AmbitKitError):
    pass


class ColoredUnsupported(AmbitKitError):
    pass


class ImproperTauMisuse(AmbitKitError):
    pass


class NotIntegrableError(AmbitKitError):
    pass


class RegionNotAligned(AmbitKitError):
    pass


class CutoffTooSmall(AmbitKitError):
    pass


class SingularEvaluation(AmbitKitError):
    pass


class NoFiniteRoot(AmbitKitError):
    pass


class InadmissiblePhi(AmbitKitError):
    pass


class ConfigError(AmbitKitError):
    """Malformed configuration file or CLI value."""
