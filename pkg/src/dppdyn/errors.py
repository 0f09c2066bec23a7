"""Exception hierarchy shared across the package."""


class DppDynError(Exception):
    """Base class for all errors raised by dppdyn."""


class NotHermitianError(DppDynError):
    pass


class NotPositiveDefiniteError(DppDynError):
    pass


class DimensionMismatchError(DppDynError):
    pass


class SingularRestrictionError(DppDynError):
    pass


class NumericallySingularError(DppDynError):
    pass


class SiteOccupiedError(DppDynError):
    pass


class SiteEmptyError(DppDynError):
    pass


class IdenticalSitesError(DppDynError):
    pass


class BoundViolatedError(DppDynError):
    pass


class DuplicateSitesError(DppDynError):
    pass


class ConfigurationNotInWindowError(DppDynError):
    pass


class WindowTooLargeError(DppDynError):
    pass


class TooManySitesError(DppDynError):
    pass


class EnumerationTooLargeError(DppDynError):
    pass


class NotReversibleError(DppDynError):
    pass


class AssumptionAViolatedError(DppDynError):
    pass


class RateOverflowError(DppDynError):
    pass


class InsufficientDataError(DppDynError):
    pass


class ConfigError(DppDynError):
    """Raised for malformed or inconsistent experiment configuration."""


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass
