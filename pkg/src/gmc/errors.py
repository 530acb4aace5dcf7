"""Exception hierarchy shared by every module."""


class GmcError(Exception):
    """Base class for all errors raised by this package."""


class DataError(GmcError):
    """Input data is malformed or unusable."""


class MissingColumn(DataError):
    pass


class NonNumericValue(DataError):
    pass


class FewerThanThreeSamples(DataError):
    pass


class DegenerateScale(DataError):
    pass


class EmptyDataset(DataError):
    pass


class LengthMismatch(DataError):
    pass


class ConfigError(GmcError):
    """Configuration is invalid or inconsistent."""


class InvalidRange(ConfigError):
    pass


class TooFewPoints(GmcError):
    """Not enough defined query points to fit a surface."""


class EmptyRegion(GmcError):
    pass


class SubsetTooLarge(ConfigError):
    pass
