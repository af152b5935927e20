"""Exception and warning types raised across the package."""


class DistrictSimError(Exception):
    """Base class for every error raised by districtsim."""


class ValidationError(DistrictSimError, ValueError):
    pass


class SizeMismatch(ValidationError):
    """District sizes do not add up to the number of electors."""


class ShareMismatch(ValidationError):
    """Popularity vector and party vote totals disagree."""


class NonPositive(ValidationError):
    """A count or size that must be positive is not."""


class RowSumViolation(ValidationError):
    """A tally row does not sum to its district size."""


class DimensionMismatch(ValidationError):
    pass


class Exhausted(DistrictSimError):
    """No index on the sampled axis has remaining quota."""


class PhiRejectionExceeded(DistrictSimError):
    """No affinity matrix satisfying the per-party constraint was found."""


class UnknownCommunity(DistrictSimError, KeyError):
    pass


class ConfigError(ValidationError):
    """Malformed or unrecognised configuration content."""


class ParseError(DistrictSimError, ValueError):
    pass


class DuplicatePair(ParseError):
    """The same (district, party) pair appears twice in a results file."""


class EmptyFile(ParseError):
    pass


class SchemaVersionMismatch(DistrictSimError):
    pass


class NoAcceptanceWarning(UserWarning):
    """Calibration budget ran out before any candidate was accepted."""
