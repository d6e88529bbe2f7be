"""Exception types shared across the package."""


class PhnLinkError(Exception):
    """Base class for all package errors."""


class ConfigError(PhnLinkError):
    """Invalid configuration value or malformed config file."""


class DimensionError(PhnLinkError):
    """Vector/matrix dimensions inconsistent with the operation."""


class SingularMatrixError(PhnLinkError):
    """A linear solve hit a (numerically) singular system."""


class NumericalFailure(PhnLinkError):
    """A detection run produced non-finite values."""


class CampaignError(PhnLinkError):
    """Campaign-level failure, e.g. too many failed trials."""
