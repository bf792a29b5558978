"""
errors.py - Exception types raised by tailbandits
"""


class TailBanditError(Exception):
    """Base class for every error raised by the package."""


class BanditInputError(TailBanditError, ValueError):
    """An argument is outside the domain of the operation."""


class DegenerateInstanceError(BanditInputError):
    """The instance has no positive gap where one is required."""


class ConfigError(TailBanditError, ValueError):
    """
    An experiment config violates the schema.

    Args:
        field: Dotted path of the offending field (e.g. 'policies[0].bonus.beta')
        message: What is wrong with it
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class NumericalDriftError(TailBanditError, ArithmeticError):
    """The running design-matrix inverse drifted away from a direct solve."""
