"""Exception hierarchy shared across the package.

The CLI maps these onto stable exit codes (see ``gsoftmax.cli``).
"""


class GSoftmaxError(Exception):
    """Base class for every error raised by this package."""


class DomainError(GSoftmaxError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ShapeError(GSoftmaxError, ValueError):
    """Array dimensions do not agree."""


class DegenerateError(DomainError):
    """A statistic is undefined for the given data (e.g. zero variance)."""


class FormatError(GSoftmaxError, ValueError):
    """A data file does not follow its expected on-disk layout."""


class ConfigError(GSoftmaxError, ValueError):
    """An experiment configuration failed validation."""


class DivergenceError(GSoftmaxError, FloatingPointError):
    """Training produced a non-finite loss."""

    def __init__(self, message, epoch=None, step=None):
        super().__init__(message)
        self.epoch = epoch
        self.step = step
