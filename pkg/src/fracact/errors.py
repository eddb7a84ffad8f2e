"""Exception types shared across the package."""


class FracActError(Exception):
    """Base class for all package errors."""


class PoleError(FracActError, ValueError):
    """Gamma evaluated at (or within tolerance of) a non-positive integer."""


class DomainError(FracActError, ValueError):
    """Argument outside the domain of the operation."""


class GammaOverflowError(FracActError, OverflowError):
    """Result magnitude exceeds the double range."""


class NonFiniteError(FracActError, FloatingPointError):
    """A NaN or Inf appeared where a finite value is required.

    ``layer`` and ``index`` locate the first offending element when known.
    """

    def __init__(self, message, layer=None, index=None):
        super().__init__(message)
        self.layer = layer
        self.index = index


class TrainingAborted(NonFiniteError):
    """Training hit a non-finite loss or activation and stopped."""

    def __init__(self, message, layer=None, index=None, epoch=None, step=None):
        super().__init__(message, layer=layer, index=index)
        self.epoch = epoch
        self.step = step


class CacheMismatchError(FracActError, ValueError):
    """A backward pass was given a cache that does not match its inputs."""


class NotYetRunError(FracActError, RuntimeError):
    """An operation needs a forward pass that has not happened yet."""


class ConfigError(FracActError, ValueError):
    """Invalid configuration file content."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(loc + message)
        self.path = path
        self.line = line


class DataFormatError(FracActError, ValueError):
    """Malformed dataset file."""

    def __init__(self, message, row=None, column=None):
        if row is not None:
            message = f"row {row}" + (f", column {column}" if column is not None else "") + f": {message}"
        super().__init__(message)
        self.row = row
        self.column = column
