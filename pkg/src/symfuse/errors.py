"""Exception types raised across the package.

The CLI maps :class:`DataError` subclasses to exit code 2 and
:class:`InvariantError` subclasses to exit code 3.
"""


class SymfuseError(Exception):
    pass


class DataError(SymfuseError, ValueError):
    """Malformed or unsupported input data."""


class FormatError(DataError):
    pass


class PanelError(DataError):
    """A score panel is missing experts or names unknown ones."""


class TrainingSizeError(DataError):
    pass


class InvariantError(SymfuseError, ValueError):
    """A numeric precondition or invariant does not hold."""


class DimensionError(InvariantError):
    pass


class ExpertFailure(SymfuseError, RuntimeError):
    def __init__(self, index, cause):
        super().__init__(f"expert {index} failed: {cause!r}")
        self.index = index
        self.cause = cause
