"""Exception types shared across the package.

The CLI maps :class:`PreconditionError` to exit code 2 and
:class:`ResourceCapError` to exit code 3.
"""


class PreconditionError(ValueError):
    """An input violates a documented precondition."""


class GridTooSmallError(PreconditionError):
    """A grid does not resolve the spectrum it is asked to represent."""


class ResourceCapError(RuntimeError):
    """A computation would exceed a configured size cap."""
