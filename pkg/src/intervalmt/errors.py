"""Exception hierarchy.

``DataError`` covers anything wrong with the observations themselves
(the CLI maps it to exit code 2); plain ``ValueError`` is used for bad
arguments.
"""


class DataError(ValueError):
    """Invalid or unusable input data."""


class DegenerateSampleError(DataError):
    """A sample entering a statistic has zero total size."""


class DomainError(DataError):
    """A shifted data point left the valid sample space."""
