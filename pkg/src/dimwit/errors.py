"""Exception types shared across the package.

The CLI maps these onto stable exit codes (see ``dimwit.cli``).
"""


class DomainError(ValueError):
    """An argument violates a documented precondition."""


class ResourceLimitError(RuntimeError):
    """A computation would exceed its enumeration / memory guard."""


class EstimationError(RuntimeError):
    """Count data is unusable for estimation (e.g. an empty (x, y) cell)."""


class DataFileError(RuntimeError):
    """A bundled or user-supplied data file is missing or malformed."""


class StaleTableError(RuntimeError):
    """A cached bound table was produced with a different optimizer config."""
