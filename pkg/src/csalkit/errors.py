"""Exception taxonomy shared by all modules.

Two branches matter for the CLI exit-code contract: ``InputError`` covers
anything wrong with the data handed to us (unreadable or malformed files,
out-of-range budgets) and maps to exit code 2; ``OperationError`` covers
failures of a requested operation on otherwise valid input and maps to
exit code 3.
"""


class ToolkitError(Exception):
    """Base class for all csalkit errors."""


class InputError(ToolkitError):
    """Invalid input data or parameters (CLI exit code 2)."""


class OperationError(ToolkitError):
    """A requested operation cannot be performed (CLI exit code 3)."""


class MalformedHeader(InputError):
    """Bad magic, version, header fields, or trailer structure."""


class DimensionMismatch(InputError):
    """Declared matrix shape disagrees with the payload."""


class NonFiniteValue(InputError):
    """A NaN or Inf entry; carries the offending row/column."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        super().__init__(message)
        self.row = row
        self.col = col


class DuplicateId(InputError):
    """Two samples share the same identifier."""


class IoFailure(InputError):
    """Underlying file I/O failed."""


class BudgetOutOfRange(InputError):
    """Budget fraction outside (0, 1] or count outside [1, N]."""


class AlreadyNormalized(OperationError):
    """Requested normalization conflicts with the bank's existing tag."""


class InvalidK(OperationError):
    """Neighbor or cluster count outside its legal range."""


class CapacityExceeded(OperationError):
    """Dense pairwise matrix would exceed the configured sample cap."""


class BudgetTooSmall(OperationError):
    """Strategy needs a larger budget (e.g. boundary selection needs M >= 2)."""


class UnknownStrategy(OperationError):
    """Strategy name not in the registry."""


class InvalidDelta(OperationError):
    """Coverage radius resolved to a non-positive value."""


class EmptyQuery(OperationError):
    """An evaluation was asked to score an empty query set."""
