"""Exception hierarchy shared across the package."""


class CausalBaldError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(CausalBaldError, ValueError):
    """An experiment or loop configuration is invalid."""


class DegenerateTreatmentError(CausalBaldError, ValueError):
    """The pool holds a single treatment value, so propensity is undefined."""


class DoubleAcquisitionError(CausalBaldError, ValueError):
    """A pool index was requested after it had already been labeled."""


class NotFittedError(CausalBaldError, RuntimeError):
    """A model was queried before it was fitted."""


class NumericError(CausalBaldError, ArithmeticError):
    """A matrix stayed non-positive-definite after jitter escalation."""


class TrainingDivergenceError(CausalBaldError, RuntimeError):
    """An ensemble member produced a non-finite loss."""

    def __init__(self, member: int, epoch: int):
        super().__init__(f"ensemble member {member} diverged at epoch {epoch}")
        self.member = member
        self.epoch = epoch


class AggregationError(CausalBaldError, ValueError):
    """Trajectories passed to aggregation do not share a step structure."""


class IhdpFormatError(CausalBaldError, ValueError):
    """An IHDP file could not be parsed.

    ``row`` is the 1-based data row (header excluded) and ``column`` the
    0-based column index, when known.
    """

    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.row = row
        self.column = column


class IhdpSchemaError(IhdpFormatError):
    """An IHDP file has the wrong number of columns or rows."""
