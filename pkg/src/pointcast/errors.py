"""Exception types shared across the package."""


class PointcastError(Exception):
    """Base class for all library errors."""


class ShapeError(PointcastError):
    """Operands have incompatible shapes; the message names both."""


class GradientError(PointcastError):
    """Autodiff contract violated (non-scalar loss, missing gradient, ...)."""


class NonFiniteError(PointcastError):
    """A tensor or loss contains NaN/Inf."""


class EmptyInputError(PointcastError):
    """An operation received an empty neighborhood or query set."""


class EmptyHistoryError(PointcastError):
    """A sample has no history observations to condition on."""


class DatasetFormatError(PointcastError):
    """A dataset file could not be parsed; the message carries the line number."""


class ValidationError(PointcastError):
    """Input data or configuration violates a documented precondition."""


class TrainingDiverged(PointcastError):
    """Training produced a non-finite loss. Carries a diagnostic snapshot."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics
