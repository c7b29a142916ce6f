"""Exception and warning classes raised across the package."""


class EMVGCError(Exception):
    """Base class for all package errors."""


class ValidationError(EMVGCError, ValueError):
    """Input data violates a structural invariant."""


class DimensionMismatchError(ValidationError):
    pass


class NonFiniteError(ValidationError):
    pass


class EmptyViewError(ValidationError):
    pass


class InvalidParameterError(ValidationError):
    pass


class InvalidProblemError(ValidationError):
    """A quadratic program is not symmetric PSD or has inconsistent shapes."""


class LengthMismatchError(ValidationError):
    pass


class NonSquareError(ValidationError):
    pass


class DegenerateInputError(ValidationError):
    """Fewer distinct points than requested clusters."""


class SingularSystemError(EMVGCError, ArithmeticError):
    """The anchor-update normal equations stayed singular after jitter."""


class QPNotConvergedError(EMVGCError):
    """One or more simplex QP columns failed to reach the KKT tolerance.

    Attributes
    ----------
    columns : ndarray of int
        Indices of the offending columns.
    residuals : ndarray of float
        Final KKT residuals for those columns.
    solution : ndarray
        Best iterate for the whole batch (feasible, just not certified).
    """

    def __init__(self, columns, residuals, solution=None):
        self.columns = columns
        self.residuals = residuals
        self.solution = solution
        head = ", ".join(str(int(c)) for c in list(columns)[:10])
        more = "" if len(columns) <= 10 else f", ... ({len(columns)} total)"
        super().__init__(
            f"simplex QP not converged for column(s) {head}{more}; "
            f"max residual {max(residuals, default=0.0):.3e}"
        )


class DataFileError(EMVGCError):
    pass


class ParseError(DataFileError, ValueError):
    def __init__(self, path, row, column, message):
        self.path = path
        self.row = row
        self.column = column
        super().__init__(f"{path}: row {row}, column {column}: {message}")


class RowCountMismatchError(DataFileError, ValueError):
    pass


class MissingFileError(DataFileError, FileNotFoundError):
    pass


class QPConvergenceWarning(RuntimeWarning):
    pass


class RankDeficientWarning(RuntimeWarning):
    """The anchor graph has fewer than k non-negligible singular values."""
