"""Package-wide exception types, mapped onto CLI exit codes."""


class AdmissibilityError(ValueError):
    """A model or configuration violates a standing hypothesis
    (for example the interaction dominates the contraction rate)."""

    exit_code = 2


class NumericalError(ArithmeticError):
    """A computation produced non-finite values or failed to converge."""

    exit_code = 3

    def __init__(self, message: str, t: float | None = None):
        if t is not None:
            message = f"{message} (t={t:.6g})"
        super().__init__(message)
        self.t = t
