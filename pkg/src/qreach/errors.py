class DimensionError(ValueError):
    """Operands have incompatible Hilbert-space dimensions."""


class ConfigError(ValueError):
    """Invalid experiment or system configuration."""

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line

    def __str__(self):
        where = []
        if self.field:
            where.append(f"field '{self.field}'")
        if self.line is not None:
            where.append(f"line {self.line}")
        msg = super().__str__()
        return f"{msg} ({', '.join(where)})" if where else msg


class NumericalError(RuntimeError):
    """A numerical invariant was violated during integration or evaluation."""


class TruncationError(NumericalError):
    """A truncated (bosonic) basis was too small for an exact evaluation."""


class PositivityWarning(RuntimeWarning):
    """A density matrix acquired an eigenvalue below the flag threshold."""


class ConvergenceWarning(RuntimeWarning):
    """Ensemble cost still trending at the end of the simulation window."""
