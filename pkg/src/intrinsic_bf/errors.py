"""Exception hierarchy shared by all modules."""


class IntrinsicBFError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(IntrinsicBFError, ValueError):
    pass


class RankDeficient(IntrinsicBFError, ValueError):
    pass


class DegenerateFit(IntrinsicBFError, ValueError):
    """The reduced-model residual sum of squares is zero."""


class DomainError(IntrinsicBFError, ValueError):
    pass


class ConfigError(IntrinsicBFError, ValueError):
    pass


class EmptyInput(IntrinsicBFError, ValueError):
    pass


class SchemaError(IntrinsicBFError, ValueError):
    pass


class ParseError(IntrinsicBFError, ValueError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class MissingColumn(IntrinsicBFError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class NotConverged(IntrinsicBFError, RuntimeWarning):
    """Quadrature refinement budget exhausted.

    Issued as a warning: the best available estimate is still returned,
    flagged with ``converged=False``.
    """
