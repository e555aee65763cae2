"""Exception hierarchy for the priceopt package."""


class PriceOptError(Exception):
    """Base class for all priceopt errors."""


class StructuralError(PriceOptError):
    """Malformed problem data: bad shapes, non-finite entries, broken sparsity."""


class ValidationError(PriceOptError):
    """Well-formed data that violates a value-level invariant (e.g. delta <= 0)."""


class ParseError(ValidationError):
    """A file could not be parsed; carries line/field context when known."""

    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        ctx = []
        if field is not None:
            ctx.append(f"field {field!r}")
        if line is not None:
            ctx.append(f"line {line}")
        if ctx:
            message = f"{message} ({', '.join(ctx)})"
        super().__init__(message)
        self.line = line
        self.field = field


class ContractError(PriceOptError):
    """A documented precondition of an operation was violated by the caller."""


class CapacityError(PriceOptError):
    """An exhaustive routine was asked to run beyond its hard size guard."""


class NumericError(PriceOptError):
    """A computation produced non-finite values or an iterative solve failed."""
