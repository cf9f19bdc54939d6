"""Exception types shared across the package."""


class DegenerateInputError(ValueError):
    """Input is structurally unusable (constant column, empty support, ...).

    Raised instead of silently returning a conventional value, so callers
    can distinguish "computed zero" from "could not be computed".
    """


class NumericError(ArithmeticError):
    """A computation produced non-finite values (overflow, nan propagation)."""
