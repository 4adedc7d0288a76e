"""Exception types shared by the solvers and the CLI."""


class InvalidInputError(ValueError):
    """Bad shapes, non-finite entries or out-of-range parameters."""


class NumericalError(ArithmeticError):
    """A numerical routine hit a condition its derivation rules out."""


class UnsupportedConfigurationError(ValueError):
    """The request is well-formed but outside what the code supports."""
